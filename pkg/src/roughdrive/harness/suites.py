"""Named acceptance suites with pinned parameters.

Every suite returns a :class:`Report`; the suite parameters are part of the
report's config so a re-run reproduces it exactly.
"""

from __future__ import annotations

import hashlib
import time

from ..library import list_matrix_drivers
from .config import THRESHOLDS
from .report import Report
from .runner import (
    TransportSetup, clear_caches, make_base_path, section_closed_form, section_drift,
    section_gronwall, section_growth, section_lift, section_lyons, section_matrix_cross,
    section_matrix_order, section_residuals, section_sewing, section_smoothing,
    section_stability, section_transport_invariants,
)

# remainder-exponent setups: short horizon on fine, aligned lift and time grids
EXP_T = 1.0 / 16
EXP_M = 1024
EXP_FIELDS = (("const1d", 64), ("compressible1d", 64), ("shear", 16))
EXP_SEEDS = (1, 2)
EXP_BANK = ("trig1", "trig2", "bump")
EXP_H = ("square", "cube", "sech2")
SLOPE_TOL = 0.1
STABILITY_SEED = 4
DRIFT_B = [[0.2, 0.1], [-0.3, 0.0]]


def exponent_setup(field_id: str, n: int, seed: int) -> TransportSetup:
    return TransportSetup(field_id, "mix", EXP_T, EXP_M, EXP_M, n, EXP_M, seed)


def _th(kind: str, name: str) -> float:
    return THRESHOLDS[kind][name]


def suite_chen(rep: Report) -> None:
    cases = [("brownian", 1, 16, 1), ("brownian", 2, 64, 2), ("brownian", 3, 64, 3),
             ("brownian", 2, 1024, 4), ("spiral", 2, 64, 0), ("parabola", 2, 64, 0)]
    for kind, ell, M, seed in cases:
        base = make_base_path(kind, ell, 1.0, M, seed)
        section_lift(rep, base, 0.4, _th("lift", "chen_defect"), _th("lift", "geometricity_defect"),
                     prefix=f"{kind}/ell{ell}/M{M}/seed{seed}/")


def suite_sewing(rep: Report) -> None:
    section_sewing(rep, 1.0, 16, 12, 2.0, _th("sew-demo", "sewing_constant"),
                   _th("sew-demo", "riemann_order_min"))


def suite_matrix(rep: Report) -> None:
    tol = _th("lyons-series", "series_vs_euler")
    section_matrix_order(rep, "smooth-pair", [8, 16, 32, 64, 128],
                         _th("integrate-matrix", "euler_order_min"))
    section_matrix_cross(rep, "smooth-pair", None, 64, _th("integrate-matrix", "cross_method"))
    section_lyons(rep, "smooth-pair", None, 8, 10, 64, tol, _th("lyons-series", "flow_defect"),
                  _th("lyons-series", "a2_match"), decay=False, prefix="series/")


def suite_growth(rep: Report) -> None:
    for name in sorted(list_matrix_drivers()):
        section_growth(rep, name, None, (0, 30), _th("integrate-matrix", "growth_ratio"),
                       prefix=f"{name}/")


def suite_duhamel(rep: Report) -> None:
    section_drift(rep, "linear", DRIFT_B, [8, 16, 32, 64, 128],
                  _th("integrate-matrix", "drift_order_min"),
                  _th("integrate-matrix", "duhamel_order_min"))


def suite_lyons(rep: Report) -> None:
    for name in ("smooth-pair", "brownian-pair"):
        section_lyons(rep, name, None, 8, 10, 64, _th("lyons-series", "series_vs_euler"),
                      _th("lyons-series", "flow_defect"), _th("lyons-series", "a2_match"),
                      prefix=f"{name}/")


def suite_smoothing(rep: Report) -> None:
    section_smoothing(rep, 1, 128, range(1, 9), 3, _th("smoothing-check", "ratio_spread"))


ORACLE_SETUPS = tuple(TransportSetup(f, "mix", 1.0, 1024, 16, 128, 1024, 1)
                      for f in ("const1d", "const2d", "shear"))


def suite_transport_oracles(rep: Report) -> None:
    for s in ORACLE_SETUPS:
        section_transport_invariants(rep, s, _th("transport", "max_principle_drift"),
                                     prefix=f"{s.field_id}/")
        section_closed_form(rep, s, _th("transport", "closed_form_error"), prefix=f"{s.field_id}/")


CONSERVATION_SETUP = TransportSetup("shear", "mix", 1.0, 1024, 16, 64, 1024, 1)


def suite_conservation(rep: Report) -> None:
    section_transport_invariants(rep, CONSERVATION_SETUP, _th("transport", "max_principle_drift"),
                                 _th("transport", "conservation_drift"),
                                 _th("transport", "doubling_factor"))


MAXPRINCIPLE_SETUPS = (
    TransportSetup("const1d", "square", 1.0, 1024, 64, 128, 1024, 1),
    TransportSetup("compressible1d", "bump", 1.0, 1024, 64, 128, 1024, 2),
    TransportSetup("compressible2d", "mix", 1.0, 256, 16, 32, 256, 3),
    TransportSetup("pair2d", "sin", 1.0, 256, 16, 32, 256, 4),
    TransportSetup("shear", "zero", 1.0, 256, 16, 32, 256, 5),
)


def suite_maximum_principle(rep: Report) -> None:
    for s in MAXPRINCIPLE_SETUPS:
        section_transport_invariants(rep, s, _th("transport", "max_principle_drift"),
                                     prefix=f"{s.field_id}/{s.datum_id}/")
    rep.results["structural_overhead_seconds"] = sum(
        v for k, v in rep.timings.items() if k.endswith("max_principle_seconds"))


def suite_remainder_exponents(rep: Report) -> None:
    for field_id, n in EXP_FIELDS:
        for seed in EXP_SEEDS:
            s = exponent_setup(field_id, n, seed)
            pre = f"{field_id}/seed{seed}/"
            section_transport_invariants(rep, s, _th("transport", "max_principle_drift"), prefix=pre)
            section_residuals(rep, s, EXP_BANK, SLOPE_TOL, prefix=pre)


def suite_renormalization(rep: Report) -> None:
    for field_id, n in EXP_FIELDS:
        for seed in EXP_SEEDS:
            s = exponent_setup(field_id, n, seed)
            section_residuals(rep, s, EXP_BANK, SLOPE_TOL, renormalize=EXP_H, plain=False,
                              prefix=f"{field_id}/seed{seed}/")


def suite_gronwall(rep: Report) -> None:
    cases = (("compressible1d", 64, EXP_BANK), ("shear", 16, EXP_BANK + ("one",)))
    for field_id, n, bank in cases:
        s = exponent_setup(field_id, n, 1)
        section_gronwall(rep, s, bank, SLOPE_TOL, _th("gronwall", "method_agreement"),
                         _th("gronwall", "reduction"), _th("gronwall", "conservation_drift"),
                         prefix=f"{field_id}/")


def suite_stability(rep: Report) -> None:
    section_stability(rep, "pair2d", "mix", STABILITY_SEED, [6, 7, 8, 9, 10], 1.0, 32, 1024, 16,
                      0.4, _th("stability", "max_principle_drift"))


DETERMINISM_TARGETS = ("chen", "sewing", "matrix-integration", "duhamel", "transport-oracles")


def suite_determinism(rep: Report) -> None:
    """Run each target twice from cold caches; the report bytes must match."""
    for name in DETERMINISM_TARGETS:
        digests = []
        for _ in range(2):
            clear_caches()
            digests.append(hashlib.sha256(run_suite(name).to_json().encode()).hexdigest())
        rep.results[f"{name}/sha256"] = digests[0]
        rep.check(f"{name}/byte_identical", digests[0] == digests[1], None, "true")


SUITES = {
    "chen": (suite_chen, "Chen and geometricity defects of piecewise-linear lifts"),
    "sewing": (suite_sewing, "sewing of s(t-s) and Riemann-sum defect order"),
    "matrix-integration": (suite_matrix, "Euler order, Picard and series agreement, flow defect"),
    "a-priori-bound": (suite_growth, "weighted-norm growth bound on every shipped matrix driver"),
    "duhamel": (suite_duhamel, "drift scheme against expm and the discrete Duhamel residual"),
    "lyons-series": (suite_lyons, "level-norm decay and truncated series against Euler"),
    "smoothing": (suite_smoothing, "epsilon-uniformity of the smoothing-operator estimates"),
    "transport-oracles": (suite_transport_oracles, "closed-form transport solutions"),
    "conservation": (suite_conservation, "L2 conservation for the shear field and its halving"),
    "maximum-principle": (suite_maximum_principle, "sup norm never exceeds the datum's"),
    "remainder-exponents": (suite_remainder_exponents, "Hölder slopes of increment, flat and sharp remainders"),
    "renormalization": (suite_renormalization, "sharp remainders of H(f)"),
    "gronwall": (suite_gronwall, "residual of the quadratic identity by two routes"),
    "stability": (suite_stability, "Cauchy property over dyadic lift levels"),
    "determinism": (suite_determinism, "byte-identical reports on re-run"),
}

ACCEPTANCE_ORDER = tuple(SUITES)


def run_suite(name: str) -> Report:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; known: {', '.join(SUITES)}")
    fn, desc = SUITES[name]
    rep = Report(f"suite:{name}", {"suite": name, "description": desc})
    t0 = time.perf_counter()
    fn(rep)
    rep.timings["total_seconds"] = time.perf_counter() - t0
    return rep


__all__ = ["ACCEPTANCE_ORDER", "SUITES", "run_suite"]
