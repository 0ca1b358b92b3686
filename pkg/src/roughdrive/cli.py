"""Command-line entry point: ``roughdrive run | suite | list-fields | list-testfns``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .errors import ConfigError
from .harness.config import load_config
from .harness.report import write_report
from .harness.runner import run_config
from .harness.suites import SUITES, run_suite
from .library import list_fields, list_matrix_drivers, list_testfns

DEFAULT_OUT = "roughdrive-out"


def _emit(report, out_dir) -> int:
    for line in report.lines():
        print(line)
    print(f"{'PASS' if report.passed else 'FAIL'} {report.name} -> {out_dir}")
    return 0 if report.passed else 1


def cmd_run(args) -> int:
    started = time.perf_counter()
    try:
        cfg = load_config(args.config, args.seed)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    out = args.out or cfg.output or str(Path(DEFAULT_OUT) / f"{Path(args.config).stem}-seed{cfg.seed}")
    report = run_config(cfg)
    write_report(report, out, started)
    return _emit(report, out)


def cmd_suite(args) -> int:
    started = time.perf_counter()
    names = list(SUITES) if args.name == "all" else [args.name]
    if args.name != "all" and args.name not in SUITES:
        print(f"error: unknown suite {args.name!r}; known: all, {', '.join(SUITES)}",
              file=sys.stderr)
        return 2
    status = 0
    for name in names:
        report = run_suite(name)
        out = Path(args.out or DEFAULT_OUT) / f"suite-{name}"
        write_report(report, out, started)
        status |= _emit(report, out)
    return status


def _print_table(items: dict) -> int:
    width = max(len(k) for k in items)
    for k, v in items.items():
        print(f"{k.ljust(width)}  {v}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughdrive",
                                description="Rough drivers, rough transport and their checks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute one JSON experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: roughdrive-out/<config>-seed<N>)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("suite", help="run a named acceptance suite (or 'all')")
    s.add_argument("name", help=f"one of: all, {', '.join(SUITES)}")
    s.add_argument("--out", help=f"parent output directory (default: {DEFAULT_OUT})")
    s.set_defaults(func=cmd_suite)

    f = sub.add_parser("list-fields", help="list shipped vector fields")
    f.set_defaults(func=lambda a: _print_table(list_fields()))
    t = sub.add_parser("list-testfns", help="list shipped test functions")
    t.set_defaults(func=lambda a: _print_table(list_testfns()))
    m = sub.add_parser("list-drivers", help="list shipped matrix drivers")
    m.set_defaults(func=lambda a: _print_table(list_matrix_drivers()))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
