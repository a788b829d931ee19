"""Command line: ``skl run <config>``, ``skl accept``, ``skl list-scenarios``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness

log = logging.getLogger("skl")


def _run(args) -> int:
    try:
        cfg = harness.load_config(args.config)
        cfg = harness.with_overrides(cfg, output=args.out, format=args.format,
                                     threads=args.threads, seed=args.seed)
        rows = harness.run_scenario(cfg)
    except (harness.ConfigError, harness.RowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = harness.default_output(cfg)
    harness.emit(rows, out, cfg.format, harness.COLUMNS)
    report = harness.check_invariants(rows, cfg)
    print(f"{len(rows)} rows written to {out}")
    print(f"calibrated trivial-bound constant C = {report.c_trivial:.6g}")
    for msg in report.messages:
        print(f"invariant violated: {msg}")
    print("all invariants hold" if report.passed else f"{len(report.messages)} invariant violation(s)")
    return 0 if report.passed else 1


def _accept(args) -> int:
    from .acceptance import run_all
    results = run_all(echo=True)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} criteria passed")
    return 0 if n_ok == len(results) else 1


def _list(args) -> int:
    for name, desc in harness.list_scenarios():
        print(f"{name:18s} {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skl", description="Spectral kernel asymptotics toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config and write a result table")
    r.add_argument("config")
    r.add_argument("--out", help="output path (default: <scenario>.<format> in the cwd)")
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--threads", type=int)
    r.add_argument("--seed", type=lambda s: int(s, 0), help="pair sampler seed (default 0x5EED)")
    r.set_defaults(func=_run)
    a = sub.add_parser("accept", help="run the acceptance suite")
    a.set_defaults(func=_accept)
    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.set_defaults(func=_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
