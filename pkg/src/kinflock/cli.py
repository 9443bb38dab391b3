"""Command line interface.

Subcommands:
  run           execute a scenario config; exit 0 iff all assertions pass
  validate      check a config file against the schema and semantic rules
  diff-reports  compare two diagnostics.json files

Exit codes: 0 pass, 1 assertion failure, 2 configuration error,
3 runtime/invariant abort.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .errors import ConfigError, KinflockError
from .runner import run


def _cmd_run(args):
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.data["seed"] = args.seed
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(cfg, args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except KinflockError as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 3
    failed = [c for c in report.assertions if not c.passed]
    for c in report.assertions:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: value={c.value:.6g} tolerance={c.tolerance:.6g}")
    if failed:
        print(f"{len(failed)} assertion(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_validate(args):
    try:
        load_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    print("config is valid")
    return 0


def _cmd_diff_reports(args):
    try:
        with open(args.report_a, encoding="utf-8") as fh:
            a = json.load(fh)
        with open(args.report_b, encoding="utf-8") as fh:
            b = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return 2
    differences = []
    ra, rb = a.get("records", []), b.get("records", [])
    if len(ra) != len(rb):
        differences.append(f"record count differs: {len(ra)} vs {len(rb)}")
    else:
        worst = 0.0
        for i, (x, y) in enumerate(zip(ra, rb)):
            keys = set(x) | set(y)
            for k in keys:
                va, vb = x.get(k), y.get(k)
                if isinstance(va, (int, float)) and isinstance(vb, (int, float)):
                    d = abs(va - vb)
                    if d > args.tol:
                        differences.append(f"record {i} key {k}: {va!r} vs {vb!r}")
                    worst = max(worst, d)
                elif va != vb:
                    differences.append(f"record {i} key {k}: {va!r} vs {vb!r}")
        print(f"max numeric record difference: {worst:.6g}")
    aa = {c["name"]: c for c in a.get("assertions", [])}
    bb = {c["name"]: c for c in b.get("assertions", [])}
    for name in sorted(set(aa) | set(bb)):
        ca, cb = aa.get(name), bb.get(name)
        if ca is None or cb is None:
            differences.append(f"assertion {name} present in only one report")
        elif ca["passed"] != cb["passed"] or abs(ca["value"] - cb["value"]) > args.tol:
            differences.append(f"assertion {name}: {ca['value']!r}/{ca['passed']} "
                               f"vs {cb['value']!r}/{cb['passed']}")
    if differences:
        for d in differences[:50]:
            print(d)
        print(f"{len(differences)} difference(s)", file=sys.stderr)
        return 1
    print("reports agree")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="kinflock",
                                     description="Flocking solvers and invariant checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker threads (must not affect results)")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a scenario config")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=_cmd_validate)

    p_diff = sub.add_parser("diff-reports", help="compare two diagnostics reports")
    p_diff.add_argument("report_a")
    p_diff.add_argument("report_b")
    p_diff.add_argument("--tol", type=float, default=0.0)
    p_diff.set_defaults(func=_cmd_diff_reports)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
