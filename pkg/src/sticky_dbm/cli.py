"""Command line entry point.

Subcommands: chain-info, generator-check, simulate, report, acceptance.
Thread count (--threads or STICKY_DBM_THREADS) affects speed only, never
results.
"""

from __future__ import annotations

import argparse
import csv
import gzip as gzip_mod
import os
import sys

from .chain import build_chain, chain_summary
from .config import ConfigParseError, parse_config
from .errors import StickyDbmError
from .measure import require_process_conditions
from .runner import (acceptance_matrix, compute_statistics, generator_check_rows,
                     read_paths_csv, run_experiment, write_report)


def _load_config(path: str):
    with open(path) as fh:
        return parse_config(fh.read())


def _cmd_chain_info(args) -> int:
    cfg = _load_config(args.config)
    chain = build_chain(cfg.density, cfg.sticky, cfg.grid)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("key", "value"))
    for key, value in chain_summary(chain).items():
        writer.writerow((key, repr(value) if isinstance(value, float) else value))
    return 0


def _cmd_generator_check(args) -> int:
    cfg = _load_config(args.config)
    if cfg.sticky is None:
        print("generator-check needs a sticky structure", file=sys.stderr)
        return 2
    rows = generator_check_rows(cfg.density, cfg.sticky)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("pair", "residual", "tolerance", "status"))
    worst_fail = False
    for pair, res, tol, ok in rows:
        writer.writerow((pair, repr(float(res)), repr(float(tol)),
                         "pass" if ok else "fail"))
        worst_fail |= not ok
    return 1 if worst_fail else 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        cfg.sim = replace(cfg.sim, seed=args.seed)
    cfg.paths_csv = True
    result = run_experiment(cfg, out_dir=args.out, threads=args.threads)
    print(f"report: {result.report_path}")
    print(f"paths: {result.paths_path}")
    print(f"manifest: {result.manifest_path}")
    return result.exit_code


def _cmd_report(args) -> int:
    cfg = _load_config(args.config)
    require_process_conditions(cfg.density)
    chain = build_chain(cfg.density, cfg.sticky, cfg.grid)
    opener = gzip_mod.open if args.paths.endswith(".gz") else open
    with opener(args.paths, "rt", newline="") as fh:
        paths = read_paths_csv(fh, chain, cfg)
    rows = compute_statistics(cfg, chain, paths)
    out = args.out or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    report_path = os.path.join(out, f"{cfg.experiment_id}_report.csv")
    with open(report_path, "w", newline="") as fh:
        write_report(rows, fh)
    print(f"report: {report_path}")
    return 0 if all(r.passed for r in rows) else 1


def _cmd_acceptance(args) -> int:
    results = acceptance_matrix(full=args.full, threads=args.threads)
    passed = all(r.passed for r in results)
    print(f"acceptance: {'ALL PASS' if passed else 'FAILURES PRESENT'} "
          f"({sum(r.passed for r in results)}/{len(results)})")
    return 0 if passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sticky-dbm",
        description="Simulate and statistically verify sticky distorted Brownian motion.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (speed only; STICKY_DBM_THREADS fallback)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chain-info", help="dump jump-chain summary as CSV")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_chain_info)

    p = sub.add_parser("generator-check", help="symmetry residuals as CSV")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_generator_check)

    p = sub.add_parser("simulate", help="run an experiment and write paths + report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("report", help="compute statistics from stored paths")
    p.add_argument("--config", required=True)
    p.add_argument("--paths", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("acceptance", help="run the acceptance matrix")
    p.add_argument("--full", action="store_true",
                   help="include the slow 2d sejour criterion")
    p.set_defaults(fn=_cmd_acceptance)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigParseError as exc:
        for problem in exc.problems:
            print(problem, file=sys.stderr)
        return 2
    except StickyDbmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
