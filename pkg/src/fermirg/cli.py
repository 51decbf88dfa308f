"""Command line entry point: ``verify --config cfg.json [--suite id]...``."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import ConfigError, load_config, resolve
from .report import ReportError, emit_report, suite_table
from .suites import SUITES, run_suite

WORKERS_ENV = "FERMIRG_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return n


def _run_one(args):
    cfg, suite = args
    return run_suite(cfg, suite)


def run_all(cfg, workers: int = 1):
    """Run the configured suites; results come back in config order whatever the worker count."""
    jobs = [(cfg, s) for s in cfg.suites]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_one, jobs))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verify", description="Run the numerical verification suites.")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--suite", action="append", default=None, metavar="ID",
                   help="run only this suite (repeatable); overrides the config list")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--list", action="store_true", help="list suite ids and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        sys.stdout.write(suite_table(SUITES))
        return 0
    if not args.config:
        print("verify: --config is required", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        over = {}
        if args.suite is not None:
            over["suites"] = list(args.suite)
        if args.seed is not None:
            over["seed"] = args.seed
        if over:
            cfg = resolve({**cfg.raw, **over}, SUITES)
        workers = worker_count()
    except ConfigError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return 2

    reports = run_all(cfg, workers)
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        tail = f"  ({rep.error})" if rep.error else ""
        print(f"{status}  {rep.suite:<30} {rep.seconds:8.2f}s{tail}")
    out = args.out or cfg.output["dir"]
    try:
        code = emit_report(reports, cfg, out, registry=SUITES, figure=bool(cfg.output.get("figure")))
    except ReportError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return 2
    print(f"reports written to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
