"""Command-line entry point: ``python -m wlrank {run,sweep,metrics,replay}``.

Exit status is 0 on success, 1 when any run failed and 2 for usage or
configuration errors; failures are summarized on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

from .harness import (ConfigurationError, SweepSpec, apply_overrides, emit_report, failures, load_config,
                      load_log, replay, resolve_workers, run_sweep, save_log)
from .market import run_simulation
from .metrics import evaluate


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config with dotted keys")
    common.add_argument("--seed", type=int, metavar="N", help="base seed (overrides the config)")
    common.add_argument("--out", metavar="PATH", help="report file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1, metavar="N",
                        help="parallel runs for sweeps (0 = one per CPU)")

    p = argparse.ArgumentParser(prog="wlrank", description="Weighted rank reputation market simulator")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="simulate one scenario")
    run.add_argument("--log-dir", metavar="DIR", help="also store the transaction log, ranks and ground truth")
    run.add_argument("--baseline", action="store_true",
                     help="also run the paired no-reputation scenario for utility_change")
    sub.add_parser("sweep", parents=[common], help="run a parameter grid")
    m = sub.add_parser("metrics", parents=[common], help="recompute metrics from a stored log")
    m.add_argument("--log-dir", metavar="DIR", required=True)
    r = sub.add_parser("replay", parents=[common],
                       help="re-rank a stored log with the reputation.* settings of --config")
    r.add_argument("--log-dir", metavar="DIR", required=True)
    return p


def _load(args, require_single: bool):
    overrides = {"seed": args.seed} if args.seed is not None else None
    cfg = load_config(args.config, os.environ, overrides)
    if require_single and isinstance(cfg, SweepSpec):
        raise ConfigurationError("this command takes a single-run config; use 'sweep' for sweep.* keys")
    return cfg


def _cmd_run(args):
    cfg = _load(args, require_single=True)
    if args.log_dir:
        log = run_simulation(cfg)
        save_log(log, args.log_dir)
        reports = [evaluate(log)]
        reports[0].cell = "base"
        if args.baseline and cfg.uses_reputation:
            base = evaluate(run_simulation(apply_overrides(cfg, {"strategy": "no_reputation"})))
            reports = [evaluate(log, base.utility)]
            reports[0].cell = "base"
        return reports
    spec = SweepSpec(base=cfg, seeds=(cfg.seed,), include_baseline=args.baseline)
    return [r for r in run_sweep(spec) if r.reputation_used or not cfg.uses_reputation]


def _cmd_sweep(args):
    cfg = _load(args, require_single=False)
    spec = cfg if isinstance(cfg, SweepSpec) else SweepSpec(base=cfg, seeds=(cfg.seed,))
    return run_sweep(spec, workers=resolve_workers(args.workers))


def _cmd_metrics(args):
    report = evaluate(load_log(args.log_dir))
    report.cell = "stored"
    return [report]


def _cmd_replay(args):
    log = load_log(args.log_dir)
    cfg = _load(args, require_single=True)
    report = evaluate(replay(log, cfg.reputation))
    report.cell = "replay"
    return [report]


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "metrics": _cmd_metrics, "replay": _cmd_replay}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        reports = COMMANDS[args.command](args)
        emit_report(reports, args.format, args.out)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"wlrank {args.command}: error: {exc}", file=sys.stderr)
        return 2
    failed = failures(reports)
    if failed:
        print(f"wlrank {args.command}: {len(failed)} of {len(reports)} rows failed", file=sys.stderr)
        for r in failed:
            print(f"  cell={r.cell!r} seed={r.seed}: {r.status}", file=sys.stderr)
        return 1
    return 0
