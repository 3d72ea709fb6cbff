"""
Command-line interface.

Usage:
  ckpt-sim run --config exp.json [--plan plan.json] [--out results.csv] [--dump-store stores.json]
  ckpt-sim sweep --configs configs/ --out results.csv [--workers 4]
  ckpt-sim plan --preset worst_case_shrink --p 32 --k 2
  ckpt-sim baseline --config exp.json

Exit codes: 0 success, 2 invalid config or plan, 3 unrecoverable run.
"""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from src.checkpoint.store import dump_stores
from src.config import LOG_FORMAT, get_settings
from src.harness.plans import build_preset, dump_fault_plan
from src.harness.report import ResultRow, emit_csv, format_csv
from src.harness.runner import RunStatus, baseline_total, result_row, resolve_plan, simulate
from src.harness.schemas import PlanPreset, PlanPresetName, load_experiment
from src.harness.sweep import load_configs, run_sweep
from src.metrics.prometheus import record_experiment
from src.simcore.config import WorldConfig
from src.simcore.errors import ConfigError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNRECOVERABLE = 3


def _write_rows(rows: Sequence[ResultRow], out: Optional[str]) -> None:
    if out:
        emit_csv(rows, out)
    else:
        sys.stdout.write(format_csv(rows))


def cmd_run(args: argparse.Namespace) -> int:
    config = load_experiment(args.config)
    if args.plan:
        config = config.model_copy(update={"faults": None, "preset": None, "fault_plan_path": args.plan})
    plan = resolve_plan(config)
    outcome = simulate(config, plan)
    baseline = outcome.total if config.baseline else baseline_total(config)
    row = result_row(outcome, baseline)
    record_experiment(row.strategy, row.status, row.slowdown)
    _write_rows([row], args.out)
    if args.dump_store:
        Path(args.dump_store).write_text(json.dumps(dump_stores(outcome.world), indent=2, sort_keys=True))
        logger.info("Store contents written to %s", args.dump_store)
    if outcome.status == RunStatus.UNRECOVERABLE:
        logger.error("Unrecoverable: %s", outcome.reason)
        return EXIT_UNRECOVERABLE
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    rows = run_sweep(load_configs(args.configs), max_workers=args.workers)
    _write_rows(rows, args.out)
    return EXIT_UNRECOVERABLE if any(r.status == RunStatus.UNRECOVERABLE.value for r in rows) else EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    world = WorldConfig(processes=args.p, spares=args.spares, cores_per_node=args.cores_per_node, seed=args.seed)
    preset = PlanPreset(name=args.preset, k=args.k, first_iteration=args.first_iteration, spacing=args.spacing)
    text = dump_fault_plan(build_preset(preset, world)) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    config = load_experiment(args.config).baseline_config()
    outcome = simulate(config)
    _write_rows([result_row(outcome, outcome.total)], args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ckpt-sim", description="Checkpoint/restart fault-tolerance simulator")
    p.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment document")
    run.add_argument("--config", required=True)
    run.add_argument("--plan", help="Fault plan JSON overriding the document's fault source")
    run.add_argument("--out", help="CSV path (stdout if omitted)")
    run.add_argument("--dump-store", help="Write every process's backup store as JSON")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="Run every *.json document in a directory")
    sweep.add_argument("--configs", required=True)
    sweep.add_argument("--out", help="CSV path (stdout if omitted)")
    sweep.add_argument("--workers", type=int, default=None, help="Process pool size (default SWEEP_MAX_WORKERS)")
    sweep.set_defaults(func=cmd_sweep)

    plan = sub.add_parser("plan", help="Print a generated fault plan")
    plan.add_argument("--preset", required=True, choices=[x.value for x in PlanPresetName])
    plan.add_argument("--p", type=int, required=True, help="Active processes")
    plan.add_argument("--k", type=int, required=True, help="Failures")
    plan.add_argument("--cores-per-node", type=int, default=1)
    plan.add_argument("--spares", type=int, default=0)
    plan.add_argument("--seed", type=int, default=0)
    plan.add_argument("--first-iteration", type=int, default=1)
    plan.add_argument("--spacing", type=int, default=1)
    plan.add_argument("--out")
    plan.set_defaults(func=cmd_plan)

    base = sub.add_parser("baseline", help="Run the no-protection baseline of a document")
    base.add_argument("--config", required=True)
    base.add_argument("--out")
    base.set_defaults(func=cmd_baseline)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level or get_settings().LOG_LEVEL, format=LOG_FORMAT)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
