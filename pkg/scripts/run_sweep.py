#!/usr/bin/env python3
"""
Scaling sweep: shrink vs substitute over process counts and failure counts.

Usage:
  python scripts/run_sweep.py --config configs/p8_shrink_2fail.json [--p 4 8 16 32] [--k 0 1 2 3 4]
                              [--out results/sweep.csv] [--workers 4]

Expands the base document with the worst-case placement of each strategy,
runs every point in its own world, writes the CSV and logs the side-by-side
comparison (slowdowns and the shrink > substitute component checks).
"""

import argparse
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.config import LOG_FORMAT, get_settings  # noqa: E402
from src.harness.report import compare_strategies, emit_csv  # noqa: E402
from src.harness.schemas import load_experiment  # noqa: E402
from src.harness.sweep import DEFAULT_PROCESS_COUNTS, expand_sweep, run_sweep  # noqa: E402

logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
logger = logging.getLogger(__name__)


def main() -> None:
    p = argparse.ArgumentParser(description="Shrink vs substitute scaling sweep")
    p.add_argument("--config", required=True, help="Base experiment document")
    p.add_argument("--p", type=int, nargs="+", default=list(DEFAULT_PROCESS_COUNTS), help="Process counts")
    p.add_argument("--k", type=int, nargs="+", default=[0, 1, 2, 3, 4], help="Failure counts")
    p.add_argument("--out", default=str(Path(get_settings().RESULTS_DIR) / "sweep.csv"))
    p.add_argument("--workers", type=int, default=None)
    args = p.parse_args()

    configs = expand_sweep(load_experiment(args.config), args.p, args.k)
    rows = run_sweep(configs, max_workers=args.workers)
    emit_csv(rows, args.out)
    for c in compare_strategies(rows):
        logger.info(
            "P=%-3s k=%s slowdown shrink %.4f substitute %.4f | shrink>sub: check=%s reconfig=%s recompute=%s",
            c.P,
            c.failures,
            c.slowdown_shrink,
            c.slowdown_substitute,
            c.shrink_check_higher,
            c.shrink_reconfig_higher,
            c.shrink_recompute_higher,
        )


if __name__ == "__main__":
    main()
