"""
POST /api/v1/experiments - run one experiment document, return its result row.
POST /api/v1/experiments/compare - run several and compare shrink vs substitute.

Simulation is CPU-bound; runs go to a worker thread so the event loop stays
responsive.
"""

import logging
from dataclasses import asdict

from fastapi import APIRouter, HTTPException, status
from starlette.concurrency import run_in_threadpool

from src.api.schemas import CompareIn, CompareOut, ComparisonOut, ExperimentOut, RecoveryOut
from src.config import get_settings
from src.harness.report import ResultRow, compare_strategies
from src.harness.runner import baseline_total, result_row, simulate
from src.harness.schemas import ExperimentConfig
from src.metrics.prometheus import record_experiment

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/experiments", tags=["experiments"])


def _execute(config: ExperimentConfig) -> ExperimentOut:
    outcome = simulate(config)
    baseline = outcome.total if config.baseline else baseline_total(config)
    row = result_row(outcome, baseline)
    record_experiment(row.strategy, row.status, row.slowdown)
    stats = outcome.stats
    return ExperimentOut(
        **row.as_dict(),
        reason=outcome.reason,
        inner_iterations=stats.inner_iterations,
        inner_iterations_recomputed=stats.inner_iterations_recomputed,
        outer_iterations=stats.outer_iterations,
        checkpoints_taken=stats.checkpoints_taken,
        unfired_failures=outcome.unfired,
        relative_residual=None if outcome.reason else stats.relative_residual,
        recoveries=[
            RecoveryOut(
                strategy=r.strategy,
                failed=list(r.failed),
                tag=r.tag,
                epoch=r.epoch,
                t_pfd=r.t_pfd,
                t_pfr=r.t_pfr,
                t_pfx=r.t_pfx,
                bytes_moved=r.bytes_moved,
                spares=list(r.spares),
                fallback=r.fallback,
            )
            for r in outcome.reports
        ],
    )


@router.post("", response_model=ExperimentOut)
async def run_one(config: ExperimentConfig) -> ExperimentOut:
    """Run one experiment; unrecoverable runs come back with status=unrecoverable."""
    return await run_in_threadpool(_execute, config)


@router.post("/compare", response_model=CompareOut)
async def run_and_compare(body: CompareIn) -> CompareOut:
    """Run every experiment, then pair shrink and substitute rows by (P, failures)."""
    limit = get_settings().API_MAX_COMPARE_EXPERIMENTS
    if len(body.experiments) > limit:
        raise HTTPException(
            status_code=status.HTTP_413_REQUEST_ENTITY_TOO_LARGE,
            detail=f"at most {limit} experiments per compare request",
        )
    rows = [await run_in_threadpool(_execute, c) for c in body.experiments]
    table = compare_strategies(
        [ResultRow(**r.model_dump(include=set(ResultRow.__dataclass_fields__))) for r in rows]
    )
    logger.info("Compared %s experiments into %s points", len(rows), len(table))
    return CompareOut(rows=rows, comparisons=[ComparisonOut(**asdict(c)) for c in table])
