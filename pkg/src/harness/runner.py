"""
Run one experiment end to end.

simulate builds the world and the workload, resolves the fault plan, runs
the solver under the chosen protection and collects the clock breakdown;
run_experiment turns that into a ResultRow normalized against the
no-protection baseline of the same machine and workload.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from src.checkpoint.policy import CheckpointPolicy
from src.harness.overhead import OverheadBreakdown
from src.harness.plans import build_preset, load_fault_plan
from src.harness.report import ResultRow
from src.harness.schemas import ExperimentConfig, ProblemKind, dump_experiment, parse_experiment
from src.metrics.prometheus import record_checkpoints, record_experiment, record_failures, record_recovery
from src.recovery.manager import RecoveryManager, RecoveryStrategy
from src.recovery.report import RecoveryReport
from src.simcore.errors import ConfigError, UnrecoverableError
from src.simcore.faults import FaultInjector, FaultPlan, validate_fault_plan
from src.simcore.world import World, build_world
from src.solver.gmres import Unprotected, fgmres
from src.solver.problem import distribute_problem, load_matrix_market, poisson27_global
from src.solver.state import SolverStats

logger = logging.getLogger(__name__)


class RunStatus(str, Enum):
    OK = "ok"
    NOT_CONVERGED = "not_converged"
    UNRECOVERABLE = "unrecoverable"


@dataclass
class RunOutcome:
    config: ExperimentConfig
    world: World
    plan: FaultPlan
    status: RunStatus
    breakdown: OverheadBreakdown
    stats: SolverStats
    total: float
    x: Optional[np.ndarray] = None
    reports: list[RecoveryReport] = field(default_factory=list)
    reason: str = ""
    failures: int = 0
    unfired: int = 0


def build_matrix(config: ExperimentConfig) -> sp.csr_matrix:
    problem = config.problem
    if problem.kind == ProblemKind.POISSON27:
        return poisson27_global(problem.n, problem.diagonal_shift)
    a = load_matrix_market(problem.path)
    if problem.diagonal_shift:
        a = (a + problem.diagonal_shift * sp.identity(a.shape[0], format="csr")).tocsr()
        a.sort_indices()
    return a


def require_spares(config: ExperimentConfig, failures: int) -> None:
    """Substitute without fallback needs a spare per failure, whatever the plan source."""
    if config.baseline or config.strategy != RecoveryStrategy.SUBSTITUTE or config.fallback_to_shrink:
        return
    if failures > config.world.spares:
        raise ConfigError(f"substitute needs {failures} spares, world has {config.world.spares}")


def resolve_plan(config: ExperimentConfig) -> FaultPlan:
    """The run's fault plan from whichever source the document names, validated."""
    if config.faults is not None:
        plan = config.faults
    elif config.fault_plan_path is not None:
        plan = load_fault_plan(config.fault_plan_path)
    elif config.preset is not None:
        plan = build_preset(config.preset, config.world)
    else:
        plan = FaultPlan()
    require_spares(config, len(plan))
    return validate_fault_plan(
        plan,
        config.world.processes,
        config.checkpoint.redundancy,
        config.solver.max_outer_iterations,
        config.allow_unsurvivable_plans,
    )


def simulate(config: ExperimentConfig, plan: Optional[FaultPlan] = None) -> RunOutcome:
    """Run the experiment on a fresh world; unrecoverable runs become outcomes, not exceptions."""
    if plan is None:
        plan = resolve_plan(config)
    else:
        require_spares(config, len(plan))
    world = build_world(config.world)
    a, b = distribute_problem(world, world.comm, build_matrix(config))
    injector = FaultInjector(plan, config.solver.m_inner)

    manager: Optional[RecoveryManager] = None
    if config.baseline:
        hooks = Unprotected(injector)
    else:
        policy = CheckpointPolicy.model_validate(config.checkpoint.model_dump())
        manager = RecoveryManager(
            world,
            config.strategy,
            policy,
            injector,
            fallback_to_shrink=config.fallback_to_shrink,
            proactive_check_interval=config.world.proactive_check_interval,
        )
        hooks = manager

    x = None
    reason = ""
    try:
        xv, stats = fgmres(world, a, b, config.solver, hooks)
        x = xv.gather()
        status = RunStatus.OK if stats.converged else RunStatus.NOT_CONVERGED
    except UnrecoverableError as e:
        logger.error("Run %s is unrecoverable: %s", config.name or config.problem.label, e)
        stats = SolverStats()
        status = RunStatus.UNRECOVERABLE
        reason = str(e)
    stats.time_buckets = dict(world.clock.buckets)

    breakdown = OverheadBreakdown.from_buckets(world.clock.buckets, stats.bytes_checkpointed, stats.bytes_recovered)
    reports = list(manager.reports) if manager is not None else []
    outcome = RunOutcome(
        config=config,
        world=world,
        plan=plan,
        status=status,
        breakdown=breakdown,
        stats=stats,
        total=world.clock.now,
        x=x,
        reports=reports,
        reason=reason,
        failures=len(plan) - injector.pending,
        unfired=injector.pending,
    )
    if outcome.unfired and status != RunStatus.UNRECOVERABLE:
        logger.warning(
            "Run %s finished after %s outer iterations with %s of %s planned failures never triggered",
            config.name or config.problem.label,
            stats.outer_iterations,
            outcome.unfired,
            len(plan),
        )
    record_failures(outcome.failures)
    record_checkpoints(dynamic=stats.checkpoints_taken, static=int(bool(stats.checkpoints_taken)))
    for r in reports:
        record_recovery(r.strategy, r.total)
    logger.info(
        "Run %s (%s, P=%s, %s of %s planned failures): %s in %.6fs simulated, waste %.6fs",
        config.name or config.problem.label,
        config.strategy_label,
        config.world.processes,
        outcome.failures,
        len(plan),
        status.value,
        outcome.total,
        breakdown.waste,
    )
    return outcome


@lru_cache(maxsize=64)
def _baseline_total(document: str) -> float:
    return simulate(parse_experiment(document)).total


def baseline_total(config: ExperimentConfig) -> float:
    """Simulated time of the no-protection run (cached per document)."""
    base = config if config.baseline else config.baseline_config()
    return _baseline_total(dump_experiment(base))


def result_row(outcome: RunOutcome, baseline: float) -> ResultRow:
    b = outcome.breakdown
    total = outcome.total

    def pct(v: float) -> float:
        return 100.0 * v / total if total > 0 else 0.0

    return ResultRow(
        P=outcome.config.world.processes,
        strategy=outcome.config.strategy_label,
        failures=outcome.failures,
        total_s=total,
        t_check_s=b.t_check,
        t_pfd_s=b.t_pfd,
        t_pfr_s=b.t_pfr,
        t_pfx_s=b.t_pfx,
        t_recompute_s=b.t_recompute,
        slowdown=total / baseline if baseline > 0 else 1.0,
        pct_check=pct(b.t_check),
        pct_recovery=pct(b.recovery),
        pct_reconfig=pct(b.t_pfr),
        useful_s=b.useful,
        status=outcome.status.value,
        problem=outcome.config.problem.label,
    )


def run_experiment(config: ExperimentConfig, baseline: Optional[float] = None) -> ResultRow:
    """Simulate and normalize; `baseline` overrides the cached baseline time."""
    outcome = simulate(config)
    if baseline is None:
        baseline = outcome.total if config.baseline else baseline_total(config)
    row = result_row(outcome, baseline)
    record_experiment(row.strategy, row.status, row.slowdown)
    return row
