"""
Fault-tolerance layer plugged into the solver loop.

RecoveryManager implements the solver hooks: it fires planned faults at their
trigger points, decides whether a step is first-time work or re-execution,
takes the startup and per-iteration checkpoints, and turns an escaped
ProcFailed into detection, communicator repair and state restore.
"""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import replace
from enum import Enum
from typing import Optional

from src.checkpoint.coordinator import CheckpointResult, checkpoint_dynamic, checkpoint_static, latest_consistent_tag
from src.checkpoint.policy import CheckpointPolicy
from src.checkpoint.store import store_of
from src.recovery.report import CostMeter, RecoveryReport, RestoredWorkload
from src.recovery.shrink import shrink_recover
from src.recovery.substitute import execute_substitute, stitch_spares
from src.simcore.detection import detect_and_propagate, proactive_check, shrink_comm
from src.simcore.errors import ProcFailed, UnrecoverableError
from src.simcore.faults import FaultInjector
from src.simcore.world import CommEpoch, World
from src.solver.gmres import SolverRun

logger = logging.getLogger(__name__)


class RecoveryStrategy(str, Enum):
    SHRINK = "shrink"
    SUBSTITUTE = "substitute"


class RecoveryManager:
    """Checkpointing, fault injection and recovery for one solver run."""

    def __init__(
        self,
        world: World,
        strategy: RecoveryStrategy,
        policy: CheckpointPolicy,
        injector: Optional[FaultInjector] = None,
        fallback_to_shrink: bool = False,
        proactive_check_interval: int = 0,
    ) -> None:
        self.world = world
        self.strategy = RecoveryStrategy(strategy)
        self.policy = policy
        self.injector = injector
        self.fallback_to_shrink = fallback_to_shrink
        self.proactive_check_interval = proactive_check_interval
        self.reports: list[RecoveryReport] = []
        self.frontier: tuple[int, int] = (-1, -1)
        self._first_checkpoint_s: Optional[float] = None
        self._iteration_started = 0.0

    @property
    def redundancy(self) -> int:
        return self.policy.redundancy

    # ------------------------------------------------------------------
    # Hooks
    # ------------------------------------------------------------------

    def start(self, run: SolverRun) -> None:
        """Static checkpoint of the workload plus the tag-0 Dynamic checkpoint."""
        if self.policy.enabled:
            static = checkpoint_static(self.world, run.comm, run.a, run.b, self.redundancy)
            dynamic = checkpoint_dynamic(self.world, run.comm, run.state, 0, self.redundancy)
            self._first_checkpoint_s = dynamic.cost
            run.stats.bytes_checkpointed += static.bytes_sent
            self._record_checkpoint(run, dynamic)
        self._iteration_started = self.world.clock.now

    @contextmanager
    def step(self, run: SolverRun, outer_iteration: int, step: int) -> Iterator[bool]:
        """Charge the step to useful time, or to recompute below the frontier."""
        if self.injector is not None:
            self.injector.fire(self.world, outer_iteration, step)
        position = (outer_iteration, step)
        replay = position < self.frontier
        if not replay:
            self.frontier = position
        with self.world.clock.accounting("recompute" if replay else "useful"):
            yield replay

    def after_outer_iteration(self, run: SolverRun) -> None:
        scalars = run.state.scalars
        completed = scalars.outer_iteration
        if scalars.finished:
            return
        if self.proactive_check_interval and completed % self.proactive_check_interval == 0:
            proactive_check(self.world, run.comm)
        if not self.policy.enabled:
            return
        if self.policy.cadence is None:
            self.policy.calibrate(self._first_checkpoint_s or 0.0, self.world.clock.now - self._iteration_started)
        if self.policy.should_checkpoint(completed):
            self._record_checkpoint(
                run, checkpoint_dynamic(self.world, run.comm, run.state, completed, self.redundancy)
            )

    def recover(self, run: SolverRun, exc: ProcFailed) -> None:
        """
        Agree on the failed set, repair the communicator, roll every rank back
        to the newest consistent tag and swap the rebuilt workload into `run`.
        """
        if not self.policy.enabled:
            raise UnrecoverableError("process failure without checkpoints to recover from", lost_owners=exc.failed)
        meter = CostMeter(self.world.clock)
        comm = run.comm
        old_members = comm.members
        detection = detect_and_propagate(self.world, comm, exc)
        failed = detection.failed
        survivors = shrink_comm(self.world, comm, failed)
        tag = latest_consistent_tag(self.world, survivors, failed)
        for pid in survivors.members:
            store_of(self.world, pid).purge_newer(tag)

        fallback = False
        if self.strategy == RecoveryStrategy.SUBSTITUTE and len(self.world.spare_pool()) < len(failed):
            if not self.fallback_to_shrink:
                raise UnrecoverableError(
                    f"{len(failed)} failed processes but only {len(self.world.spare_pool())} spares left",
                    lost_owners=failed,
                )
            logger.warning("Spares exhausted: falling back to shrink for failed processes %s", sorted(failed))
            fallback = True

        if self.strategy == RecoveryStrategy.SHRINK or fallback:
            report, restored = shrink_recover(
                self.world, survivors, run.a.dist, old_members, failed, tag, self.redundancy
            )
            new_comm = survivors
        else:
            new_comm, assignment = stitch_spares(self.world, survivors, old_members, sorted(failed))
            report, restored = execute_substitute(self.world, new_comm, assignment, tag, run.a, self.redundancy)

        report = replace(
            report,
            t_pfd=meter.delta("detect"),
            t_pfr=meter.delta("reconfig"),
            t_pfx=meter.delta("recover"),
            fallback=fallback,
        )
        self._install(run, new_comm, restored)
        self.reports.append(report)
        run.stats.failures_handled += len(failed)
        run.stats.bytes_recovered += report.bytes_moved
        logger.info(
            "Recovered from failure of %s by %s: resume at outer iteration %s on %s ranks "
            "(detect %.6fs, reconfig %.6fs, recover %.6fs)",
            sorted(failed),
            report.strategy,
            tag,
            new_comm.size,
            report.t_pfd,
            report.t_pfr,
            report.t_pfx,
        )

    # ------------------------------------------------------------------

    def _install(self, run: SolverRun, comm: CommEpoch, restored: RestoredWorkload) -> None:
        run.comm = comm
        run.a = restored.a
        run.b = restored.b
        run.state = restored.state
        self._iteration_started = self.world.clock.now

    def _record_checkpoint(self, run: SolverRun, result: CheckpointResult) -> None:
        stats = run.stats
        stats.checkpoints_taken += 1
        stats.bytes_checkpointed += result.bytes_sent
        stats.last_checkpoint_bytes_per_process = result.max_payload_bytes
        if stats.failures_handled:
            stats.post_failure_checkpoint_bytes = result.max_payload_bytes
