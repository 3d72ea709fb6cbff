"""
Exception hierarchy shared by the simulator, checkpointing, recovery and harness.

ProcFailed is the simulated MPI_ERR_PROC_FAILED: it is raised out of any
communication operation that touches a Failed member and carries the failed
process ids that were observed.
"""

from collections.abc import Iterable


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimulationError):
    """Invalid world, plan or experiment document, or API misuse."""


class ProcFailed(SimulationError):
    """A communication operation could not complete because members failed."""

    def __init__(self, failed: Iterable[int], observers: Iterable[int] = ()) -> None:
        self.failed = frozenset(failed)
        self.observers = tuple(observers)
        super().__init__(f"process failure detected: {sorted(self.failed)}")


class StaleEpochError(SimulationError):
    """An operation used a communicator from an older epoch."""

    def __init__(self, used: int, current: int) -> None:
        self.used = used
        self.current = current
        super().__init__(f"communicator epoch {used} is stale (current epoch {current})")


class FailedRankAccessError(SimulationError):
    """Memory of a Failed process was read."""

    def __init__(self, pid: int) -> None:
        self.pid = pid
        super().__init__(f"process {pid} has failed; its memory is gone")


class CheckpointError(SimulationError):
    """A snapshot violates store invariants (non-increasing Dynamic tag)."""


class UnrecoverableError(SimulationError):
    """Fatal: the lost state cannot be rebuilt from any surviving copy."""

    def __init__(
        self,
        reason: str,
        lost_owners: Iterable[int] = (),
        lost_rows: Iterable[tuple[int, int]] = (),
    ) -> None:
        self.reason = reason
        self.lost_owners = tuple(sorted(lost_owners))
        self.lost_rows = tuple(lost_rows)
        detail = reason
        if self.lost_owners:
            detail += f" (lost owners {list(self.lost_owners)}"
            if self.lost_rows:
                detail += f", rows {list(self.lost_rows)}"
            detail += ")"
        super().__init__(detail)
