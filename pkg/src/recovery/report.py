"""What a recovery cost and what it produced."""

from dataclasses import dataclass, field

from src.simcore.world import SimClock
from src.solver.distributed import DistSparseMatrix, DistVector
from src.solver.state import SolverState


@dataclass
class RecoveryReport:
    strategy: str
    failed: tuple[int, ...] = ()
    tag: int = 0
    epoch: int = 0
    t_pfd: float = 0.0
    t_pfr: float = 0.0
    t_pfx: float = 0.0
    bytes_moved: float = 0.0
    spares: tuple[int, ...] = ()
    fallback: bool = False

    def __post_init__(self) -> None:
        if min(self.t_pfd, self.t_pfr, self.t_pfx, self.bytes_moved) < 0:
            raise ValueError("recovery costs cannot be negative")

    @property
    def total(self) -> float:
        return self.t_pfd + self.t_pfr + self.t_pfx


@dataclass
class RestoredWorkload:
    """Matrix, rhs and solver state rebuilt on the repaired communicator."""

    a: DistSparseMatrix
    b: DistVector
    state: SolverState


@dataclass
class CostMeter:
    """Bucket deltas of a clock since the meter was created."""

    clock: SimClock
    start: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.start = dict(self.clock.buckets)

    def delta(self, category: str) -> float:
        return self.clock.buckets[category] - self.start[category]
