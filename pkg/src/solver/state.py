"""Solver configuration, distributed FGMRES state and per-rank state shares."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from src.recovery.distribution import BlockDistribution
from src.simcore.errors import ConfigError
from src.solver.distributed import DistVector


class SolverConfig(BaseModel):
    """Inner-outer FGMRES parameters."""

    model_config = {"extra": "forbid"}

    tol: float = Field(1e-8, gt=0, description="Relative residual target ||b - Ax|| / ||b||.")
    m_outer: int = Field(10, ge=1, description="Outer restart length (flexible Arnoldi steps per cycle).")
    m_inner: int = Field(5, ge=1, description="Inner GMRES steps per preconditioner application.")
    max_outer: int = Field(20, ge=1, description="Maximum number of outer cycles.")

    @property
    def max_outer_iterations(self) -> int:
        return self.m_outer * self.max_outer


@dataclass
class ReplicatedScalars:
    """State every rank holds an identical copy of."""

    outer_iteration: int
    outer_cycle: int
    j: int
    beta: float
    H: np.ndarray
    cs: np.ndarray
    sn: np.ndarray
    g: np.ndarray
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    finished: bool = False
    relative_residual: float = float("nan")

    @classmethod
    def fresh(cls, m_outer: int, beta: float, outer_iteration: int = 0, outer_cycle: int = 0) -> "ReplicatedScalars":
        g = np.zeros(m_outer + 1)
        g[0] = beta
        return cls(
            outer_iteration=outer_iteration,
            outer_cycle=outer_cycle,
            j=0,
            beta=beta,
            H=np.zeros((m_outer + 1, m_outer)),
            cs=np.zeros(m_outer),
            sn=np.zeros(m_outer),
            g=g,
        )

    @property
    def m_outer(self) -> int:
        return self.H.shape[1]

    def copy(self) -> "ReplicatedScalars":
        return ReplicatedScalars(
            outer_iteration=self.outer_iteration,
            outer_cycle=self.outer_cycle,
            j=self.j,
            beta=self.beta,
            H=self.H.copy(),
            cs=self.cs.copy(),
            sn=self.sn.copy(),
            g=self.g.copy(),
            residual_history=list(self.residual_history),
            converged=self.converged,
            finished=self.finished,
            relative_residual=self.relative_residual,
        )

    def identical(self, other: "ReplicatedScalars") -> bool:
        """Bit-for-bit equality, NaN included."""
        return (
            (self.outer_iteration, self.outer_cycle, self.j, self.converged, self.finished)
            == (other.outer_iteration, other.outer_cycle, other.j, other.converged, other.finished)
            and np.array_equal(np.float64(self.beta), np.float64(other.beta))
            and np.array_equal(self.H, other.H)
            and np.array_equal(self.cs, other.cs)
            and np.array_equal(self.sn, other.sn)
            and np.array_equal(self.g, other.g)
            and np.array_equal(np.asarray(self.residual_history), np.asarray(other.residual_history))
            and np.array_equal(np.float64(self.relative_residual), np.float64(other.relative_residual), equal_nan=True)
        )


@dataclass
class LocalDynamic:
    """One rank's share of the solver state over rows [start, stop)."""

    start: int
    stop: int
    x_seed: np.ndarray
    V: list[np.ndarray]
    Z: list[np.ndarray]
    scalars: ReplicatedScalars

    @property
    def vectors(self) -> list[np.ndarray]:
        return [self.x_seed, *self.V, *self.Z]

    def rows(self, lo: int, hi: int) -> "LocalDynamic":
        """The slice covering global rows [lo, hi)."""
        if lo < self.start or hi > self.stop:
            raise ConfigError(f"rows [{lo},{hi}) outside [{self.start},{self.stop})")
        a, b = lo - self.start, hi - self.start
        return LocalDynamic(
            start=lo,
            stop=hi,
            x_seed=self.x_seed[a:b].copy(),
            V=[v[a:b].copy() for v in self.V],
            Z=[z[a:b].copy() for z in self.Z],
            scalars=self.scalars,
        )

    @classmethod
    def concat(cls, pieces: list["LocalDynamic"], start: int, stop: int, scalars: ReplicatedScalars) -> "LocalDynamic":
        """Stitch row-contiguous pieces back into one share."""
        pieces = sorted(pieces, key=lambda p: p.start)
        pos = start
        for p in pieces:
            if p.start != pos:
                raise ConfigError(f"gap or overlap at row {pos} while assembling [{start},{stop})")
            pos = p.stop
        if pos != stop:
            raise ConfigError(f"pieces end at {pos}, expected {stop}")

        def stack(arrays: list[np.ndarray]) -> np.ndarray:
            return np.concatenate(arrays) if arrays else np.zeros(0)

        return cls(
            start=start,
            stop=stop,
            x_seed=stack([p.x_seed for p in pieces]),
            V=[stack([p.V[k] for p in pieces]) for k in range(scalars.j + 1)],
            Z=[stack([p.Z[k] for p in pieces]) for k in range(scalars.j)],
            scalars=scalars,
        )


@dataclass
class LocalStatic:
    """One rank's matrix rows (CSR with global columns) and rhs rows."""

    start: int
    stop: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    rhs: np.ndarray

    def rows(self, lo: int, hi: int) -> "LocalStatic":
        if lo < self.start or hi > self.stop:
            raise ConfigError(f"rows [{lo},{hi}) outside [{self.start},{self.stop})")
        a, b = lo - self.start, hi - self.start
        p0, p1 = self.indptr[a], self.indptr[b]
        return LocalStatic(
            start=lo,
            stop=hi,
            indptr=self.indptr[a : b + 1] - p0,
            indices=self.indices[p0:p1].copy(),
            data=self.data[p0:p1].copy(),
            rhs=self.rhs[a:b].copy(),
        )

    @classmethod
    def concat(cls, pieces: list["LocalStatic"], start: int, stop: int) -> "LocalStatic":
        pieces = sorted(pieces, key=lambda p: p.start)
        pos = start
        indptr = [np.zeros(1, dtype=np.int64)]
        offset = 0
        for p in pieces:
            if p.start != pos:
                raise ConfigError(f"gap or overlap at row {pos} while assembling [{start},{stop})")
            pos = p.stop
            indptr.append(p.indptr[1:] + offset)
            offset += int(p.indptr[-1])
        if pos != stop:
            raise ConfigError(f"pieces end at {pos}, expected {stop}")
        return cls(
            start=start,
            stop=stop,
            indptr=np.concatenate(indptr).astype(np.int64),
            indices=np.concatenate([p.indices for p in pieces]).astype(np.int64) if pieces else np.zeros(0, np.int64),
            data=np.concatenate([p.data for p in pieces]) if pieces else np.zeros(0),
            rhs=np.concatenate([p.rhs for p in pieces]) if pieces else np.zeros(0),
        )


@dataclass
class SolverState:
    """FGMRES state: distributed cycle seed and bases plus replicated scalars."""

    dist: BlockDistribution
    x_seed: DistVector
    V: list[DistVector]
    Z: list[DistVector]
    scalars: ReplicatedScalars

    def __post_init__(self) -> None:
        j = self.scalars.j
        if len(self.V) != j + 1 or len(self.Z) != j:
            raise ConfigError(f"inconsistent state: j={j}, |V|={len(self.V)}, |Z|={len(self.Z)}")

    @property
    def j(self) -> int:
        return self.scalars.j

    @property
    def outer_iteration(self) -> int:
        return self.scalars.outer_iteration

    def local(self, rank: int) -> LocalDynamic:
        start, stop = self.dist.range_of(rank)
        return LocalDynamic(
            start=start,
            stop=stop,
            x_seed=self.x_seed.parts[rank].copy(),
            V=[v.parts[rank].copy() for v in self.V],
            Z=[z.parts[rank].copy() for z in self.Z],
            scalars=self.scalars.copy(),
        )

    @classmethod
    def from_local(cls, dist: BlockDistribution, shares: list[LocalDynamic]) -> "SolverState":
        """Reassemble from one share per rank; replicated scalars must agree."""
        if len(shares) != dist.parts:
            raise ConfigError(f"{len(shares)} shares for {dist.parts} ranks")
        scalars = shares[0].scalars
        for rank, share in enumerate(shares):
            if (share.start, share.stop) != dist.range_of(rank):
                raise ConfigError(f"share {rank} covers [{share.start},{share.stop}), expected {dist.range_of(rank)}")
            if not share.scalars.identical(scalars):
                raise ConfigError(f"replicated scalars of rank {rank} disagree with rank 0")
        j = scalars.j
        return cls(
            dist=dist,
            x_seed=DistVector(dist, [s.x_seed for s in shares]),
            V=[DistVector(dist, [s.V[k] for s in shares]) for k in range(j + 1)],
            Z=[DistVector(dist, [s.Z[k] for s in shares]) for k in range(j)],
            scalars=scalars.copy(),
        )


@dataclass
class SolverStats:
    inner_iterations: int = 0
    inner_iterations_recomputed: int = 0
    outer_iterations: int = 0
    outer_cycles: int = 0
    converged: bool = False
    relative_residual: float = float("nan")
    residual_history: list[float] = field(default_factory=list)
    checkpoints_taken: int = 0
    failures_handled: int = 0
    bytes_checkpointed: float = 0.0
    bytes_recovered: float = 0.0
    last_checkpoint_bytes_per_process: int = 0
    post_failure_checkpoint_bytes: Optional[int] = None
    time_buckets: dict[str, float] = field(default_factory=dict)
