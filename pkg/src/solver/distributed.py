"""
Block-row distributed vectors and sparse matrices, and the kernels the solver
runs on them.

Objects are held in global view (one numpy slice per communicator rank); every
kernel charges its local flops and its messages to the world's clock, and any
communication touching a failed process raises ProcFailed.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from src.recovery.distribution import BlockDistribution
from src.simcore.errors import ConfigError
from src.simcore.world import CommEpoch, Message, World

logger = logging.getLogger(__name__)

FLOAT_BYTES = 8
INDEX_BYTES = 8


class DistVector:
    """Dense vector split by a BlockDistribution."""

    __slots__ = ("dist", "parts")

    def __init__(self, dist: BlockDistribution, parts: Sequence[np.ndarray]) -> None:
        if len(parts) != dist.parts:
            raise ConfigError(f"{len(parts)} slices for {dist.parts} ranks")
        for rank, part in enumerate(parts):
            if part.shape != (dist.size_of(rank),):
                raise ConfigError(f"slice {rank} has shape {part.shape}, expected ({dist.size_of(rank)},)")
        self.dist = dist
        self.parts = list(parts)

    @classmethod
    def zeros(cls, dist: BlockDistribution) -> "DistVector":
        return cls(dist, [np.zeros(n) for n in dist.sizes])

    @classmethod
    def from_global(cls, dist: BlockDistribution, values: np.ndarray) -> "DistVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (dist.rows,):
            raise ConfigError(f"vector of length {values.shape} for R={dist.rows}")
        return cls(dist, [values[a:b].copy() for a, b in dist.ranges])

    def gather(self) -> np.ndarray:
        if not self.parts:
            return np.zeros(0)
        return np.concatenate(self.parts)

    def copy(self) -> "DistVector":
        return DistVector(self.dist, [p.copy() for p in self.parts])

    def __len__(self) -> int:
        return self.dist.rows


@dataclass
class DistSparseMatrix:
    """
    Block-row CSR matrix. Each rank stores its rows against a local column
    map (sorted global columns it references) plus the import pattern: the
    off-range columns it needs, grouped by owning rank.
    """

    dist: BlockDistribution
    blocks: list[sp.csr_matrix]
    col_maps: list[np.ndarray]
    imports: list[dict[int, np.ndarray]] = field(default_factory=list)

    @property
    def rows(self) -> int:
        return self.dist.rows

    @property
    def nnz(self) -> int:
        return sum(b.nnz for b in self.blocks)

    def nnz_local(self, rank: int) -> int:
        return self.blocks[rank].nnz

    @classmethod
    def from_local_rows(
        cls,
        dist: BlockDistribution,
        rows: Sequence[tuple[np.ndarray, np.ndarray, np.ndarray]],
    ) -> "DistSparseMatrix":
        """Build from per-rank (indptr, global column indices, values) triples."""
        blocks, col_maps = [], []
        for rank, (indptr, indices, data) in enumerate(rows):
            n_local = dist.size_of(rank)
            indices = np.asarray(indices, dtype=np.int64)
            if indices.size and (indices.min() < 0 or indices.max() >= dist.rows):
                raise ConfigError(f"rank {rank} references columns outside [0,{dist.rows})")
            col_map = np.unique(indices)
            local = np.searchsorted(col_map, indices)
            block = sp.csr_matrix(
                (np.asarray(data, dtype=np.float64), local, np.asarray(indptr, dtype=np.int64)),
                shape=(n_local, col_map.size),
            )
            block.sort_indices()
            blocks.append(block)
            col_maps.append(col_map)
        a = cls(dist=dist, blocks=blocks, col_maps=col_maps)
        a.imports = a._import_pattern()
        return a

    @classmethod
    def from_global(cls, dist: BlockDistribution, a: sp.csr_matrix) -> "DistSparseMatrix":
        if a.shape != (dist.rows, dist.rows):
            raise ConfigError(f"matrix shape {a.shape} does not match R={dist.rows}")
        a = sp.csr_matrix(a)
        a.sort_indices()
        pieces = []
        for start, stop in dist.ranges:
            sub = a[start:stop]
            pieces.append((sub.indptr.copy(), sub.indices.astype(np.int64), sub.data.copy()))
        return cls.from_local_rows(dist, pieces)

    def _import_pattern(self) -> list[dict[int, np.ndarray]]:
        pattern = []
        for rank, col_map in enumerate(self.col_maps):
            start, stop = self.dist.range_of(rank)
            remote = col_map[(col_map < start) | (col_map >= stop)]
            owners = self.dist.owners_of(remote)
            pattern.append({int(o): remote[owners == o] for o in np.unique(owners)})
        return pattern

    def local_rows(self, rank: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, global column indices, values) of one rank's block."""
        block = self.blocks[rank]
        return block.indptr.copy(), self.col_maps[rank][block.indices], block.data.copy()

    def import_bytes(self, rank: int) -> int:
        return sum(cols.size for cols in self.imports[rank].values()) * FLOAT_BYTES

    def to_global(self) -> sp.csr_matrix:
        parts = []
        for rank in range(self.dist.parts):
            indptr, cols, data = self.local_rows(rank)
            parts.append(sp.csr_matrix((data, cols, indptr), shape=(self.dist.size_of(rank), self.rows)))
        return sp.vstack(parts, format="csr")


def announce_imports(world: World, comm: CommEpoch, a: DistSparseMatrix) -> float:
    """Send every owner the list of columns it must export (pattern rebuild)."""
    messages = [
        Message(src=rank, dst=owner, nbytes=cols.size * INDEX_BYTES, payload=cols)
        for rank, pattern in enumerate(a.imports)
        for owner, cols in pattern.items()
    ]
    return world.exchange(comm, messages).cost


def _check_conformal(*vectors: DistVector) -> None:
    first = vectors[0].dist
    for v in vectors[1:]:
        if v.dist != first:
            raise ConfigError("vectors are not conformal")


def spmv(world: World, comm: CommEpoch, a: DistSparseMatrix, x: DistVector) -> DistVector:
    """y = A x: halo exchange along the import pattern, then local row products."""
    _check_conformal(x)
    if x.dist != a.dist:
        raise ConfigError("vector is not conformal to the matrix distribution")
    starts = a.dist.starts
    messages = []
    for rank, pattern in enumerate(a.imports):
        for owner, cols in pattern.items():
            values = x.parts[owner][cols - starts[owner]]
            messages.append(Message(src=owner, dst=rank, nbytes=cols.size * FLOAT_BYTES, payload=(owner, values)))
    received = world.exchange(comm, messages).deliveries

    parts = []
    for rank, col_map in enumerate(a.col_maps):
        start, stop = a.dist.range_of(rank)
        ext = np.empty(col_map.size)
        own = (col_map >= start) & (col_map < stop)
        ext[own] = x.parts[rank][col_map[own] - start]
        for _, (owner, values) in received.get(rank, []):
            ext[np.searchsorted(col_map, a.imports[rank][owner])] = values
        parts.append(a.blocks[rank] @ ext)
    world.compute(comm, [2.0 * b.nnz for b in a.blocks])
    return DistVector(a.dist, parts)


def dot(world: World, comm: CommEpoch, u: DistVector, v: DistVector) -> float:
    """Global inner product: local partial dots reduced in rank order."""
    _check_conformal(u, v)
    partials = [float(np.dot(a, b)) for a, b in zip(u.parts, v.parts)]
    world.compute(comm, [2.0 * p.size for p in u.parts])
    return float(world.collective(comm, "allreduce", partials, nbytes=FLOAT_BYTES).value)


def norm(world: World, comm: CommEpoch, u: DistVector) -> float:
    return float(np.sqrt(dot(world, comm, u, u)))


def axpy(world: World, comm: CommEpoch, alpha: float, x: DistVector, y: DistVector) -> DistVector:
    """y + alpha * x as a new vector."""
    _check_conformal(x, y)
    world.compute(comm, [2.0 * p.size for p in x.parts])
    return DistVector(x.dist, [yp + alpha * xp for xp, yp in zip(x.parts, y.parts)])


def scale(world: World, comm: CommEpoch, alpha: float, x: DistVector) -> DistVector:
    world.compute(comm, [float(p.size) for p in x.parts])
    return DistVector(x.dist, [alpha * p for p in x.parts])


def combine(
    world: World,
    comm: CommEpoch,
    coeffs: Sequence[float],
    basis: Sequence[DistVector],
    base: Optional[DistVector] = None,
) -> DistVector:
    """base + sum_i coeffs[i] * basis[i], accumulated in index order."""
    if not basis and base is None:
        raise ConfigError("combine needs a base vector or at least one basis vector")
    dist = (base or basis[0]).dist
    parts = [p.copy() for p in base.parts] if base is not None else [np.zeros(n) for n in dist.sizes]
    for c, vec in zip(coeffs, basis):
        for rank, p in enumerate(vec.parts):
            parts[rank] += c * p
    world.compute(comm, [2.0 * n * len(basis) for n in dist.sizes])
    return DistVector(dist, parts)


@dataclass(frozen=True)
class Kernels:
    """The vector kernels bound to one world and communicator epoch."""

    world: World
    comm: CommEpoch

    def spmv(self, a: DistSparseMatrix, x: DistVector) -> DistVector:
        return spmv(self.world, self.comm, a, x)

    def dot(self, u: DistVector, v: DistVector) -> float:
        return dot(self.world, self.comm, u, v)

    def norm(self, u: DistVector) -> float:
        return norm(self.world, self.comm, u)

    def axpy(self, alpha: float, x: DistVector, y: DistVector) -> DistVector:
        return axpy(self.world, self.comm, alpha, x, y)

    def scale(self, alpha: float, x: DistVector) -> DistVector:
        return scale(self.world, self.comm, alpha, x)

    def combine(
        self,
        coeffs: Sequence[float],
        basis: Sequence[DistVector],
        base: Optional[DistVector] = None,
    ) -> DistVector:
        return combine(self.world, self.comm, coeffs, basis, base)
