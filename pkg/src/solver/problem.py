"""
Test problems: the 27-point 3D Poisson-type stencil and Matrix Market files.

The stencil couples every grid point with all neighbours at Chebyshev
distance 1. Truncation at the boundary keeps the matrix nonsingular; the
right-hand side is A @ ones so the exact solution is the ones vector.
"""

import logging
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from src.recovery.distribution import BlockDistribution
from src.simcore.errors import ConfigError
from src.simcore.world import CommEpoch, World
from src.solver.distributed import DistSparseMatrix, DistVector

logger = logging.getLogger(__name__)


def poisson27_global(n: int, diagonal_shift: float = 0.0) -> sp.csr_matrix:
    """Assemble the n^3 x n^3 stencil matrix (diagonal 26 + shift, off-diagonals -1)."""
    if n < 1:
        raise ConfigError("grid size n must be >= 1")
    t = sp.diags([1.0, 1.0, 1.0], [-1, 0, 1], shape=(n, n), format="csr")
    neighbours = sp.kron(sp.kron(t, t, format="csr"), t, format="csr")
    a = (27.0 + diagonal_shift) * sp.identity(n**3, format="csr") - neighbours
    a = sp.csr_matrix(a, dtype=np.float64)
    a.sort_indices()
    return a


def load_matrix_market(path: str | Path) -> sp.csr_matrix:
    """Read a square (coordinate, real, general) Matrix Market file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"matrix file not found: {path}")
    a = sp.csr_matrix(scipy.io.mmread(str(path)), dtype=np.float64)
    if a.shape[0] != a.shape[1]:
        raise ConfigError(f"matrix in {path} is not square: {a.shape}")
    a.sum_duplicates()
    a.sort_indices()
    logger.info("Loaded %s: %s rows, %s nonzeros", path.name, a.shape[0], a.nnz)
    return a


def distribute_problem(
    world: World,
    comm: CommEpoch,
    a: sp.csr_matrix,
    rhs: np.ndarray | None = None,
) -> tuple[DistSparseMatrix, DistVector]:
    """Block-distribute a global matrix over `comm`; rhs defaults to A @ ones."""
    rows = a.shape[0]
    dist = BlockDistribution.canonical(rows, comm.size)
    if rhs is None:
        rhs = a @ np.ones(rows)
    return DistSparseMatrix.from_global(dist, a), DistVector.from_global(dist, rhs)


def generate_poisson27(
    world: World,
    comm: CommEpoch,
    n: int,
    diagonal_shift: float = 0.0,
) -> tuple[DistSparseMatrix, DistVector]:
    a = poisson27_global(n, diagonal_shift)
    logger.info("Poisson27 n=%s: R=%s nnz=%s over %s ranks", n, a.shape[0], a.nnz, comm.size)
    return distribute_problem(world, comm, a)
