"""
Inner-outer flexible GMRES on the simulated world.

The outer iteration is right-preconditioned flexible GMRES with modified
Gram-Schmidt and Givens rotations kept in the replicated Hessenberg; each
outer step preconditions with m_inner steps of plain GMRES started from zero.

Every inner step and the outer part of an iteration run inside a hook
context so a fault-tolerance layer can inject failures, decide whether the
work is first-time or re-executed, checkpoint between outer iterations and
repair the run when a ProcFailed escapes.
"""

import logging
from collections.abc import Iterator
from contextlib import AbstractContextManager, contextmanager
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from src.simcore.errors import ProcFailed, UnrecoverableError
from src.simcore.faults import FaultInjector
from src.simcore.world import CommEpoch, World
from src.solver.distributed import DistSparseMatrix, DistVector, Kernels
from src.solver.state import ReplicatedScalars, SolverConfig, SolverState, SolverStats

logger = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-14
# second Gram-Schmidt pass when ||w|| after the first falls below this fraction of ||w|| before it
REORTH_RATIO = 1.0 / np.sqrt(2.0)


def needs_second_pass(h: np.ndarray, hnorm: float) -> bool:
    """
    Whether one MGS pass cancelled most of w. ||w_before||^2 is recovered as
    sum(h^2) + hnorm^2, so the check costs no communication.
    """
    before_sq = float(np.dot(h, h)) + hnorm * hnorm
    return hnorm * hnorm < REORTH_RATIO * REORTH_RATIO * before_sq


def orthogonalize(k: Kernels, w: DistVector, basis: list[DistVector], h: np.ndarray) -> tuple[DistVector, float]:
    """
    Modified Gram-Schmidt of w against basis, coefficients into h[:len(basis)].
    Repeated once when the first pass cancelled most of w. Returns (w, ||w||).
    """
    n = len(basis)
    for i in range(n):
        h[i] = k.dot(w, basis[i])
        w = k.axpy(-h[i], basis[i], w)
    hnorm = k.norm(w)
    if needs_second_pass(h[:n], hnorm):
        for i in range(n):
            c = k.dot(w, basis[i])
            h[i] += c
            w = k.axpy(-c, basis[i], w)
        hnorm = k.norm(w)
    return w, hnorm


def givens(a: float, b: float) -> tuple[float, float]:
    """(c, s) with [c s; -s c] [a; b] = [r; 0]."""
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def apply_givens(h: np.ndarray, cs: np.ndarray, sn: np.ndarray, k: int) -> None:
    """Rotate column h (length >= k+2) by the first k rotations, then zero h[k+1]."""
    for i in range(k):
        hi, hi1 = h[i], h[i + 1]
        h[i] = cs[i] * hi + sn[i] * hi1
        h[i + 1] = -sn[i] * hi + cs[i] * hi1
    cs[k], sn[k] = givens(h[k], h[k + 1])
    h[k] = cs[k] * h[k] + sn[k] * h[k + 1]
    h[k + 1] = 0.0


def solve_upper(r: np.ndarray, g: np.ndarray, k: int) -> np.ndarray:
    """Back substitution on the leading k x k upper-triangular block."""
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - np.dot(r[i, i + 1 : k], y[i + 1 : k])) / r[i, i]
    return y


@dataclass
class SolverRun:
    """Everything the iteration touches; recovery swaps comm, a, b and state."""

    world: World
    comm: CommEpoch
    a: DistSparseMatrix
    b: DistVector
    config: SolverConfig
    state: Optional[SolverState] = None
    stats: SolverStats = field(default_factory=SolverStats)
    b_norm: float = 0.0

    @property
    def kernels(self) -> Kernels:
        return Kernels(self.world, self.comm)


class SolverHooks(Protocol):
    def start(self, run: SolverRun) -> None: ...

    def step(self, run: SolverRun, outer_iteration: int, step: int) -> AbstractContextManager[bool]: ...

    def after_outer_iteration(self, run: SolverRun) -> None: ...

    def recover(self, run: SolverRun, exc: ProcFailed) -> None: ...


class Unprotected:
    """No checkpoints, no detection: any failure ends the run."""

    def __init__(self, injector: Optional[FaultInjector] = None) -> None:
        self.injector = injector

    def start(self, run: SolverRun) -> None:
        return None

    @contextmanager
    def step(self, run: SolverRun, outer_iteration: int, step: int) -> Iterator[bool]:
        if self.injector is not None:
            self.injector.fire(run.world, outer_iteration, step)
        yield False

    def after_outer_iteration(self, run: SolverRun) -> None:
        return None

    def recover(self, run: SolverRun, exc: ProcFailed) -> None:
        raise UnrecoverableError("process failure in a run without fault tolerance", lost_owners=exc.failed)


class InnerGmres:
    """m steps of GMRES for A z = v from z = 0, one Arnoldi step at a time."""

    def __init__(self, kernels: Kernels, a: DistSparseMatrix, m: int) -> None:
        self.k = kernels
        self.a = a
        self.m = m
        self.q: list[DistVector] = []
        self.h = np.zeros((m + 1, m))
        self.cs = np.zeros(m)
        self.sn = np.zeros(m)
        self.g = np.zeros(m + 1)
        self.beta = 0.0
        self.steps = 0
        self.done = False

    def begin(self, v: DistVector) -> None:
        beta = self.k.norm(v)
        self.beta = beta
        self.g[0] = beta
        self.q = [self.k.scale(1.0 / beta, v)] if beta > 0.0 else []
        self.done = beta == 0.0

    def step(self) -> None:
        k = self.steps
        w = self.k.spmv(self.a, self.q[k])
        w, hnorm = orthogonalize(self.k, w, self.q[: k + 1], self.h[:, k])
        hmax = np.abs(self.h[: k + 1, k]).max()
        self.h[k + 1, k] = hnorm
        apply_givens(self.h[:, k], self.cs, self.sn, k)
        self.g[k + 1] = -self.sn[k] * self.g[k]
        self.g[k] = self.cs[k] * self.g[k]
        self.steps += 1
        if hnorm <= BREAKDOWN_TOL * hmax or self.steps == self.m:
            self.done = True
        else:
            self.q.append(self.k.scale(1.0 / hnorm, w))

    @property
    def residual_estimate(self) -> float:
        return abs(self.g[self.steps])

    def solution(self, like: DistVector) -> DistVector:
        if self.steps == 0:
            return DistVector.zeros(like.dist)
        y = solve_upper(self.h, self.g, self.steps)
        return self.k.combine(list(y), self.q[: self.steps])


def inner_solve(world: World, comm: CommEpoch, a: DistSparseMatrix, v: DistVector, m_inner: int) -> DistVector:
    """z ~ A^-1 v by m_inner GMRES steps from zero (fewer on breakdown)."""
    inner = InnerGmres(Kernels(world, comm), a, m_inner)
    inner.begin(v)
    while not inner.done:
        inner.step()
    return inner.solution(v)


def residual_norm(world: World, comm: CommEpoch, a: DistSparseMatrix, x: DistVector, b: DistVector) -> float:
    k = Kernels(world, comm)
    return k.norm(k.axpy(-1.0, k.spmv(a, x), b))


def start_cycle(run: SolverRun, x_seed: DistVector, outer_iteration: int, outer_cycle: int) -> SolverState:
    """Fresh cycle from x_seed: r = b - A x_seed, V = [r / ||r||]."""
    k = run.kernels
    r = k.axpy(-1.0, k.spmv(run.a, x_seed), run.b)
    beta = k.norm(r)
    scalars = ReplicatedScalars.fresh(run.config.m_outer, beta, outer_iteration, outer_cycle)
    scalars.relative_residual = beta / run.b_norm if run.b_norm > 0 else 0.0
    if scalars.relative_residual <= run.config.tol:
        scalars.converged = scalars.finished = True
    elif outer_cycle >= run.config.max_outer:
        scalars.finished = True
    v0 = k.scale(1.0 / beta, r) if beta > 0.0 else r
    return SolverState(dist=x_seed.dist, x_seed=x_seed, V=[v0], Z=[], scalars=scalars)


def outer_iteration(run: SolverRun, hooks: SolverHooks) -> None:
    """One flexible Arnoldi step, preceded by its inner solve."""
    cfg = run.config
    state = run.state
    s = state.scalars
    t, j = s.outer_iteration, s.j

    inner: Optional[InnerGmres] = None
    for step in range(cfg.m_inner):
        if inner is not None and inner.done:
            break
        with hooks.step(run, t, step) as replay:
            if inner is None:
                inner = InnerGmres(run.kernels, run.a, cfg.m_inner)
                inner.begin(state.V[j])
            if not inner.done:
                inner.step()
            run.stats.inner_iterations += 1
            if replay:
                run.stats.inner_iterations_recomputed += 1

    with hooks.step(run, t, cfg.m_inner):
        k = run.kernels
        z = inner.solution(state.V[j])
        w = k.spmv(run.a, z)
        w, hnorm = orthogonalize(k, w, state.V[: j + 1], s.H[:, j])
        hmax = np.abs(s.H[: j + 1, j]).max()
        s.H[j + 1, j] = hnorm
        apply_givens(s.H[:, j], s.cs, s.sn, j)
        s.g[j + 1] = -s.sn[j] * s.g[j]
        s.g[j] = s.cs[j] * s.g[j]
        state.Z.append(z)
        lucky = hnorm <= BREAKDOWN_TOL * hmax
        if not lucky:
            state.V.append(k.scale(1.0 / hnorm, w))
        s.j = j + 1
        estimate = abs(s.g[s.j])
        s.residual_history.append(estimate / run.b_norm)

        if s.j == cfg.m_outer or lucky or estimate <= cfg.tol * run.b_norm:
            y = solve_upper(s.H, s.g, s.j)
            x = k.combine(list(y), state.Z, base=state.x_seed)
            fresh = start_cycle(run, x, t + 1, s.outer_cycle + 1)
            fresh.scalars.residual_history = s.residual_history
            run.state = fresh
            logger.debug(
                "Cycle %s ended after outer iteration %s: relative residual %.3e",
                s.outer_cycle,
                t,
                fresh.scalars.relative_residual,
            )
        else:
            s.outer_iteration = t + 1


def fgmres(
    world: World,
    a: DistSparseMatrix,
    b: DistVector,
    config: SolverConfig,
    hooks: Optional[SolverHooks] = None,
    comm: Optional[CommEpoch] = None,
) -> tuple[DistVector, SolverStats]:
    """
    Solve A x = b from x = 0. Returns the final iterate and run statistics.

    A ProcFailed escaping an iteration or a checkpoint is handed to
    hooks.recover, which repairs the run and rolls it back to the start of an
    outer iteration; the loop then simply carries on from there.
    """
    hooks = hooks or Unprotected()
    run = SolverRun(world=world, comm=comm or world.comm, a=a, b=b, config=config)
    run.b_norm = run.kernels.norm(b)
    run.state = start_cycle(run, DistVector.zeros(b.dist), 0, 0)
    hooks.start(run)

    while not run.state.scalars.finished:
        try:
            outer_iteration(run, hooks)
            hooks.after_outer_iteration(run)
        except ProcFailed as exc:
            logger.info("Outer iteration %s interrupted: %s", run.state.outer_iteration, exc)
            hooks.recover(run, exc)

    s = run.state.scalars
    stats = run.stats
    stats.outer_iterations = s.outer_iteration
    stats.outer_cycles = s.outer_cycle
    stats.converged = s.converged
    stats.relative_residual = s.relative_residual
    stats.residual_history = list(s.residual_history)
    if not s.converged:
        logger.warning(
            "FGMRES stopped after %s cycles without reaching tol=%.1e (relative residual %.3e)",
            s.outer_cycle,
            config.tol,
            s.relative_residual,
        )
    return run.state.x_seed, stats
