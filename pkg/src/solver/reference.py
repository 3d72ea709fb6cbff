"""
Sequential inner-outer FGMRES on a plain scipy matrix.

Same algorithm, same operation order and same stopping rules as the
distributed solver; used as the oracle it is checked against.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from src.solver.gmres import BREAKDOWN_TOL, apply_givens, needs_second_pass, solve_upper
from src.solver.state import SolverConfig


def _orthogonalize(w: np.ndarray, basis: list[np.ndarray], h: np.ndarray) -> tuple[np.ndarray, float]:
    n = len(basis)
    for i in range(n):
        h[i] = float(np.dot(w, basis[i]))
        w = w + (-h[i]) * basis[i]
    hnorm = float(np.sqrt(np.dot(w, w)))
    if needs_second_pass(h[:n], hnorm):
        for i in range(n):
            c = float(np.dot(w, basis[i]))
            h[i] += c
            w = w + (-c) * basis[i]
        hnorm = float(np.sqrt(np.dot(w, w)))
    return w, hnorm


@dataclass
class ReferenceResult:
    x: np.ndarray
    converged: bool
    outer_iterations: int
    outer_cycles: int
    inner_iterations: int
    relative_residual: float
    residual_history: list[float] = field(default_factory=list)


def reference_inner(a: sp.csr_matrix, v: np.ndarray, m: int) -> tuple[np.ndarray, int]:
    """m GMRES steps from zero; returns (z, steps taken)."""
    beta = float(np.sqrt(np.dot(v, v)))
    if beta == 0.0:
        return np.zeros_like(v), 0
    h = np.zeros((m + 1, m))
    cs, sn, g = np.zeros(m), np.zeros(m), np.zeros(m + 1)
    g[0] = beta
    q = [v * (1.0 / beta)]
    steps = 0
    for k in range(m):
        w, hnorm = _orthogonalize(a @ q[k], q[: k + 1], h[:, k])
        hmax = np.abs(h[: k + 1, k]).max()
        h[k + 1, k] = hnorm
        apply_givens(h[:, k], cs, sn, k)
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        steps += 1
        if hnorm <= BREAKDOWN_TOL * hmax:
            break
        if steps < m:
            q.append(w * (1.0 / hnorm))
    y = solve_upper(h, g, steps)
    z = np.zeros_like(v)
    for c, qi in zip(y, q[:steps]):
        z += c * qi
    return z, steps


def reference_fgmres(a: sp.csr_matrix, b: np.ndarray, cfg: SolverConfig) -> ReferenceResult:
    b_norm = float(np.sqrt(np.dot(b, b)))
    m = cfg.m_outer
    inner_total = 0
    history: list[float] = []
    outer_iteration = 0
    cycle = 0
    x = np.zeros_like(b)

    def restart(x_seed: np.ndarray) -> tuple[np.ndarray, float]:
        r = b + (-1.0) * (a @ x_seed)
        beta = float(np.sqrt(np.dot(r, r)))
        return (r * (1.0 / beta) if beta > 0.0 else r), beta

    v0, beta = restart(x)
    rel = beta / b_norm if b_norm > 0 else 0.0
    if rel <= cfg.tol:
        return ReferenceResult(x, True, 0, 0, 0, rel, history)

    while True:
        H = np.zeros((m + 1, m))
        cs, sn, g = np.zeros(m), np.zeros(m), np.zeros(m + 1)
        g[0] = beta
        V, Z = [v0], []
        j = 0
        while True:
            z, steps = reference_inner(a, V[j], cfg.m_inner)
            inner_total += max(steps, 1)
            w, hnorm = _orthogonalize(a @ z, V[: j + 1], H[:, j])
            hmax = np.abs(H[: j + 1, j]).max()
            H[j + 1, j] = hnorm
            apply_givens(H[:, j], cs, sn, j)
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            Z.append(z)
            lucky = hnorm <= BREAKDOWN_TOL * hmax
            if not lucky:
                V.append(w * (1.0 / hnorm))
            j += 1
            estimate = abs(g[j])
            history.append(estimate / b_norm)
            outer_iteration += 1
            if j == m or lucky or estimate <= cfg.tol * b_norm:
                break
        y = solve_upper(H, g, j)
        for c, zi in zip(y, Z):
            x = x + c * zi
        cycle += 1
        v0, beta = restart(x)
        rel = beta / b_norm
        if rel <= cfg.tol:
            return ReferenceResult(x, True, outer_iteration, cycle, inner_total, rel, history)
        if cycle >= cfg.max_outer:
            return ReferenceResult(x, False, outer_iteration, cycle, inner_total, rel, history)
