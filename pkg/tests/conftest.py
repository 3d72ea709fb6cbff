"""
Pytest fixtures: small worlds, distributed Poisson problems, a started solver
run, a factory for experiment documents, and a simulate wrapper that insists
every planned failure fired.
"""

import copy
from collections.abc import Callable
from typing import Any

import pytest

from src.harness.runner import RunOutcome, RunStatus, simulate
from src.harness.schemas import ExperimentConfig, parse_experiment
from src.simcore.world import World, build_world
from src.solver.distributed import DistSparseMatrix, DistVector
from src.solver.gmres import SolverRun, start_cycle
from src.solver.problem import generate_poisson27
from src.solver.state import SolverConfig

BASE_DOCUMENT: dict[str, Any] = {
    "world": {"processes": 4, "spares": 0, "cores_per_node": 2, "alpha_intra": 1e-6, "alpha_inter": 5e-5},
    "problem": {"kind": "poisson27", "n": 8},
    "solver": {"tol": 1e-10, "m_outer": 10, "m_inner": 3, "max_outer": 30},
    "strategy": "shrink",
    "checkpoint": {"mode": "fixed_interval", "k": 1, "redundancy": 1},
}


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@pytest.fixture
def make_document() -> Callable[..., dict[str, Any]]:
    """Raw experiment document from BASE_DOCUMENT; nested dicts merge."""

    def factory(**overrides: Any) -> dict[str, Any]:
        return _merge(BASE_DOCUMENT, overrides)

    return factory


@pytest.fixture
def make_experiment(make_document) -> Callable[..., ExperimentConfig]:
    """Validated experiment from BASE_DOCUMENT; nested dicts merge."""

    def factory(**overrides: Any) -> ExperimentConfig:
        return parse_experiment(make_document(**overrides))

    return factory


@pytest.fixture
def make_world() -> Callable[..., World]:
    def factory(processes: int = 4, spares: int = 0, cores_per_node: int = 2, **extra: Any) -> World:
        doc = {"processes": processes, "spares": spares, "cores_per_node": cores_per_node, **extra}
        return build_world(doc)

    return factory


@pytest.fixture
def make_problem(make_world) -> Callable[..., tuple[World, DistSparseMatrix, DistVector]]:
    def factory(processes: int = 4, n: int = 4, **world: Any) -> tuple[World, DistSparseMatrix, DistVector]:
        w = make_world(processes=processes, **world)
        a, b = generate_poisson27(w, w.comm, n)
        return w, a, b

    return factory


@pytest.fixture
def make_run(make_problem) -> Callable[..., SolverRun]:
    """A solver run whose first cycle has been started (state at outer iteration 0)."""

    def factory(processes: int = 4, n: int = 4, config: SolverConfig | None = None, **world: Any) -> SolverRun:
        w, a, b = make_problem(processes=processes, n=n, **world)
        run = SolverRun(world=w, comm=w.comm, a=a, b=b, config=config or SolverConfig())
        run.b_norm = run.kernels.norm(b)
        run.state = start_cycle(run, DistVector.zeros(b.dist), 0, 0)
        return run

    return factory


@pytest.fixture
def simulate_planned() -> Callable[[ExperimentConfig], RunOutcome]:
    """simulate, failing the test when a planned failure never reached its trigger point."""

    def runner(config: ExperimentConfig) -> RunOutcome:
        outcome = simulate(config)
        if outcome.status != RunStatus.UNRECOVERABLE:
            assert outcome.failures == len(outcome.plan), f"{outcome.unfired} planned failures never fired"
        return outcome

    return runner
