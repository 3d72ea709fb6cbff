"""
End-to-end experiments: solutions survive failures, the two strategies
trade costs as expected, and sweeps are reproducible.
"""

import logging
from pathlib import Path

import numpy as np
import pytest

from src.harness.report import format_csv
from src.harness.runner import RunStatus, simulate
from src.harness.sweep import expand_sweep, load_configs, run_sweep

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"
# relative slack when recovery costs of k failures are compared with k single recoveries
ADDITIVITY_TOLERANCE = 0.15
# network-bound machine: messaging outweighs local work
NETWORK_BOUND_SECONDS_PER_FLOP = 1e-9


def _faults(*entries: tuple[int, int]) -> dict:
    return {"injections": [{"rank": r, "outer_iteration": t} for r, t in entries]}


def _relative_error(x: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(x - ref) / np.linalg.norm(ref))


# -----------------------------------------------------------------------------
# Correctness under failures
# -----------------------------------------------------------------------------


def test_recovered_solutions_match_the_fault_free_run(make_experiment, simulate_planned):
    clean = simulate(make_experiment())
    assert clean.status == RunStatus.OK

    shrunk = simulate_planned(make_experiment(faults=_faults((3, 1))))
    assert shrunk.status == RunStatus.OK
    assert shrunk.failures == 1
    assert _relative_error(shrunk.x, clean.x) <= 1e-7
    assert shrunk.stats.inner_iterations_recomputed <= 1 * 3

    twice = simulate_planned(make_experiment(faults=_faults((3, 1), (1, 2))))
    assert twice.status == RunStatus.OK
    assert [r.failed for r in twice.reports] == [(3,), (1,)]
    assert _relative_error(twice.x, clean.x) <= 1e-7
    assert twice.stats.inner_iterations_recomputed <= 2 * 3


def test_substitute_reproduces_the_fault_free_solution_bit_for_bit(make_experiment, simulate_planned):
    clean = simulate(make_experiment())
    substituted = simulate_planned(make_experiment(strategy="substitute", world={"spares": 1}, faults=_faults((2, 1))))
    assert substituted.status == RunStatus.OK
    assert substituted.reports[0].spares == (4,)
    assert np.array_equal(substituted.x, clean.x)
    assert substituted.stats.outer_iterations == clean.stats.outer_iterations


def test_failure_before_any_progress_rolls_back_to_the_start(make_experiment, simulate_planned):
    outcome = simulate_planned(
        make_experiment(faults={"injections": [{"rank": 0, "outer_iteration": 0, "window_offset": 0.0}]})
    )
    assert outcome.status == RunStatus.OK
    assert outcome.reports[0].tag == 0
    assert outcome.stats.inner_iterations_recomputed == 0


def test_late_failures_still_fire_on_the_default_workload(make_experiment, simulate_planned):
    outcome = simulate_planned(make_experiment(faults=_faults((3, 1), (1, 3), (2, 5))))
    assert outcome.status == RunStatus.OK
    assert [r.tag for r in outcome.reports] == [1, 3, 5]
    assert outcome.unfired == 0


def test_triggers_past_convergence_are_reported_as_unfired(make_experiment, caplog):
    clean = simulate(make_experiment())
    late = clean.stats.outer_iterations + 2
    with caplog.at_level(logging.WARNING, logger="src.harness.runner"):
        outcome = simulate(make_experiment(faults=_faults((3, late))))
    assert outcome.status == RunStatus.OK
    assert (outcome.failures, outcome.unfired) == (0, 1)
    assert outcome.total == pytest.approx(clean.total)
    assert "never triggered" in caplog.text


# -----------------------------------------------------------------------------
# Total time grows with every failure
# -----------------------------------------------------------------------------

MONOTONE_VICTIMS = ((3, 1), (1, 3), (2, 5))


@pytest.mark.parametrize("strategy", ["shrink", "substitute"])
def test_adding_a_failure_never_shortens_the_run(make_experiment, simulate_planned, strategy):
    spares = len(MONOTONE_VICTIMS) if strategy == "substitute" else 0
    totals = []
    for k in range(len(MONOTONE_VICTIMS) + 1):
        outcome = simulate_planned(
            make_experiment(strategy=strategy, world={"spares": spares}, faults=_faults(*MONOTONE_VICTIMS[:k]))
        )
        assert outcome.status == RunStatus.OK
        assert outcome.failures == k
        totals.append(outcome.total)
    assert all(later > earlier for earlier, later in zip(totals, totals[1:])), totals


def test_shrinking_slows_every_later_iteration(make_experiment, simulate_planned):
    clean = simulate(make_experiment())
    shrunk = simulate_planned(make_experiment(faults=_faults((3, 1), (1, 3))))
    assert shrunk.breakdown.useful > clean.breakdown.useful


# -----------------------------------------------------------------------------
# Shrink versus substitute
# -----------------------------------------------------------------------------


def _pair(make_experiment, world: dict, k: int = 2):
    common = dict(
        world={
            "processes": 8,
            "cores_per_node": 2,
            "alpha_intra": 1e-6,
            "alpha_inter": 5e-5,
            "seconds_per_flop": NETWORK_BOUND_SECONDS_PER_FLOP,
            **world,
        },
        problem={"n": 8},
        solver={"tol": 1e-10, "m_outer": 10, "m_inner": 3, "max_outer": 20},
    )
    shrink = simulate(make_experiment(preset={"name": "worst_case_shrink", "k": k}, **common))
    common["world"]["spares"] = k
    substitute = simulate(
        make_experiment(strategy="substitute", preset={"name": "worst_case_substitute", "k": k}, **common)
    )
    assert shrink.status == substitute.status == RunStatus.OK
    return shrink, substitute


def test_substitute_checkpoints_cost_more_when_spares_share_a_node(make_experiment):
    shrink, substitute = _pair(make_experiment, {})
    assert [i.rank for i in shrink.plan.injections] == [7, 6]
    assert [i.rank for i in substitute.plan.injections] == [7, 5]
    assert substitute.breakdown.t_check > shrink.breakdown.t_check


def test_shrink_pays_in_checkpoint_size_and_recompute_when_co_located(make_experiment):
    shrink, substitute = _pair(make_experiment, {"cores_per_node": 10, "seconds_per_flop": 1e-8})
    assert [i.rank for i in substitute.plan.injections] == [7, 6]
    assert shrink.stats.post_failure_checkpoint_bytes > substitute.stats.post_failure_checkpoint_bytes
    assert shrink.breakdown.t_recompute > substitute.breakdown.t_recompute


def _sustained(make_experiment, strategy: str, processes: int, k: int, **world):
    spares = k if strategy == "substitute" else 0
    preset = "worst_case_substitute" if strategy == "substitute" else "worst_case_shrink"
    return simulate(
        make_experiment(
            world={
                "processes": processes,
                "spares": spares,
                "cores_per_node": 4,
                "seconds_per_flop": NETWORK_BOUND_SECONDS_PER_FLOP,
                **world,
            },
            problem={"n": 8},
            solver={"tol": 1e-30, "m_outer": 1, "m_inner": 2, "max_outer": 10},
            strategy=strategy,
            preset={"name": preset, "k": k},
        )
    )


@pytest.mark.parametrize("strategy", ["shrink", "substitute"])
def test_recovery_costs_add_up_per_failure(make_experiment, strategy):
    def recovery(k: int) -> float:
        outcome = _sustained(make_experiment, strategy, 32, k)
        assert outcome.status == RunStatus.NOT_CONVERGED
        assert outcome.failures == k
        return outcome.breakdown.t_pfr + outcome.breakdown.t_pfx

    single = recovery(1)
    assert single > 0
    for k in (2, 3, 4):
        assert abs(recovery(k) - k * single) <= ADDITIVITY_TOLERANCE * k * single


def test_shrink_checkpoint_cost_grows_linearly_with_failures(make_experiment):
    ks = np.arange(5)
    t_check = np.array([_sustained(make_experiment, "shrink", 16, int(k)).breakdown.t_check for k in ks])
    assert np.all(np.diff(t_check) > 0)
    slope, intercept = np.polyfit(ks, t_check, 1)
    fitted = slope * ks + intercept
    r2 = 1.0 - np.sum((t_check - fitted) ** 2) / np.sum((t_check - t_check.mean()) ** 2)
    assert r2 >= 0.98


# -----------------------------------------------------------------------------
# Redundancy
# -----------------------------------------------------------------------------


def _redundant(make_experiment, simulate_planned, victims: list[int]):
    return simulate_planned(
        make_experiment(
            world={"processes": 6},
            checkpoint={"redundancy": 2},
            allow_unsurvivable_plans=True,
            faults=_faults(*[(v, 1) for v in victims]),
        )
    )


def test_two_buddies_survive_two_adjacent_failures(make_experiment, simulate_planned):
    outcome = _redundant(make_experiment, simulate_planned, [1, 2])
    assert outcome.status == RunStatus.OK
    assert outcome.reports[0].failed == (1, 2)
    assert np.allclose(outcome.x, 1.0, atol=1e-6)


def test_three_adjacent_failures_exceed_two_buddies(make_experiment, simulate_planned):
    outcome = _redundant(make_experiment, simulate_planned, [1, 2, 3])
    assert outcome.status == RunStatus.UNRECOVERABLE
    assert outcome.x is None
    assert outcome.reason


def test_redundancy_one_cannot_survive_owner_and_buddy(make_experiment):
    outcome = simulate(make_experiment(allow_unsurvivable_plans=True, faults=_faults((1, 1), (2, 1))))
    assert outcome.status == RunStatus.UNRECOVERABLE
    assert outcome.failures == 2


# -----------------------------------------------------------------------------
# Sweeps
# -----------------------------------------------------------------------------


@pytest.fixture
def small_sweep(make_experiment):
    return expand_sweep(make_experiment(name="repro"), processes=(2, 4), failure_counts=(0, 1))


def test_sweeps_are_byte_reproducible(small_sweep):
    first = format_csv(run_sweep(small_sweep, max_workers=1))
    second = format_csv(run_sweep(small_sweep, max_workers=1))
    assert first == second
    assert first.count("\n") == len(small_sweep) + 1


def test_parallel_sweep_keeps_input_order(small_sweep):
    sequential = format_csv(run_sweep(small_sweep, max_workers=1))
    assert format_csv(run_sweep(small_sweep, max_workers=2)) == sequential


def test_every_row_splits_into_useful_time_and_waste(small_sweep):
    for row in run_sweep(small_sweep, max_workers=1):
        assert row.status == "ok"
        assert row.total_s == pytest.approx(row.useful_s + row.waste_s, rel=1e-9)
        assert row.slowdown >= 1.0
        assert row.pct_check + row.pct_recovery + row.pct_reconfig <= 100.0


def test_bundled_configs_run():
    configs = load_configs(CONFIGS_DIR)
    assert len(configs) >= 3
    for config in configs:
        outcome = simulate(config)
        assert outcome.status == RunStatus.OK, config.name
        assert outcome.failures == len(outcome.plan)
