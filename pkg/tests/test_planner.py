"""Tests for block distributions and the shrink redistribution planner."""

import itertools

import numpy as np
import pytest

from src.checkpoint.buddy import buddy_set
from src.recovery.distribution import BlockDistribution, canonical_distribution, extra_rows_lower_bound
from src.recovery.planner import SourceKind, plan_shrink_transfers
from src.simcore.errors import ConfigError, UnrecoverableError

# -----------------------------------------------------------------------------
# Distributions
# -----------------------------------------------------------------------------


def test_canonical_distribution_examples():
    assert canonical_distribution(12, 4).ranges == ((0, 3), (3, 6), (6, 9), (9, 12))
    assert canonical_distribution(12, 5).sizes == [3, 3, 2, 2, 2]
    assert canonical_distribution(0, 3).sizes == [0, 0, 0]
    with pytest.raises(ConfigError):
        canonical_distribution(10, 0)


def test_distribution_must_tile_the_rows():
    with pytest.raises(ConfigError):
        BlockDistribution(10, ((0, 4), (5, 10)))
    with pytest.raises(ConfigError):
        BlockDistribution(10, ((0, 4), (4, 9)))


def test_owners_of_skips_empty_ranks():
    dist = BlockDistribution(5, ((0, 3), (3, 3), (3, 5)))
    assert dist.owners_of(np.array([0, 2, 3, 4])).tolist() == [0, 0, 2, 2]
    assert dist.overlapping(2, 4) == [(0, 2, 3), (2, 3, 4)]


def test_extra_rows_lower_bound():
    assert extra_rows_lower_bound(100, 10) == pytest.approx(100 / 9 - 10)
    assert extra_rows_lower_bound(12, 4) == 1
    with pytest.raises(ConfigError):
        extra_rows_lower_bound(12, 1)


def test_realized_extra_rows_meet_the_bound():
    for rows, parts in [(100, 10), (64, 8), (512, 32), (7, 3)]:
        before = canonical_distribution(rows, parts).sizes
        after = canonical_distribution(rows, parts - 1).sizes
        assert np.mean(after) - np.mean(before) == pytest.approx(extra_rows_lower_bound(rows, parts))
        assert min(after) >= min(before)


# -----------------------------------------------------------------------------
# Planner
# -----------------------------------------------------------------------------


def _ring_backups(parts: int, redundancy: int, failed: set[int]) -> dict[int, set[int]]:
    hosted: dict[int, set[int]] = {h: set() for h in range(parts) if h not in failed}
    for owner in range(parts):
        for host in buddy_set(owner, redundancy, parts):
            if host in hosted:
                hosted[host].add(owner)
    return hosted


def _check_coverage(plan, failed: set[int]) -> None:
    """Brute-force: every new range is tiled exactly by kept rows plus transfers."""
    for new_rank, pid in enumerate(plan.new_members):
        start, stop = plan.new.range_of(new_rank)
        lo, hi = plan.kept_range(new_rank)
        covered = list(range(lo, hi))
        for t in plan.incoming(new_rank):
            owner_rank = plan.old_members.index(t.source.owner)
            a, b = plan.old.range_of(owner_rank)
            assert a <= t.start < t.stop <= b
            if t.source.kind == SourceKind.LOCAL_MEMORY:
                assert owner_rank not in failed and t.source.host == t.source.owner
            covered.extend(range(t.start, t.stop))
        assert sorted(covered) == list(range(start, stop))


@pytest.mark.parametrize("parts", range(2, 9))
@pytest.mark.parametrize("rows", [1, 5, 12, 17, 40, 64])
def test_single_failure_plans_cover_exactly_and_stay_local_above_the_failure(rows, parts):
    members = list(range(parts))
    for f in range(parts):
        plan = plan_shrink_transfers(canonical_distribution(rows, parts), members, {f}, _ring_backups(parts, 1, {f}))
        assert plan.new == canonical_distribution(rows, parts - 1)
        assert plan.new_members == tuple(p for p in members if p != f)
        _check_coverage(plan, {f})
        assert not [t for t in plan.remote() if plan.new_members[t.destination] > f]


@pytest.mark.parametrize("parts", range(3, 9))
@pytest.mark.parametrize("rows", [5, 17, 64])
def test_double_failure_plans_are_exact_or_unrecoverable(rows, parts):
    old = canonical_distribution(rows, parts)
    members = list(range(parts))
    for failed in itertools.combinations(range(parts), 2):
        failed = set(failed)
        backups = _ring_backups(parts, 1, failed)
        hosted_somewhere = set().union(*backups.values())
        lost = [f for f in failed if old.size_of(f) > 0 and f not in hosted_somewhere]
        if lost:
            with pytest.raises(UnrecoverableError) as exc:
                plan_shrink_transfers(old, members, failed, backups)
            assert set(exc.value.lost_owners) == set(lost)
        else:
            _check_coverage(plan_shrink_transfers(old, members, failed, backups), failed)


def test_redundancy_two_survives_adjacent_failures():
    old = canonical_distribution(30, 6)
    plan = plan_shrink_transfers(old, list(range(6)), {2, 3}, _ring_backups(6, 2, {2, 3}))
    _check_coverage(plan, {2, 3})


def test_documented_example_fail_rank_four_of_six():
    old = canonical_distribution(12, 6)
    plan = plan_shrink_transfers(old, list(range(6)), {4}, _ring_backups(6, 1, {4}))
    assert plan.new.sizes == [3, 3, 2, 2, 2]
    (incoming,) = plan.incoming(3)
    assert (incoming.start, incoming.stop) == (8, 10)
    assert incoming.source.kind == SourceKind.BACKUP
    assert incoming.source.owner == 4
    assert plan.kept_range(4) == (10, 12)
    assert plan.incoming(4) == []


def test_highest_rank_failure_moves_the_most():
    old = canonical_distribution(64, 8)
    remote = [
        len(plan_shrink_transfers(old, list(range(8)), {f}, _ring_backups(8, 1, {f})).remote()) for f in range(8)
    ]
    assert remote[7] == max(remote)
    assert remote[7] > remote[0]


def test_planner_works_on_process_ids_after_earlier_failures():
    members = [0, 1, 3, 4]
    old = canonical_distribution(16, 4)
    backups = {0: {4}, 1: {0}, 4: {3}}
    plan = plan_shrink_transfers(old, members, {2}, backups)
    assert plan.new_members == (0, 1, 4)
    _check_coverage(plan, {2})


def test_planner_argument_errors():
    old = canonical_distribution(12, 4)
    with pytest.raises(ConfigError):
        plan_shrink_transfers(old, [0, 1, 2], {1}, {})
    with pytest.raises(ConfigError):
        plan_shrink_transfers(old, [0, 1, 2, 3], {4}, {})
    with pytest.raises(UnrecoverableError):
        plan_shrink_transfers(old, [0, 1, 2, 3], {0, 1, 2, 3}, {})
    empty = plan_shrink_transfers(old, [0, 1, 2, 3], set(), {})
    assert empty.transfers == []
    assert empty.new == old
