"""Tests for buddy sets, snapshots, backup stores, coordinated checkpoints and cadence."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.checkpoint.buddy import BuddyMap, buddy_set
from src.checkpoint.coordinator import (
    checkpoint_dynamic,
    checkpoint_static,
    fetch_backup,
    latest_consistent_tag,
    refresh_backups,
)
from src.checkpoint.policy import CheckpointMode, CheckpointPolicy, optimal_interval
from src.checkpoint.snapshot import (
    Snapshot,
    SnapshotKind,
    decode_dynamic,
    decode_static,
    encode_dynamic,
    encode_static,
)
from src.checkpoint.store import BackupStore, dump_stores, store_of
from src.simcore.detection import shrink_comm
from src.simcore.errors import CheckpointError, ConfigError, ProcFailed, UnrecoverableError
from src.simcore.world import CommEpoch

# -----------------------------------------------------------------------------
# Buddies
# -----------------------------------------------------------------------------


def test_buddy_set_is_ring_successors():
    assert buddy_set(0, 1, 4) == {1}
    assert buddy_set(3, 1, 4) == {0}
    assert buddy_set(3, 2, 4) == {0, 1}
    assert buddy_set(0, 3, 2) == {1}
    assert buddy_set(0, 1, 1) == set()
    with pytest.raises(ConfigError):
        buddy_set(0, 0, 4)


def test_buddy_map_uses_process_ids():
    bm = BuddyMap.for_comm(CommEpoch(3, (0, 2, 5)), redundancy=1)
    assert bm.buddies_of(0) == (2,)
    assert bm.buddies_of(5) == (0,)
    assert bm.owners_hosted_by(0) == [5]
    with pytest.raises(ConfigError):
        BuddyMap.for_comm(CommEpoch(0, (0, 1)), 1, rule=lambda rank, r, p: {rank})


# -----------------------------------------------------------------------------
# Snapshots
# -----------------------------------------------------------------------------


def test_dynamic_snapshot_decodes_to_the_encoded_share(make_run):
    run = make_run(processes=2, n=3)
    share = run.state.local(1)
    snap = encode_dynamic(owner=1, tag=4, epoch=0, share=share)
    back = decode_dynamic(snap)
    assert (back.start, back.stop) == (share.start, share.stop)
    assert np.array_equal(back.x_seed, share.x_seed)
    assert all(np.array_equal(a, b) for a, b in zip(back.V, share.V))
    assert back.scalars.identical(share.scalars)


def test_static_snapshot_decodes_to_the_encoded_rows(make_run):
    from src.checkpoint.coordinator import static_share

    run = make_run(processes=3, n=3)
    share = static_share(run.a, run.b, 2)
    back = decode_static(encode_static(owner=2, tag=0, epoch=0, share=share))
    for field in ("indptr", "indices", "data", "rhs"):
        assert np.array_equal(getattr(back, field), getattr(share, field))


def test_decode_rejects_wrong_kind_and_corruption(make_run):
    run = make_run(processes=2, n=3)
    snap = encode_dynamic(0, 1, 0, run.state.local(0))
    with pytest.raises(CheckpointError):
        decode_static(snap)
    bad_magic = Snapshot(snap.owner, snap.kind, snap.tag, snap.epoch, snap.start, snap.stop, b"XXXX" + snap.payload[4:])
    with pytest.raises(CheckpointError):
        decode_dynamic(bad_magic)
    truncated = Snapshot(snap.owner, snap.kind, snap.tag, snap.epoch, snap.start, snap.stop, snap.payload[:-9])
    with pytest.raises(CheckpointError):
        decode_dynamic(truncated)
    mislabelled = Snapshot(7, snap.kind, snap.tag, snap.epoch, snap.start, snap.stop, snap.payload)
    with pytest.raises(CheckpointError):
        decode_dynamic(mislabelled)


def test_relabel_keeps_content_and_identity(make_run):
    run = make_run(processes=2, n=3)
    snap = encode_dynamic(1, 2, 0, run.state.local(1))
    moved = snap.relabel(owner=9, epoch=3)
    assert moved.owner == 9 and moved.epoch == 3
    assert moved.identity == snap.identity
    assert moved.payload_bytes == snap.payload_bytes
    assert np.array_equal(decode_dynamic(moved).x_seed, decode_dynamic(snap).x_seed)


# -----------------------------------------------------------------------------
# Stores
# -----------------------------------------------------------------------------


def _snap(owner: int, tag: int, kind: SnapshotKind = SnapshotKind.DYNAMIC) -> Snapshot:
    return Snapshot(owner, kind, tag, 0, 0, 1, b"payload")


def test_store_keeps_two_dynamic_tags_per_owner():
    store = BackupStore(host=0)
    for tag in (0, 1, 2):
        store.commit(_snap(0, tag))
    assert store.get(0, SnapshotKind.DYNAMIC, 0) is None
    assert store.get(0, SnapshotKind.DYNAMIC, 1) is not None
    assert store.max_tag(0) == 2


def test_store_rejects_non_increasing_tags():
    store = BackupStore(host=0)
    store.commit(_snap(1, 3))
    with pytest.raises(CheckpointError):
        store.commit(_snap(1, 3))
    with pytest.raises(CheckpointError):
        store.commit(_snap(1, 2))


def test_store_purge_and_replace():
    store = BackupStore(host=0)
    store.commit(_snap(0, 1))
    store.commit(_snap(0, 2))
    store.commit(_snap(1, 2, SnapshotKind.STATIC))
    assert store.purge_newer(1) == 1
    assert store.max_tag(0) == 1
    store.replace(_snap(0, 5))
    assert store.max_tag(0) == 5
    assert store.hosted_owners() == {1}
    store.drop_owner(1)
    assert store.owners() == {0}


# -----------------------------------------------------------------------------
# Coordinated checkpoints
# -----------------------------------------------------------------------------


def test_dynamic_checkpoint_costs_barrier_plus_overlapping_transfers(make_run):
    run = make_run(processes=4, n=4, cores_per_node=2)
    world, comm = run.world, run.comm
    before = world.clock.buckets["check"]
    result = checkpoint_dynamic(world, comm, run.state, tag=0, redundancy=1)

    transfers = [(pid, comm.members[(rank + 1) % 4], result.payload_bytes[pid]) for rank, pid in enumerate(comm.members)]
    expected = world.collective_cost(comm.members, 8.0) + world.phase_cost(transfers)
    assert result.cost == pytest.approx(expected)
    assert world.clock.buckets["check"] - before == pytest.approx(result.cost)
    assert result.bytes_sent == sum(result.payload_bytes.values())
    for rank, pid in enumerate(comm.members):
        store = store_of(world, pid)
        assert store.owners() == {pid, comm.members[(rank - 1) % 4]}


def test_single_process_checkpoint_stays_local(make_run):
    run = make_run(processes=1, n=3, cores_per_node=1)
    result = checkpoint_dynamic(run.world, run.comm, run.state, tag=0)
    assert result.bytes_sent == 0
    assert result.cost == 0.0
    assert store_of(run.world, 0).max_tag(0) == 0


def test_redundancy_two_puts_copies_on_two_successors(make_run):
    run = make_run(processes=4, n=3)
    checkpoint_static(run.world, run.comm, run.a, run.b, redundancy=2)
    assert store_of(run.world, 0).hosted_owners() == {2, 3}
    assert store_of(run.world, 3).hosted_owners() == {1, 2}


def test_failed_checkpoint_commits_nothing(make_run):
    run = make_run(processes=4, n=3)
    world = run.world
    checkpoint_dynamic(world, run.comm, run.state, tag=0)
    world.inject_failure(2)
    with pytest.raises(ProcFailed):
        checkpoint_dynamic(world, run.comm, run.state, tag=1)
    for pid in (0, 1, 3):
        assert store_of(world, pid).max_tag(pid) == 0


def test_latest_consistent_tag_is_newest_tag_everyone_has(make_run):
    run = make_run(processes=4, n=3)
    world = run.world
    for tag in (0, 1):
        checkpoint_dynamic(world, run.comm, run.state, tag=tag)
    # one survivor got ahead on its own
    store_of(world, 0).commit(encode_dynamic(0, 2, 0, run.state.local(0)))
    world.inject_failure(3)
    survivors = shrink_comm(world, run.comm, frozenset({3}))
    assert latest_consistent_tag(world, survivors, {3}) == 1
    assert world.clock.buckets["recover"] > 0


def test_latest_consistent_tag_without_backup_is_unrecoverable(make_run):
    run = make_run(processes=4, n=3)
    world = run.world
    checkpoint_dynamic(world, run.comm, run.state, tag=0)
    world.inject_failure(1)
    world.inject_failure(2)
    survivors = shrink_comm(world, run.comm, frozenset({1, 2}))
    with pytest.raises(UnrecoverableError) as exc:
        latest_consistent_tag(world, survivors, {1, 2})
    assert exc.value.lost_owners == (1,)


def test_fetch_backup_prefers_the_same_node_host(make_run):
    run = make_run(processes=4, n=3, cores_per_node=2)
    world = run.world
    checkpoint_dynamic(world, run.comm, run.state, tag=0, redundancy=2)
    # owner 0 is hosted by 1 (node 0) and 2 (node 1); requester 3 sits on node 1
    snap, cost = fetch_backup(world, run.comm, requester=3, owner=0, kind=SnapshotKind.DYNAMIC, tag=0)
    assert snap.owner == 0
    expected = world.latency.p2p_cost(True, snap.payload_bytes)
    assert cost == pytest.approx(expected)
    # requester 3 already hosts owner 2: local read, free
    snap, cost = fetch_backup(world, run.comm, requester=3, owner=2, kind=SnapshotKind.DYNAMIC, tag=0)
    assert cost == 0.0


def test_refresh_restores_buddy_copies_after_shrink(make_run):
    run = make_run(processes=4, n=3)
    world = run.world
    checkpoint_static(world, run.comm, run.a, run.b)
    checkpoint_dynamic(world, run.comm, run.state, tag=0)
    world.inject_failure(1)
    comm = shrink_comm(world, run.comm, frozenset({1}))
    result = refresh_backups(world, comm, redundancy=1)
    # 0 now backs up to 2: static + dynamic
    assert result.messages == 2
    assert store_of(world, 2).hosted_owners() == {0}
    assert store_of(world, 0).hosted_owners() == {3}
    assert refresh_backups(world, comm).messages == 0


def test_dump_stores_marks_failed_processes(make_run):
    run = make_run(processes=2, n=3)
    checkpoint_dynamic(run.world, run.comm, run.state, tag=0)
    run.world.inject_failure(1)
    dumped = dump_stores(run.world)
    assert dumped["1"]["status"] == "failed"
    assert dumped["0"]["dynamic"]["0"][0]["tag"] == 0


# -----------------------------------------------------------------------------
# Cadence
# -----------------------------------------------------------------------------


@pytest.mark.parametrize("cost,mttf,expected", [(2.0, 100.0, 20.0), (0.5, 3600.0, 60.0)])
def test_optimal_interval(cost, mttf, expected):
    assert math.isclose(optimal_interval(cost, mttf), expected, abs_tol=1e-12)


def test_optimal_interval_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        optimal_interval(1.0, 0.0)
    with pytest.raises(ConfigError):
        optimal_interval(-1.0, 10.0)


def test_fixed_interval_cadence():
    policy = CheckpointPolicy(k=3)
    assert policy.cadence == 3
    assert [t for t in range(1, 10) if policy.should_checkpoint(t)] == [3, 6, 9]


def test_young_cadence_is_calibrated_from_measurements():
    policy = CheckpointPolicy(mode=CheckpointMode.YOUNG, mttf_s=3600.0)
    assert policy.cadence is None
    assert policy.should_checkpoint(1)
    assert policy.calibrate(measured_checkpoint_s=0.5, iteration_s=7.0) == 9
    assert policy.cadence == 9
    # fixed once calibrated
    assert policy.calibrate(measured_checkpoint_s=50.0, iteration_s=1.0) == 9


def test_young_cadence_prefers_configured_cost():
    policy = CheckpointPolicy(mode=CheckpointMode.YOUNG, mttf_s=100.0, checkpoint_cost_s=2.0)
    assert policy.calibrate(measured_checkpoint_s=1e-6, iteration_s=4.0) == 5


def test_disabled_policy_never_checkpoints():
    policy = CheckpointPolicy(mode=CheckpointMode.DISABLED)
    assert not policy.enabled
    assert not policy.should_checkpoint(1)


def test_young_requires_mttf():
    with pytest.raises(ValidationError):
        CheckpointPolicy(mode=CheckpointMode.YOUNG)
