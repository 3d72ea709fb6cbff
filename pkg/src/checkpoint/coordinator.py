"""
Coordinated buddy checkpoints and the backup operations recovery relies on.

A checkpoint is two-phase: every rank stages its snapshot, a barrier makes
sure no messages are in flight, the copies are pushed to the buddies, and
only then does every store commit. A failure anywhere before the commit
aborts the whole checkpoint and the previous tag stays the latest.
"""

import logging
from collections.abc import Collection, Sequence
from dataclasses import dataclass, field
from typing import Optional

from src.checkpoint.buddy import BuddyMap
from src.checkpoint.snapshot import Snapshot, SnapshotKind, encode_dynamic, encode_static
from src.checkpoint.store import store_of
from src.simcore.errors import ProcFailed, UnrecoverableError
from src.simcore.world import CommEpoch, Message, World
from src.solver.distributed import DistSparseMatrix, DistVector
from src.solver.state import LocalStatic, SolverState

logger = logging.getLogger(__name__)


@dataclass
class CheckpointResult:
    kind: SnapshotKind
    tag: int
    epoch: int
    cost: float
    bytes_sent: float
    payload_bytes: dict[int, int] = field(default_factory=dict)

    @property
    def max_payload_bytes(self) -> int:
        return max(self.payload_bytes.values(), default=0)


@dataclass
class TransferResult:
    cost: float = 0.0
    bytes_moved: float = 0.0
    messages: int = 0


def _buddies(comm: CommEpoch, redundancy: int, buddy_map: Optional[BuddyMap]) -> BuddyMap:
    if buddy_map is not None and buddy_map.epoch == comm.epoch:
        return buddy_map
    return BuddyMap.for_comm(comm, redundancy)


def _coordinated(world: World, comm: CommEpoch, snaps: dict[int, Snapshot], buddies: BuddyMap) -> CheckpointResult:
    first = next(iter(snaps.values()))
    messages = [
        Message(src=comm.rank_of(owner), dst=comm.rank_of(host), nbytes=snap.payload_bytes, payload=snap)
        for owner, snap in snaps.items()
        for host in buddies.buddies_of(owner)
    ]
    start = world.clock.now
    with world.clock.accounting("check"):
        try:
            world.collective(comm, "barrier")
            exchanged = world.exchange(comm, messages)
        except ProcFailed as exc:
            logger.warning(
                "%s checkpoint at tag %s aborted: %s", first.kind.value, first.tag, sorted(exc.failed)
            )
            raise
    for owner, snap in snaps.items():
        store_of(world, owner).commit(snap)
    for dst, received in exchanged.deliveries.items():
        host = store_of(world, comm.members[dst])
        for _, snap in received:
            host.commit(snap)
    result = CheckpointResult(
        kind=first.kind,
        tag=first.tag,
        epoch=comm.epoch,
        cost=world.clock.now - start,
        bytes_sent=exchanged.bytes_moved,
        payload_bytes={owner: snap.payload_bytes for owner, snap in snaps.items()},
    )
    logger.debug(
        "%s checkpoint tag %s: %.0f bytes to buddies, cost %.6fs",
        result.kind.value,
        result.tag,
        result.bytes_sent,
        result.cost,
    )
    return result


def checkpoint_dynamic(
    world: World,
    comm: CommEpoch,
    state: SolverState,
    tag: int,
    redundancy: int = 1,
    buddy_map: Optional[BuddyMap] = None,
) -> CheckpointResult:
    """Snapshot every rank's share of the solver state under `tag`."""
    world.check_comm(comm)
    snaps = {pid: encode_dynamic(pid, tag, comm.epoch, state.local(rank)) for rank, pid in enumerate(comm.members)}
    return _coordinated(world, comm, snaps, _buddies(comm, redundancy, buddy_map))


def static_share(a: DistSparseMatrix, b: DistVector, rank: int) -> LocalStatic:
    start, stop = a.dist.range_of(rank)
    indptr, indices, data = a.local_rows(rank)
    return LocalStatic(start=start, stop=stop, indptr=indptr, indices=indices, data=data, rhs=b.parts[rank].copy())


def checkpoint_static(
    world: World,
    comm: CommEpoch,
    a: DistSparseMatrix,
    b: DistVector,
    redundancy: int = 1,
    buddy_map: Optional[BuddyMap] = None,
    tag: int = 0,
) -> CheckpointResult:
    """Snapshot every rank's matrix rows and rhs rows."""
    world.check_comm(comm)
    snaps = {pid: encode_static(pid, tag, comm.epoch, static_share(a, b, rank)) for rank, pid in enumerate(comm.members)}
    return _coordinated(world, comm, snaps, _buddies(comm, redundancy, buddy_map))


def latest_consistent_tag(world: World, comm: CommEpoch, failed: Collection[int] = ()) -> int:
    """
    Newest tag every survivor holds for itself and some survivor holds for
    every failed owner: min over members of their per-owner maxima, agreed
    with one allreduce. Charged to state recovery.
    """
    world.check_comm(comm)
    failed = sorted(failed)
    local = []
    for pid in comm.members:
        store = store_of(world, pid)
        maxima = [store.max_tag(pid)] + [store.max_tag(f) for f in failed if store.max_tag(f) is not None]
        if maxima[0] is None:
            raise UnrecoverableError(f"process {pid} holds no Dynamic checkpoint of its own", lost_owners=[pid])
        local.append(min(maxima))
    hosting = {f: [pid for pid in comm.members if store_of(world, pid).max_tag(f) is not None] for f in failed}
    lost = [f for f, hosts in hosting.items() if not hosts]
    if lost:
        raise UnrecoverableError("every copy of the failed processes' checkpoints is gone", lost_owners=lost)

    with world.clock.accounting("recover"):
        tag = world.collective(comm, "allreduce", local, op="min").value

    missing = [pid for pid in comm.members if store_of(world, pid).get(pid, SnapshotKind.DYNAMIC, tag) is None]
    missing += [
        f
        for f, hosts in hosting.items()
        if not any(store_of(world, h).get(f, SnapshotKind.DYNAMIC, tag) is not None for h in hosts)
    ]
    if missing:
        raise UnrecoverableError(f"no consistent checkpoint at tag {tag}", lost_owners=missing)
    logger.info("Agreed restart tag %s on epoch %s", tag, comm.epoch)
    return tag


def hosts_of(world: World, comm: CommEpoch, owner: int, kind: SnapshotKind, tag: Optional[int] = None) -> list[int]:
    """Live members whose store holds `owner`'s snapshot (at `tag` if given)."""
    return [
        pid
        for pid in comm.members
        if world.is_alive(pid) and store_of(world, pid).get(owner, kind, tag) is not None
    ]


def _nearest(world: World, requester: int, hosts: Sequence[int]) -> int:
    return min(hosts, key=lambda h: (world.latency.p2p_cost(world.node_map.same_node(h, requester), 0.0), h))


def fetch_backups(
    world: World,
    comm: CommEpoch,
    requests: Sequence[tuple[int, int, SnapshotKind]],
    tag: Optional[int] = None,
) -> tuple[list[Snapshot], TransferResult]:
    """
    Deliver (requester, owner, kind) snapshots in one concurrent phase, each
    from the nearest host (lowest latency, then lowest pid). A requester that
    already holds the copy reads it locally at no cost.
    """
    world.check_comm(comm)
    found: list[Optional[Snapshot]] = []
    messages = []
    for i, (requester, owner, kind) in enumerate(requests):
        want = tag if kind == SnapshotKind.DYNAMIC else None
        local = store_of(world, requester).get(owner, kind, want)
        if local is not None:
            found.append(local)
            continue
        hosts = hosts_of(world, comm, owner, kind, want)
        if not hosts:
            raise UnrecoverableError(
                f"no surviving copy of the {kind.value} checkpoint of process {owner}", lost_owners=[owner]
            )
        host = _nearest(world, requester, hosts)
        snap = store_of(world, host).get(owner, kind, want)
        found.append(None)
        messages.append(
            Message(src=comm.rank_of(host), dst=comm.rank_of(requester), nbytes=snap.payload_bytes, payload=(i, snap))
        )
    result = TransferResult()
    if messages:
        with world.clock.accounting("recover"):
            exchanged = world.exchange(comm, messages)
        for received in exchanged.deliveries.values():
            for _, (i, snap) in received:
                found[i] = snap
        result = TransferResult(cost=exchanged.cost, bytes_moved=exchanged.bytes_moved, messages=len(messages))
    return [s for s in found if s is not None], result


def fetch_backup(
    world: World,
    comm: CommEpoch,
    requester: int,
    owner: int,
    kind: SnapshotKind,
    tag: Optional[int] = None,
) -> tuple[Snapshot, float]:
    snaps, result = fetch_backups(world, comm, [(requester, owner, kind)], tag)
    return snaps[0], result.cost


def refresh_backups(
    world: World,
    comm: CommEpoch,
    redundancy: int = 1,
    buddy_map: Optional[BuddyMap] = None,
) -> TransferResult:
    """
    Re-establish r copies of every member's latest Static and Dynamic
    snapshots over the current epoch. Only hosts lacking an identical copy
    receive one; copies held by non-buddies are dropped.
    """
    world.check_comm(comm)
    buddies = _buddies(comm, redundancy, buddy_map)
    messages = []
    for owner in comm.members:
        own = store_of(world, owner)
        for kind in (SnapshotKind.STATIC, SnapshotKind.DYNAMIC):
            snap = own.latest(owner, kind)
            if snap is None:
                continue
            for host in buddies.buddies_of(owner):
                if not store_of(world, host).has_identical(snap):
                    messages.append(
                        Message(src=comm.rank_of(owner), dst=comm.rank_of(host), nbytes=snap.payload_bytes, payload=snap)
                    )
    result = TransferResult()
    if messages:
        with world.clock.accounting("recover"):
            exchanged = world.exchange(comm, messages)
        for dst, received in exchanged.deliveries.items():
            host = store_of(world, comm.members[dst])
            for _, snap in received:
                host.replace(snap)
        result = TransferResult(cost=exchanged.cost, bytes_moved=exchanged.bytes_moved, messages=len(messages))

    for host in comm.members:
        store = store_of(world, host)
        keep = set(buddies.owners_hosted_by(host)) | {host}
        for owner in store.owners() - keep:
            store.drop_owner(owner)
    if result.messages:
        logger.info(
            "Backups refreshed on epoch %s: %s messages, %.0f bytes", comm.epoch, result.messages, result.bytes_moved
        )
    return result
