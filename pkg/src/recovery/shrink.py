"""
Shrink recovery: the survivors take over the failed ranks' rows.

Every survivor rebuilds its new block (matrix rows, rhs rows and its slice of
the tag-t solver state) from checkpoint copies: its own, the backups it
hosts, and pieces shipped by other survivors according to the plan.
"""

import logging
from collections.abc import Collection
from typing import Optional

from src.checkpoint.buddy import BuddyMap
from src.checkpoint.coordinator import refresh_backups
from src.checkpoint.snapshot import SnapshotKind, decode_dynamic, decode_static, encode_dynamic, encode_static
from src.checkpoint.store import store_of
from src.recovery.distribution import BlockDistribution
from src.recovery.planner import TransferPlan, plan_shrink_transfers
from src.recovery.report import CostMeter, RecoveryReport, RestoredWorkload
from src.simcore.errors import ConfigError, UnrecoverableError
from src.simcore.world import CommEpoch, Message, World
from src.solver.distributed import FLOAT_BYTES, INDEX_BYTES, DistSparseMatrix, DistVector, announce_imports
from src.solver.state import LocalDynamic, LocalStatic, SolverState

logger = logging.getLogger(__name__)


def backup_view(world: World, pids: Collection[int]) -> dict[int, set[int]]:
    """Owners whose checkpoints each live process in `pids` hosts."""
    return {pid: store_of(world, pid).hosted_owners() for pid in pids if world.is_alive(pid)}


def _piece_bytes(static: LocalStatic, dynamic: LocalDynamic) -> int:
    rows = static.stop - static.start
    nnz = static.indices.size
    return rows * (INDEX_BYTES + FLOAT_BYTES) + nnz * (INDEX_BYTES + FLOAT_BYTES) + rows * FLOAT_BYTES * len(dynamic.vectors)


class _SourceCache:
    """Decoded checkpoints, read from the memory of the process that holds them."""

    def __init__(self, world: World, tag: int) -> None:
        self.world = world
        self.tag = tag
        self._static: dict[tuple[int, int], LocalStatic] = {}
        self._dynamic: dict[tuple[int, int], LocalDynamic] = {}

    def static(self, host: int, owner: int) -> LocalStatic:
        key = (host, owner)
        if key not in self._static:
            snap = store_of(self.world, host).get(owner, SnapshotKind.STATIC)
            if snap is None:
                raise UnrecoverableError(f"process {host} lost the static checkpoint of {owner}", lost_owners=[owner])
            self._static[key] = decode_static(snap)
        return self._static[key]

    def dynamic(self, host: int, owner: int) -> LocalDynamic:
        key = (host, owner)
        if key not in self._dynamic:
            snap = store_of(self.world, host).get(owner, SnapshotKind.DYNAMIC, self.tag)
            if snap is None:
                raise UnrecoverableError(
                    f"process {host} holds no tag-{self.tag} checkpoint of {owner}", lost_owners=[owner]
                )
            self._dynamic[key] = decode_dynamic(snap)
        return self._dynamic[key]


def execute_shrink(
    world: World,
    comm: CommEpoch,
    plan: TransferPlan,
    tag: int,
    redundancy: int = 1,
    buddy_map: Optional[BuddyMap] = None,
) -> tuple[RecoveryReport, RestoredWorkload]:
    """
    Move rows per `plan` onto the shrunk communicator `comm`, rebuild the
    halo pattern, re-checkpoint locally under the new layout and refresh the
    buddy copies.
    """
    world.check_comm(comm)
    if tuple(comm.members) != plan.new_members:
        raise ConfigError("plan was made for a different survivor set")
    meter = CostMeter(world.clock)
    cache = _SourceCache(world, tag)
    scalars = cache.dynamic(comm.members[0], comm.members[0]).scalars

    local_pieces: dict[int, list[tuple[LocalStatic, LocalDynamic]]] = {}
    for new_rank, pid in enumerate(comm.members):
        lo, hi = plan.kept_range(new_rank)
        if lo < hi:
            local_pieces.setdefault(new_rank, []).append(
                (cache.static(pid, pid).rows(lo, hi), cache.dynamic(pid, pid).rows(lo, hi))
            )

    messages = []
    for t in plan.transfers:
        piece = (
            cache.static(t.source.host, t.source.owner).rows(t.start, t.stop),
            cache.dynamic(t.source.host, t.source.owner).rows(t.start, t.stop),
        )
        if t.source.host == comm.members[t.destination]:
            local_pieces.setdefault(t.destination, []).append(piece)
        else:
            messages.append(
                Message(
                    src=comm.rank_of(t.source.host),
                    dst=t.destination,
                    nbytes=_piece_bytes(*piece),
                    payload=piece,
                )
            )
    with world.clock.accounting("recover"):
        moved = world.exchange(comm, messages)
    for dst, received in moved.deliveries.items():
        local_pieces.setdefault(dst, []).extend(piece for _, piece in received)

    statics, dynamics = [], []
    for new_rank in range(comm.size):
        start, stop = plan.new.range_of(new_rank)
        pieces = local_pieces.get(new_rank, [])
        statics.append(LocalStatic.concat([s for s, _ in pieces], start, stop))
        dynamics.append(LocalDynamic.concat([d for _, d in pieces], start, stop, scalars.copy()))

    a = DistSparseMatrix.from_local_rows(plan.new, [(s.indptr, s.indices, s.data) for s in statics])
    b = DistVector(plan.new, [s.rhs for s in statics])
    with world.clock.accounting("reconfig"):
        announce_imports(world, comm, a)
    state = SolverState.from_local(plan.new, dynamics)

    for new_rank, pid in enumerate(comm.members):
        own = store_of(world, pid)
        own.replace(encode_static(pid, tag, comm.epoch, statics[new_rank]))
        own.replace(encode_dynamic(pid, tag, comm.epoch, dynamics[new_rank]))
    refreshed = refresh_backups(world, comm, redundancy, buddy_map)

    report = RecoveryReport(
        strategy="shrink",
        failed=tuple(pid for pid in plan.old_members if pid not in plan.new_members),
        tag=tag,
        epoch=comm.epoch,
        t_pfr=meter.delta("reconfig"),
        t_pfx=meter.delta("recover"),
        bytes_moved=moved.bytes_moved + refreshed.bytes_moved,
    )
    logger.info(
        "Shrink to %s ranks at tag %s: %s row runs moved (%.0f bytes), sizes %s",
        comm.size,
        tag,
        len(messages),
        moved.bytes_moved,
        plan.new.sizes,
    )
    return report, RestoredWorkload(a=a, b=b, state=state)


def shrink_recover(
    world: World,
    comm: CommEpoch,
    old_dist: BlockDistribution,
    old_members: tuple[int, ...],
    failed: Collection[int],
    tag: int,
    redundancy: int = 1,
) -> tuple[RecoveryReport, RestoredWorkload]:
    """Plan and execute a shrink onto `comm` (already shrunk, survivors only)."""
    failed_ranks = {old_members.index(pid) for pid in failed}
    plan = plan_shrink_transfers(old_dist, old_members, failed_ranks, backup_view(world, comm.members))
    return execute_shrink(world, comm, plan, tag, redundancy)
