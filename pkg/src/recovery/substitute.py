"""
Substitute recovery: warm spares take over the failed ranks' slots.

The distribution and every survivor's rows stay put; survivors roll back to
their own tag-t snapshot, each spare pulls the failed owner's Static and
Dynamic snapshots from the nearest buddy and then adopts the replicated
scalars broadcast by a survivor.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from typing import Optional

from src.checkpoint.buddy import BuddyMap
from src.checkpoint.coordinator import fetch_backups, refresh_backups
from src.checkpoint.snapshot import SnapshotKind, decode_dynamic, decode_static
from src.checkpoint.store import store_of
from src.recovery.report import CostMeter, RecoveryReport, RestoredWorkload
from src.simcore.errors import ConfigError, UnrecoverableError
from src.simcore.world import CommEpoch, World
from src.solver.distributed import DistSparseMatrix, DistVector
from src.solver.state import LocalDynamic, ReplicatedScalars, SolverState

logger = logging.getLogger(__name__)


def stitch_spare(world: World, comm: CommEpoch, layout: Sequence[int], failed: int, spare: int) -> CommEpoch:
    """
    Put `spare` into `failed`'s slot of `layout` (the pre-failure membership).

    Slots of other failed processes that are not stitched yet stay out of the
    new epoch; the spare becomes Active. One collective over the new members
    is charged to reconfiguration.
    """
    world.check_comm(comm)
    if failed not in layout:
        raise ConfigError(f"process {failed} has no slot in {tuple(layout)}")
    if spare not in world.spare_pool():
        raise UnrecoverableError(f"process {spare} is not an idle spare", lost_owners=[failed])
    present = set(comm.members)
    members = [spare if pid == failed else pid for pid in layout if pid in present or pid == failed]
    world.activate_spare(spare)
    with world.clock.accounting("reconfig"):
        world.clock.advance(world.collective_cost(members, nbytes=math.ceil(len(members) / 8)))
    new = world.install(members, comm.failed_set | {failed})
    logger.info("Spare %s stitched into the slot of %s (epoch %s)", spare, failed, new.epoch)
    return new


def stitch_spares(world: World, comm: CommEpoch, layout: Sequence[int], failed: Sequence[int]) -> tuple[CommEpoch, dict[int, int]]:
    """Stitch one spare per failed slot: spares in id order, slots in rank order."""
    if not failed:
        raise ConfigError("nothing to stitch: no failed processes")
    pool = world.spare_pool()
    ordered = sorted(failed, key=list(layout).index)
    if len(pool) < len(ordered):
        raise UnrecoverableError(
            f"{len(ordered)} failed processes but only {len(pool)} spares left", lost_owners=ordered
        )
    assignment = {}
    for f, spare in zip(ordered, pool):
        comm = stitch_spare(world, comm, layout, f, spare)
        layout = [spare if pid == f else pid for pid in layout]
        assignment[f] = spare
    return comm, assignment


def sync_local_state(world: World, comm: CommEpoch, scalars: Sequence[ReplicatedScalars], source: int = 0) -> ReplicatedScalars:
    """
    Broadcast the replicated scalars of comm rank `source` so every rank,
    spares included, resumes at the same outer iteration.
    """
    chosen = scalars[source]
    nbytes = 8 * (chosen.H.size + chosen.cs.size + chosen.sn.size + chosen.g.size + len(chosen.residual_history) + 8)
    with world.clock.accounting("recover"):
        value = world.collective(comm, "broadcast", list(scalars), nbytes=nbytes, root=source).value
    return value.copy()


def execute_substitute(
    world: World,
    comm: CommEpoch,
    assignment: Mapping[int, int],
    tag: int,
    a: DistSparseMatrix,
    redundancy: int = 1,
    buddy_map: Optional[BuddyMap] = None,
) -> tuple[RecoveryReport, RestoredWorkload]:
    """
    Restore the tag-t state on the stitched communicator `comm`.

    `assignment` maps failed process -> spare now in its slot. The import
    pattern of `a` is reused; only the substituted ranks' blocks are rebuilt.
    """
    world.check_comm(comm)
    if comm.size != a.dist.parts:
        raise ConfigError("substitute must keep the communicator size")
    meter = CostMeter(world.clock)
    spares = set(assignment.values())

    requests = [
        (spare, failed, kind)
        for failed, spare in sorted(assignment.items())
        for kind in (SnapshotKind.STATIC, SnapshotKind.DYNAMIC)
    ]
    fetched, transfer = fetch_backups(world, comm, requests, tag)
    by_request = dict(zip(requests, fetched))

    shares: list[LocalDynamic] = []
    rows = [a.local_rows(rank) for rank in range(comm.size)]
    rhs = [None] * comm.size
    for rank, pid in enumerate(comm.members):
        own = store_of(world, pid)
        if pid in spares:
            failed = next(f for f, s in assignment.items() if s == pid)
            static_snap = by_request[(pid, failed, SnapshotKind.STATIC)]
            dynamic_snap = by_request[(pid, failed, SnapshotKind.DYNAMIC)]
            own.replace(static_snap.relabel(pid, comm.epoch))
            own.replace(dynamic_snap.relabel(pid, comm.epoch))
            static = decode_static(static_snap)
            rows[rank] = (static.indptr, static.indices, static.data)
            rhs[rank] = static.rhs
        else:
            static = decode_static(own.get(pid, SnapshotKind.STATIC))
            rhs[rank] = static.rhs
            dynamic_snap = own.get(pid, SnapshotKind.DYNAMIC, tag)
        if dynamic_snap is None:
            raise UnrecoverableError(f"process {pid} has no tag-{tag} checkpoint", lost_owners=[pid])
        shares.append(decode_dynamic(dynamic_snap))

    source = next(rank for rank, pid in enumerate(comm.members) if pid not in spares)
    agreed = sync_local_state(world, comm, [s.scalars for s in shares], source=source)
    for share in shares:
        share.scalars = agreed.copy()

    rebuilt = DistSparseMatrix.from_local_rows(a.dist, rows)
    rebuilt.imports = a.imports
    b = DistVector(a.dist, rhs)
    state = SolverState.from_local(a.dist, shares)
    refreshed = refresh_backups(world, comm, redundancy, buddy_map)

    report = RecoveryReport(
        strategy="substitute",
        failed=tuple(sorted(assignment)),
        tag=tag,
        epoch=comm.epoch,
        t_pfr=meter.delta("reconfig"),
        t_pfx=meter.delta("recover"),
        bytes_moved=transfer.bytes_moved + refreshed.bytes_moved,
        spares=tuple(assignment[f] for f in sorted(assignment)),
    )
    logger.info(
        "Substitute at tag %s: spares %s restored (%.0f bytes fetched)",
        tag,
        dict(sorted(assignment.items())),
        transfer.bytes_moved,
    )
    return report, RestoredWorkload(a=rebuilt, b=b, state=state)
