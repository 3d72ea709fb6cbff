"""
Failure detection, propagation and communicator shrink.

Detection is reactive: some operation raised ProcFailed, the observers' notices
travel through the event queue, every survivor probes its ring successors
(timeout), then one consensus round agrees on the union. The union is
order-independent, so any delivery order yields the same agreed set.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.simcore.errors import ProcFailed, UnrecoverableError
from src.simcore.world import CommEpoch, World

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionResult:
    failed: frozenset[int]
    views: dict[int, frozenset[int]]
    cost: float


def _ring_suspects(world: World, comm: CommEpoch) -> list[tuple[int, int]]:
    """(observer, suspect) pairs from each survivor probing its successors."""
    pairs = []
    size = comm.size
    for i, pid in enumerate(comm.members):
        if not world.is_alive(pid):
            continue
        j = (i + 1) % size
        while j != i and not world.is_alive(comm.members[j]):
            pairs.append((pid, comm.members[j]))
            j = (j + 1) % size
    return pairs


def detect_and_propagate(
    world: World,
    comm: CommEpoch,
    observed: Optional[ProcFailed] = None,
    shuffle_seed: Optional[int] = None,
) -> DetectionResult:
    """
    Make every survivor agree on the failed set.

    `shuffle_seed` permutes the notice events (used to check that agreement
    does not depend on arrival order). Cost is the detection timeout (only
    when something failed) plus one consensus collective among survivors.
    """
    world.check_comm(comm)
    survivors = world.live_members(comm)
    if not survivors:
        raise UnrecoverableError("every process in the communicator failed", lost_owners=comm.members)

    notices: list[tuple[int, int]] = []
    if observed is not None:
        notices.extend((o, f) for o in observed.observers if world.is_alive(o) for f in sorted(observed.failed))
    notices.extend(_ring_suspects(world, comm))
    if shuffle_seed is not None and notices:
        order = np.random.default_rng(shuffle_seed).permutation(len(notices))
        notices = [notices[k] for k in order]

    for observer, suspect in notices:
        world.events.push(0.0, "notice", dst=observer, payload=suspect)
    local: dict[int, set[int]] = {pid: set() for pid in survivors}
    for ev in world.events.drain():
        local[ev.dst].add(ev.payload)

    agreed = frozenset().union(*local.values())
    with world.clock.accounting("detect"):
        cost = world.collective_cost(survivors, nbytes=math.ceil(comm.size / 8))
        if agreed:
            cost += world.config.detection_timeout_s
        world.clock.advance(cost)
    world.trace.append((world.clock.now, "detect", tuple(sorted(agreed))))
    if agreed:
        logger.info("Failure agreed on epoch %s: %s (cost %.6fs)", comm.epoch, sorted(agreed), cost)
    return DetectionResult(failed=agreed, views={pid: agreed for pid in survivors}, cost=cost)


def proactive_check(world: World, comm: CommEpoch) -> float:
    """Barrier placed only to surface failures early; charged to detection."""
    with world.clock.accounting("detect"):
        return world.collective(comm, "barrier").cost


def shrink_comm(world: World, comm: CommEpoch, failed: frozenset[int]) -> CommEpoch:
    """Drop failed members, keeping survivors in their original order."""
    world.check_comm(comm)
    survivors = [p for p in comm.members if p not in failed]
    if not survivors:
        raise UnrecoverableError("no survivors left to shrink onto", lost_owners=comm.members)
    with world.clock.accounting("reconfig"):
        world.clock.advance(world.collective_cost(survivors, nbytes=math.ceil(comm.size / 8)))
    new = world.install(survivors, comm.failed_set | failed)
    logger.info("Communicator shrunk: epoch %s -> %s, size %s -> %s", comm.epoch, new.epoch, comm.size, new.size)
    return new
