"""Buddy assignment: which processes hold a copy of each rank's checkpoints."""

from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

from src.simcore.errors import ConfigError
from src.simcore.world import CommEpoch


def buddy_set(rank: int, r: int, p: int) -> set[int]:
    """Ring successors {(rank+1) mod P, ..., (rank+r) mod P}, never the rank itself."""
    if p < 1 or r < 1:
        raise ConfigError("buddy_set needs P >= 1 and r >= 1")
    return {(rank + k) % p for k in range(1, min(r, p - 1) + 1)}


BuddyRule = Callable[[int, int, int], set[int]]


@dataclass(frozen=True)
class BuddyMap:
    """Buddy sets over one epoch's membership, expressed in process ids."""

    redundancy: int
    epoch: int
    hosts: dict[int, tuple[int, ...]]

    @classmethod
    def for_comm(cls, comm: CommEpoch, redundancy: int, rule: Optional[BuddyRule] = None) -> "BuddyMap":
        rule = rule or buddy_set
        hosts = {}
        for rank, pid in enumerate(comm.members):
            buddies = rule(rank, redundancy, comm.size)
            if rank in buddies:
                raise ConfigError(f"buddy rule assigned rank {rank} to itself")
            hosts[pid] = tuple(comm.members[b] for b in sorted(buddies))
        return cls(redundancy=redundancy, epoch=comm.epoch, hosts=hosts)

    def buddies_of(self, pid: int) -> tuple[int, ...]:
        return self.hosts.get(pid, ())

    def owners_hosted_by(self, pid: int) -> list[int]:
        return [owner for owner, hs in self.hosts.items() if pid in hs]
