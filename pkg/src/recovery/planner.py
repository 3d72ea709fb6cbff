"""
Shrink redistribution planner.

Given the old distribution, the failed ranks and who hosts which backups,
decide where every row of every survivor's new range comes from. Pure
function; nothing is moved here.
"""

from collections.abc import Collection, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

from src.recovery.distribution import BlockDistribution
from src.simcore.errors import ConfigError, UnrecoverableError


class SourceKind(str, Enum):
    LOCAL_MEMORY = "local_memory"
    BACKUP = "backup"


@dataclass(frozen=True)
class RowSource:
    """Rows come from `owner`'s checkpoint, read in the memory of process `host`."""

    kind: SourceKind
    owner: int
    host: int


@dataclass(frozen=True)
class Transfer:
    start: int
    stop: int
    source: RowSource
    destination: int

    @property
    def rows(self) -> int:
        return self.stop - self.start


@dataclass
class TransferPlan:
    old: BlockDistribution
    new: BlockDistribution
    old_members: tuple[int, ...]
    new_members: tuple[int, ...]
    transfers: list[Transfer] = field(default_factory=list)

    def incoming(self, new_rank: int) -> list[Transfer]:
        return [t for t in self.transfers if t.destination == new_rank]

    def remote(self) -> list[Transfer]:
        """Transfers whose rows are not already in the destination's memory."""
        return [t for t in self.transfers if t.source.host != self.new_members[t.destination]]

    def kept_range(self, new_rank: int) -> tuple[int, int]:
        """Rows the destination keeps from its own old range."""
        pid = self.new_members[new_rank]
        a, b = self.old.range_of(self.old_members.index(pid))
        c, d = self.new.range_of(new_rank)
        lo, hi = max(a, c), min(b, d)
        return (lo, hi) if lo < hi else (c, c)


def _subtract(span: tuple[int, int], hole: tuple[int, int]) -> list[tuple[int, int]]:
    (a, b), (c, d) = span, hole
    if d <= a or c >= b or c >= d:
        return [span] if a < b else []
    out = []
    if a < c:
        out.append((a, c))
    if d < b:
        out.append((d, b))
    return out


def plan_shrink_transfers(
    old: BlockDistribution,
    old_members: Sequence[int],
    failed: Collection[int],
    backups: Mapping[int, Collection[int]],
) -> TransferPlan:
    """
    Plan a shrink from `old` (over `old_members`, process ids) once the old
    ranks in `failed` are gone.

    `backups` maps each surviving host to the owners whose checkpoints it
    holds. Every needed run is sourced, in order of preference, from a backup
    the destination already hosts, from the surviving old owner's memory, or
    from the lowest surviving host of the failed owner's backup.
    """
    if len(old_members) != old.parts:
        raise ConfigError(f"{len(old_members)} members for a {old.parts}-way distribution")
    failed = set(failed)
    if any(f < 0 or f >= old.parts for f in failed):
        raise ConfigError(f"failed ranks {sorted(failed)} outside 0..{old.parts - 1}")
    survivors = [pid for rank, pid in enumerate(old_members) if rank not in failed]
    if not survivors:
        raise UnrecoverableError("no survivors to redistribute onto", lost_owners=old_members)
    new = BlockDistribution.canonical(old.rows, len(survivors))
    plan = TransferPlan(old=old, new=new, old_members=tuple(old_members), new_members=tuple(survivors))

    lost: dict[int, list[tuple[int, int]]] = {}
    for new_rank, pid in enumerate(survivors):
        old_rank = old_members.index(pid)
        hosted = backups.get(pid, ())
        for lo, hi in _subtract(new.range_of(new_rank), old.range_of(old_rank)):
            for owner_rank, a, b in old.overlapping(lo, hi):
                owner = old_members[owner_rank]
                if owner in hosted:
                    source = RowSource(SourceKind.BACKUP, owner, pid)
                elif owner_rank not in failed:
                    source = RowSource(SourceKind.LOCAL_MEMORY, owner, owner)
                else:
                    hosts = sorted(h for h, owners in backups.items() if owner in owners and h in survivors)
                    if not hosts:
                        lost.setdefault(owner, []).append((a, b))
                        continue
                    source = RowSource(SourceKind.BACKUP, owner, hosts[0])
                plan.transfers.append(Transfer(a, b, source, new_rank))
    if lost:
        rows = [r for runs in lost.values() for r in runs]
        raise UnrecoverableError("rows of failed processes have no surviving backup", lost_owners=lost, lost_rows=rows)
    return plan
