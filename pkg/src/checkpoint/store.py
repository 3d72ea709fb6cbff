"""Per-process backup stores living in simulated process memory."""

import logging
from typing import Any, Optional

from src.checkpoint.snapshot import Snapshot, SnapshotKind
from src.simcore.errors import CheckpointError
from src.simcore.world import World

logger = logging.getLogger(__name__)

DYNAMIC_HISTORY = 2
_MEMORY_KEY = "backups"


class BackupStore:
    """
    A process's own snapshots plus the copies it hosts for its buddies.

    Keeps the latest Static snapshot and the last two Dynamic snapshots per
    owner; Dynamic tags committed for one owner must strictly increase.
    """

    def __init__(self, host: int) -> None:
        self.host = host
        self.static: dict[int, Snapshot] = {}
        self.dynamic: dict[int, list[Snapshot]] = {}

    def commit(self, snap: Snapshot) -> None:
        if snap.kind == SnapshotKind.STATIC:
            self.static[snap.owner] = snap
            return
        history = self.dynamic.setdefault(snap.owner, [])
        if history and snap.tag <= history[-1].tag:
            raise CheckpointError(
                f"store {self.host}: tag {snap.tag} for owner {snap.owner} does not exceed {history[-1].tag}"
            )
        history.append(snap)
        del history[:-DYNAMIC_HISTORY]

    def replace(self, snap: Snapshot) -> None:
        """Install `snap` as the owner's only snapshot of its kind."""
        if snap.kind == SnapshotKind.STATIC:
            self.static[snap.owner] = snap
        else:
            self.dynamic[snap.owner] = [snap]

    def latest(self, owner: int, kind: SnapshotKind) -> Optional[Snapshot]:
        if kind == SnapshotKind.STATIC:
            return self.static.get(owner)
        history = self.dynamic.get(owner)
        return history[-1] if history else None

    def get(self, owner: int, kind: SnapshotKind, tag: Optional[int] = None) -> Optional[Snapshot]:
        if tag is None or kind == SnapshotKind.STATIC:
            return self.latest(owner, kind)
        for snap in self.dynamic.get(owner, []):
            if snap.tag == tag:
                return snap
        return None

    def max_tag(self, owner: int) -> Optional[int]:
        history = self.dynamic.get(owner)
        return history[-1].tag if history else None

    def has_identical(self, snap: Snapshot) -> bool:
        held = self.latest(snap.owner, snap.kind)
        return held is not None and held.identity == snap.identity

    def owners(self) -> set[int]:
        return set(self.static) | set(self.dynamic)

    def hosted_owners(self) -> set[int]:
        return self.owners() - {self.host}

    def drop_owner(self, owner: int) -> None:
        self.static.pop(owner, None)
        self.dynamic.pop(owner, None)

    def purge_newer(self, tag: int) -> int:
        """Drop Dynamic snapshots newer than `tag`; returns how many went."""
        dropped = 0
        for owner, history in self.dynamic.items():
            kept = [s for s in history if s.tag <= tag]
            dropped += len(history) - len(kept)
            self.dynamic[owner] = kept
        return dropped

    @property
    def total_bytes(self) -> int:
        return sum(s.payload_bytes for s in self.static.values()) + sum(
            s.payload_bytes for history in self.dynamic.values() for s in history
        )

    def describe(self) -> dict[str, Any]:
        return {
            "host": self.host,
            "static": {str(o): s.describe() for o, s in sorted(self.static.items())},
            "dynamic": {str(o): [s.describe() for s in h] for o, h in sorted(self.dynamic.items())},
            "total_bytes": self.total_bytes,
        }


def store_of(world: World, pid: int) -> BackupStore:
    """The store in `pid`'s memory, created on first use; raises for Failed processes."""
    memory = world.memory(pid)
    store = memory.get(_MEMORY_KEY)
    if store is None:
        store = memory[_MEMORY_KEY] = BackupStore(pid)
    return store


def dump_stores(world: World) -> dict[str, Any]:
    """JSON-ready view of every live process's store."""
    out: dict[str, Any] = {}
    for proc in world.processes:
        if not world.is_alive(proc.pid):
            out[str(proc.pid)] = {"host": proc.pid, "status": proc.status.value}
            continue
        entry = store_of(world, proc.pid).describe()
        entry["status"] = proc.status.value
        out[str(proc.pid)] = entry
    return out
