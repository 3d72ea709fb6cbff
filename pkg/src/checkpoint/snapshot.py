"""
Snapshots and their wire format.

Layout (little-endian): a fixed header
    magic "BKCP" | version u16 | kind u8 | pad u8 | owner i64 | tag i64 | epoch i64 | start i64 | stop i64
followed by a kind-specific body of scalars and length-prefixed arrays
(u64 element count, then the raw '<f8' or '<i8' elements).
"""

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.simcore.errors import CheckpointError
from src.solver.state import LocalDynamic, LocalStatic, ReplicatedScalars

MAGIC = b"BKCP"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHBxqqqqq")
_DYN_SCALARS = struct.Struct("<qqqqd??xxxxxxd")
_COUNT = struct.Struct("<Q")


class SnapshotKind(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


_KIND_CODES = {SnapshotKind.STATIC: 0, SnapshotKind.DYNAMIC: 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class Snapshot:
    """One owner's checkpoint of one kind at one tag."""

    owner: int
    kind: SnapshotKind
    tag: int
    epoch: int
    start: int
    stop: int
    payload: bytes

    @property
    def payload_bytes(self) -> int:
        return len(self.payload)

    @property
    def identity(self) -> tuple[str, int, int, int]:
        """Content identity: two snapshots with equal identity hold the same data."""
        return (self.kind.value, self.tag, self.start, self.stop)

    def relabel(self, owner: int, epoch: int) -> "Snapshot":
        """Same content re-issued under a new owner (a substituted slot)."""
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, _KIND_CODES[self.kind], owner, self.tag, epoch, self.start, self.stop)
        return Snapshot(owner, self.kind, self.tag, epoch, self.start, self.stop, header + self.payload[_HEADER.size :])

    def describe(self) -> dict:
        return {
            "owner": self.owner,
            "kind": self.kind.value,
            "tag": self.tag,
            "epoch": self.epoch,
            "rows": [self.start, self.stop],
            "bytes": self.payload_bytes,
        }


def _pack(arr: np.ndarray, dtype: str) -> bytes:
    a = np.ascontiguousarray(arr, dtype=dtype)
    return _COUNT.pack(a.size) + a.tobytes()


class _Reader:
    def __init__(self, buf: bytes, offset: int) -> None:
        self.buf = buf
        self.pos = offset

    def unpack(self, st: struct.Struct) -> tuple:
        if self.pos + st.size > len(self.buf):
            raise CheckpointError("snapshot payload truncated")
        values = st.unpack_from(self.buf, self.pos)
        self.pos += st.size
        return values

    def array(self, dtype: str) -> np.ndarray:
        (count,) = self.unpack(_COUNT)
        width = np.dtype(dtype).itemsize
        end = self.pos + count * width
        if end > len(self.buf):
            raise CheckpointError("snapshot array truncated")
        a = np.frombuffer(self.buf, dtype=dtype, count=count, offset=self.pos).copy()
        self.pos = end
        return a.astype(dtype[1:])


def _header(owner: int, kind: SnapshotKind, tag: int, epoch: int, start: int, stop: int) -> bytes:
    return _HEADER.pack(MAGIC, FORMAT_VERSION, _KIND_CODES[kind], owner, tag, epoch, start, stop)


def encode_dynamic(owner: int, tag: int, epoch: int, share: LocalDynamic) -> Snapshot:
    s = share.scalars
    body = [
        _DYN_SCALARS.pack(s.outer_iteration, s.outer_cycle, s.j, s.m_outer, s.beta, s.converged, s.finished, s.relative_residual),
        _pack(s.H.ravel(), "<f8"),
        _pack(s.cs, "<f8"),
        _pack(s.sn, "<f8"),
        _pack(s.g, "<f8"),
        _pack(np.asarray(s.residual_history, dtype=np.float64), "<f8"),
        _pack(share.x_seed, "<f8"),
        _COUNT.pack(len(share.V)),
        *(_pack(v, "<f8") for v in share.V),
        _COUNT.pack(len(share.Z)),
        *(_pack(z, "<f8") for z in share.Z),
    ]
    payload = _header(owner, SnapshotKind.DYNAMIC, tag, epoch, share.start, share.stop) + b"".join(body)
    return Snapshot(owner, SnapshotKind.DYNAMIC, tag, epoch, share.start, share.stop, payload)


def encode_static(owner: int, tag: int, epoch: int, share: LocalStatic) -> Snapshot:
    body = [
        _pack(share.indptr, "<i8"),
        _pack(share.indices, "<i8"),
        _pack(share.data, "<f8"),
        _pack(share.rhs, "<f8"),
    ]
    payload = _header(owner, SnapshotKind.STATIC, tag, epoch, share.start, share.stop) + b"".join(body)
    return Snapshot(owner, SnapshotKind.STATIC, tag, epoch, share.start, share.stop, payload)


def _read_header(snap: Snapshot, expected: SnapshotKind) -> _Reader:
    if len(snap.payload) < _HEADER.size:
        raise CheckpointError("snapshot shorter than its header")
    magic, version, code, owner, tag, epoch, start, stop = _HEADER.unpack_from(snap.payload, 0)
    if magic != MAGIC:
        raise CheckpointError(f"bad snapshot magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported snapshot format version {version}")
    if _CODE_KINDS.get(code) != expected:
        raise CheckpointError(f"expected a {expected.value} snapshot, found code {code}")
    if (owner, tag, start, stop) != (snap.owner, snap.tag, snap.start, snap.stop):
        raise CheckpointError("snapshot header does not match its metadata")
    return _Reader(snap.payload, _HEADER.size)


def decode_dynamic(snap: Snapshot) -> LocalDynamic:
    r = _read_header(snap, SnapshotKind.DYNAMIC)
    outer_iteration, outer_cycle, j, m_outer, beta, converged, finished, rel = r.unpack(_DYN_SCALARS)
    scalars = ReplicatedScalars(
        outer_iteration=outer_iteration,
        outer_cycle=outer_cycle,
        j=j,
        beta=beta,
        H=r.array("<f8").reshape(m_outer + 1, m_outer),
        cs=r.array("<f8"),
        sn=r.array("<f8"),
        g=r.array("<f8"),
        residual_history=r.array("<f8").tolist(),
        converged=converged,
        finished=finished,
        relative_residual=rel,
    )
    x_seed = r.array("<f8")
    (nv,) = r.unpack(_COUNT)
    V = [r.array("<f8") for _ in range(nv)]
    (nz,) = r.unpack(_COUNT)
    Z = [r.array("<f8") for _ in range(nz)]
    return LocalDynamic(start=snap.start, stop=snap.stop, x_seed=x_seed, V=V, Z=Z, scalars=scalars)


def decode_static(snap: Snapshot) -> LocalStatic:
    r = _read_header(snap, SnapshotKind.STATIC)
    return LocalStatic(
        start=snap.start,
        stop=snap.stop,
        indptr=r.array("<i8"),
        indices=r.array("<i8"),
        data=r.array("<f8"),
        rhs=r.array("<f8"),
    )
