"""Contiguous block-row distributions."""

from dataclasses import dataclass

import numpy as np

from src.simcore.errors import ConfigError


@dataclass(frozen=True)
class BlockDistribution:
    """Row ranges [start, stop) per active rank, in rank order."""

    rows: int
    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        pos = 0
        for start, stop in self.ranges:
            if start != pos or stop < start:
                raise ConfigError(f"ranges {self.ranges} are not contiguous from 0")
            pos = stop
        if pos != self.rows:
            raise ConfigError(f"ranges cover [0,{pos}) but R={self.rows}")

    @classmethod
    def canonical(cls, rows: int, parts: int) -> "BlockDistribution":
        """First R mod P ranks get one extra row."""
        if parts < 1:
            raise ConfigError("a distribution needs at least one rank")
        if rows < 0:
            raise ConfigError("row count must be non-negative")
        q, rem = divmod(rows, parts)
        ranges = []
        start = 0
        for k in range(parts):
            stop = start + q + (1 if k < rem else 0)
            ranges.append((start, stop))
            start = stop
        return cls(rows, tuple(ranges))

    @property
    def parts(self) -> int:
        return len(self.ranges)

    @property
    def sizes(self) -> list[int]:
        return [stop - start for start, stop in self.ranges]

    @property
    def starts(self) -> np.ndarray:
        return np.array([start for start, _ in self.ranges], dtype=np.int64)

    def range_of(self, rank: int) -> tuple[int, int]:
        return self.ranges[rank]

    def size_of(self, rank: int) -> int:
        start, stop = self.ranges[rank]
        return stop - start

    def owners_of(self, cols: np.ndarray) -> np.ndarray:
        """Owning rank of every global index in `cols`."""
        stops = np.array([stop for _, stop in self.ranges], dtype=np.int64)
        return np.searchsorted(stops, cols, side="right")

    def overlapping(self, start: int, stop: int) -> list[tuple[int, int, int]]:
        """(rank, lo, hi) pieces of [start, stop) split by owner."""
        pieces = []
        for rank, (a, b) in enumerate(self.ranges):
            lo, hi = max(a, start), min(b, stop)
            if lo < hi:
                pieces.append((rank, lo, hi))
        return pieces


def canonical_distribution(rows: int, parts: int) -> BlockDistribution:
    return BlockDistribution.canonical(rows, parts)


def extra_rows_lower_bound(rows: int, parts: int) -> float:
    """R/(P-1) - R/P: what each survivor gains at least when one of P ranks fails."""
    if parts < 2:
        raise ConfigError("extra_rows_lower_bound needs P >= 2")
    return rows / (parts - 1) - rows / parts
