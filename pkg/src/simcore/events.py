"""
Deterministic event queue.

Events are ordered by (time, sequence number); the sequence number breaks ties
in insertion order so two runs with the same inputs pop the same sequence.
"""

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any


@dataclass(order=True)
class Event:
    time: float
    seq: int
    kind: str = field(compare=False)
    src: int = field(compare=False, default=-1)
    dst: int = field(compare=False, default=-1)
    payload: Any = field(compare=False, default=None)


class EventQueue:
    """Min-heap of events with stable tie-breaking."""

    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._counter = itertools.count()

    def push(self, time: float, kind: str, src: int = -1, dst: int = -1, payload: Any = None) -> Event:
        ev = Event(time=time, seq=next(self._counter), kind=kind, src=src, dst=dst, payload=payload)
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def drain(self) -> list[Event]:
        """Pop every pending event in order."""
        out = []
        while self._heap:
            out.append(self.pop())
        return out

    def __len__(self) -> int:
        return len(self._heap)
