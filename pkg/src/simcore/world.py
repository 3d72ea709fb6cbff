"""
Simulated message-passing world: processes, placement, epochs, clock and the
communication primitives every other layer goes through.

Ranks execute in lockstep under a single scheduler: each primitive below is
one phase of an SPMD program, validated against the current communicator
epoch, costed with the latency model and charged to the simulated clock.
No wall-clock time is ever used for metrics.
"""

import logging
import math
from collections import defaultdict
from collections.abc import Callable, Iterator, Mapping, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import ValidationError

from src.simcore.config import WorldConfig
from src.simcore.errors import ConfigError, FailedRankAccessError, ProcFailed, StaleEpochError
from src.simcore.events import EventQueue

logger = logging.getLogger(__name__)


class ProcessStatus(str, Enum):
    ACTIVE = "active"
    SPARE = "spare"
    FAILED = "failed"


_TRANSITIONS = {
    ProcessStatus.ACTIVE: {ProcessStatus.FAILED},
    ProcessStatus.SPARE: {ProcessStatus.ACTIVE, ProcessStatus.FAILED},
    ProcessStatus.FAILED: set(),
}


@dataclass(frozen=True)
class LatencyModel:
    """alpha-beta message model plus a log-tree collective model."""

    alpha_intra: float
    alpha_inter: float
    bandwidth: float
    tree_factor: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha_intra < 0 or self.alpha_inter < self.alpha_intra:
            raise ConfigError("latency model requires alpha_inter >= alpha_intra >= 0")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")

    def p2p_cost(self, same_node: bool, nbytes: float) -> float:
        alpha = self.alpha_intra if same_node else self.alpha_inter
        return alpha + nbytes / self.bandwidth

    def collective_cost(self, size: int, spans_nodes: bool, nbytes: float) -> float:
        if size <= 1:
            return 0.0
        rounds = math.ceil(math.log2(size))
        alpha = self.alpha_inter if spans_nodes else self.alpha_intra
        return self.tree_factor * rounds * (alpha + nbytes / self.bandwidth)


@dataclass(frozen=True)
class NodeMap:
    """Fixed process-to-node placement: processes fill nodes in id order."""

    cores_per_node: int
    placement: tuple[int, ...]

    @classmethod
    def fill(cls, total: int, cores_per_node: int) -> "NodeMap":
        if cores_per_node <= 0:
            raise ConfigError("cores_per_node must be positive")
        return cls(cores_per_node, tuple(pid // cores_per_node for pid in range(total)))

    def node_of(self, pid: int) -> int:
        return self.placement[pid]

    def same_node(self, a: int, b: int) -> bool:
        return self.placement[a] == self.placement[b]

    def nodes_of(self, pids: Sequence[int]) -> set[int]:
        return {self.placement[p] for p in pids}

    @property
    def node_count(self) -> int:
        return (max(self.placement) + 1) if self.placement else 0


@dataclass(frozen=True)
class CommEpoch:
    """One generation of the communicator: comm rank i is process members[i]."""

    epoch: int
    members: tuple[int, ...]
    failed_set: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if len(set(self.members)) != len(self.members):
            raise ConfigError(f"duplicate members in epoch {self.epoch}: {self.members}")

    @property
    def size(self) -> int:
        return len(self.members)

    def pid(self, rank: int) -> int:
        return self.members[rank]

    def rank_of(self, pid: int) -> int:
        try:
            return self.members.index(pid)
        except ValueError:
            raise ConfigError(f"process {pid} is not a member of epoch {self.epoch}") from None


CATEGORIES = ("useful", "check", "detect", "reconfig", "recover", "recompute")


class SimClock:
    """Simulated time with per-category accounting and per-process totals."""

    def __init__(self, n_processes: int) -> None:
        self.now = 0.0
        self.buckets: dict[str, float] = dict.fromkeys(CATEGORIES, 0.0)
        self.compute_time = [0.0] * n_processes
        self.comm_time = [0.0] * n_processes
        self._stack: list[str] = ["useful"]

    @property
    def category(self) -> str:
        return self._stack[-1]

    @contextmanager
    def accounting(self, category: str) -> Iterator[None]:
        """Charge every advance inside the block to `category` (innermost wins)."""
        if category not in self.buckets:
            raise ConfigError(f"unknown cost category {category!r}")
        self._stack.append(category)
        try:
            yield
        finally:
            self._stack.pop()

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("simulated time cannot go backwards")
        self.now += dt
        self.buckets[self.category] += dt
        return dt


@dataclass
class Message:
    """Point-to-point message between comm ranks of one epoch."""

    src: int
    dst: int
    nbytes: float
    payload: Any = None


@dataclass
class ExchangeResult:
    cost: float
    deliveries: dict[int, list[tuple[int, Any]]] = field(default_factory=dict)
    bytes_moved: float = 0.0


@dataclass
class CollectiveResult:
    value: Any
    cost: float


@dataclass
class VirtualProcess:
    pid: int
    node: int
    status: ProcessStatus
    memory: Optional[dict[str, Any]] = field(default_factory=dict)


_REDUCERS: Mapping[str, Callable[[Any, Any], Any]] = {
    "sum": lambda a, b: a + b,
    "min": lambda a, b: min(a, b),
    "max": lambda a, b: max(a, b),
    "or": lambda a, b: a | b,
}


class World:
    """P active processes plus S warm spares on a fixed node map."""

    def __init__(self, config: WorldConfig) -> None:
        self.config = config
        total = config.processes + config.spares
        self.node_map = NodeMap.fill(total, config.cores_per_node)
        self.latency = LatencyModel(
            alpha_intra=config.alpha_intra,
            alpha_inter=config.alpha_inter,
            bandwidth=config.bandwidth_bytes_per_s,
            tree_factor=config.collective_tree_factor,
        )
        self.processes = [
            VirtualProcess(
                pid=pid,
                node=self.node_map.node_of(pid),
                status=ProcessStatus.ACTIVE if pid < config.processes else ProcessStatus.SPARE,
            )
            for pid in range(total)
        ]
        self.clock = SimClock(total)
        self.epoch = 0
        self.comm = CommEpoch(0, tuple(range(config.processes)))
        self.rng = np.random.default_rng(config.seed)
        self.events = EventQueue()
        self.trace: list[tuple[Any, ...]] = []

    # ------------------------------------------------------------------
    # Process state
    # ------------------------------------------------------------------

    def status(self, pid: int) -> ProcessStatus:
        return self.processes[pid].status

    def is_alive(self, pid: int) -> bool:
        return self.processes[pid].status != ProcessStatus.FAILED

    def memory(self, pid: int) -> dict[str, Any]:
        """Process-local memory; reading a Failed process's memory is an error."""
        proc = self.processes[pid]
        if proc.status == ProcessStatus.FAILED or proc.memory is None:
            raise FailedRankAccessError(pid)
        return proc.memory

    def _transition(self, pid: int, new: ProcessStatus) -> None:
        proc = self.processes[pid]
        if new not in _TRANSITIONS[proc.status]:
            raise ConfigError(f"process {pid}: illegal transition {proc.status.value} -> {new.value}")
        proc.status = new

    def spare_pool(self) -> list[int]:
        return [p.pid for p in self.processes if p.status == ProcessStatus.SPARE]

    def activate_spare(self, pid: int) -> None:
        self._transition(pid, ProcessStatus.ACTIVE)

    def inject_failure(self, pid: int) -> None:
        """Kill a process: it stops, and everything in its memory is lost."""
        self._transition(pid, ProcessStatus.FAILED)
        self.processes[pid].memory = None
        self.trace.append((self.clock.now, "kill", pid))
        logger.info("Process %s killed at t=%.6f", pid, self.clock.now)

    # ------------------------------------------------------------------
    # Epochs
    # ------------------------------------------------------------------

    def check_comm(self, comm: CommEpoch) -> None:
        if comm.epoch != self.epoch:
            raise StaleEpochError(comm.epoch, self.epoch)

    def install(self, members: Sequence[int], failed: frozenset[int]) -> CommEpoch:
        """Create and install the next epoch (strictly increasing)."""
        self.epoch += 1
        self.comm = CommEpoch(self.epoch, tuple(members), frozenset(failed))
        self.trace.append((self.clock.now, "epoch", self.epoch, self.comm.members))
        return self.comm

    def dead_members(self, comm: CommEpoch) -> frozenset[int]:
        return frozenset(p for p in comm.members if not self.is_alive(p))

    def live_members(self, comm: CommEpoch) -> tuple[int, ...]:
        return tuple(p for p in comm.members if self.is_alive(p))

    def spans_nodes(self, pids: Sequence[int]) -> bool:
        return len(self.node_map.nodes_of(pids)) > 1

    # ------------------------------------------------------------------
    # Compute
    # ------------------------------------------------------------------

    def compute(self, comm: CommEpoch, flops: Sequence[float]) -> float:
        """Charge local work: the phase lasts as long as the busiest live rank."""
        self.check_comm(comm)
        rate = self.config.seconds_per_flop
        worst = 0.0
        for rank, f in enumerate(flops):
            pid = comm.members[rank]
            if not self.is_alive(pid):
                continue
            t = f * rate
            self.clock.compute_time[pid] += t
            worst = max(worst, t)
        return self.clock.advance(worst)

    # ------------------------------------------------------------------
    # Point-to-point
    # ------------------------------------------------------------------

    def p2p_transfer(self, comm: CommEpoch, src: int, dst: int, nbytes: float, payload: Any = None) -> float:
        """Send one message between comm ranks; returns its modeled cost."""
        return self.exchange(comm, [Message(src, dst, nbytes, payload)]).cost

    def _check_endpoints(self, comm: CommEpoch, messages: Sequence[Message]) -> None:
        dead: set[int] = set()
        observers: set[int] = set()
        for m in messages:
            a, b = comm.members[m.src], comm.members[m.dst]
            if not self.is_alive(a):
                dead.add(a)
                if self.is_alive(b):
                    observers.add(b)
            if not self.is_alive(b):
                dead.add(b)
                if self.is_alive(a):
                    observers.add(a)
        if dead:
            self.trace.append((self.clock.now, "proc_failed", tuple(sorted(dead))))
            raise ProcFailed(dead, sorted(observers))

    def phase_cost(self, transfers: Sequence[tuple[int, int, float]]) -> float:
        """
        Cost of a set of concurrent transfers given as (src_pid, dst_pid, bytes).

        Each process serializes its own sends and its own receives; inter-node
        transfers also serialize on the sending and receiving node interface.
        """
        send = defaultdict(float)
        recv = defaultdict(float)
        nic_out = defaultdict(float)
        nic_in = defaultdict(float)
        for a, b, nbytes in transfers:
            if a == b:
                continue
            same = self.node_map.same_node(a, b)
            c = self.latency.p2p_cost(same, nbytes)
            send[a] += c
            recv[b] += c
            if not same:
                nic_out[self.node_map.node_of(a)] += c
                nic_in[self.node_map.node_of(b)] += c
        loads = [*send.values(), *recv.values(), *nic_out.values(), *nic_in.values()]
        return max(loads, default=0.0)

    def exchange(self, comm: CommEpoch, messages: Sequence[Message]) -> ExchangeResult:
        """
        Deliver a batch of concurrent messages.

        All endpoints must be alive; otherwise ProcFailed is raised and nothing
        is delivered. Delivery order follows each sender's serialized
        completion times through the event queue.
        """
        self.check_comm(comm)
        self._check_endpoints(comm, messages)
        transfers = [(comm.members[m.src], comm.members[m.dst], m.nbytes) for m in messages]
        cost = self.phase_cost(transfers)

        sender_time: dict[int, float] = defaultdict(float)
        for m, (a, b, nbytes) in zip(messages, transfers):
            c = 0.0 if a == b else self.latency.p2p_cost(self.node_map.same_node(a, b), nbytes)
            sender_time[a] += c
            self.clock.comm_time[a] += c
            self.events.push(sender_time[a], "deliver", m.src, m.dst, (m.payload, nbytes))
        result = ExchangeResult(cost=cost)
        for ev in self.events.drain():
            payload, nbytes = ev.payload
            result.deliveries.setdefault(ev.dst, []).append((ev.src, payload))
            if ev.src != ev.dst:
                result.bytes_moved += nbytes
        self.clock.advance(cost)
        self.trace.append((self.clock.now, "exchange", comm.epoch, len(messages), result.bytes_moved))
        return result

    # ------------------------------------------------------------------
    # Collectives
    # ------------------------------------------------------------------

    def collective_cost(self, pids: Sequence[int], nbytes: float) -> float:
        return self.latency.collective_cost(len(pids), self.spans_nodes(pids), nbytes)

    def collective(
        self,
        comm: CommEpoch,
        kind: str,
        values: Optional[Sequence[Any]] = None,
        nbytes: float = 8.0,
        op: str = "sum",
        root: int = 0,
    ) -> CollectiveResult:
        """
        barrier | allreduce | broadcast | allgather over every member.

        allreduce folds `values` left to right in rank order so the result is
        the sequential reduction; broadcast returns values[root]; allgather
        returns the list. Any Failed member makes every survivor see ProcFailed.
        """
        self.check_comm(comm)
        dead = self.dead_members(comm)
        if dead:
            self.trace.append((self.clock.now, "proc_failed", tuple(sorted(dead))))
            raise ProcFailed(dead, self.live_members(comm))
        if kind == "barrier":
            value = None
        elif kind == "allreduce":
            if values is None or len(values) != comm.size:
                raise ConfigError("allreduce needs one value per member")
            reducer = _REDUCERS[op]
            value = values[0]
            for v in values[1:]:
                value = reducer(value, v)
        elif kind == "broadcast":
            if values is None:
                raise ConfigError("broadcast needs the root value")
            value = values[root] if len(values) == comm.size else values[0]
        elif kind == "allgather":
            if values is None or len(values) != comm.size:
                raise ConfigError("allgather needs one value per member")
            value = list(values)
        else:
            raise ConfigError(f"unknown collective {kind!r}")
        cost = self.collective_cost(comm.members, nbytes)
        for pid in comm.members:
            self.clock.comm_time[pid] += cost
        self.clock.advance(cost)
        self.trace.append((self.clock.now, kind, comm.epoch))
        return CollectiveResult(value=value, cost=cost)


def build_world(config: WorldConfig | Mapping[str, Any]) -> World:
    """Validate a world document and build the world at epoch 0."""
    if not isinstance(config, WorldConfig):
        try:
            config = WorldConfig.model_validate(config)
        except ValidationError as e:
            raise ConfigError(f"invalid world config: {e}") from e
    world = World(config)
    logger.info(
        "World built: P=%s spares=%s cores_per_node=%s nodes=%s",
        config.processes,
        config.spares,
        config.cores_per_node,
        world.node_map.node_count,
    )
    return world
