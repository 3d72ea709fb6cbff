"""
Fault plans from files and from the placement generators.

worst_case_shrink kills the highest ranks, which makes shrink move the most
rows; worst_case_substitute kills ranks on nodes that host no spare, so every
substituted rank talks to its neighbours across the network.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from src.harness.schemas import PlanPreset, PlanPresetName
from src.simcore.config import WorldConfig
from src.simcore.errors import ConfigError
from src.simcore.faults import FaultInjection, FaultPlan, validate_fault_plan
from src.simcore.world import NodeMap

logger = logging.getLogger(__name__)


def _schedule(ranks: list[int], first_iteration: int, spacing: int, window_offset: float) -> FaultPlan:
    return FaultPlan(
        injections=[
            FaultInjection(rank=r, outer_iteration=first_iteration + i * spacing, window_offset=window_offset)
            for i, r in enumerate(ranks)
        ]
    )


def _check_count(processes: int, k: int) -> None:
    if processes < 1:
        raise ConfigError("need at least one process")
    if k < 0 or k >= processes:
        raise ConfigError(f"cannot plan {k} failures among {processes} processes")


def worst_case_shrink(
    processes: int,
    k: int,
    first_iteration: int = 1,
    spacing: int = 1,
    window_offset: float = 1.0,
) -> FaultPlan:
    """Highest ranks first: P-1, P-2, ..."""
    _check_count(processes, k)
    return _schedule(list(range(processes - 1, processes - 1 - k, -1)), first_iteration, spacing, window_offset)


def worst_case_substitute(
    processes: int,
    k: int,
    cores_per_node: int,
    spares: int,
    first_iteration: int = 1,
    spacing: int = 1,
    window_offset: float = 1.0,
) -> FaultPlan:
    """
    Ranks on nodes without spares, highest first and spread one per node
    before doubling up. When every node hosts a spare the highest ranks are
    used.
    """
    _check_count(processes, k)
    nodes = NodeMap.fill(processes + spares, cores_per_node)
    spare_nodes = nodes.nodes_of(range(processes, processes + spares))
    remote = [r for r in range(processes - 1, -1, -1) if nodes.node_of(r) not in spare_nodes]
    if len(remote) < k:
        logger.debug("Only %s ranks live on spare-free nodes; using the highest ranks instead", len(remote))
        return worst_case_shrink(processes, k, first_iteration, spacing, window_offset)
    chosen: list[int] = []
    used_nodes: set[int] = set()
    for r in remote:
        if len(chosen) == k:
            break
        if nodes.node_of(r) not in used_nodes:
            chosen.append(r)
            used_nodes.add(nodes.node_of(r))
    for r in remote:
        if len(chosen) == k:
            break
        if r not in chosen:
            chosen.append(r)
    return _schedule(chosen, first_iteration, spacing, window_offset)


def random_plan(
    processes: int,
    k: int,
    seed: int,
    first_iteration: int = 1,
    spacing: int = 1,
    window_offset: float = 1.0,
) -> FaultPlan:
    """k distinct victims drawn from the world seed."""
    _check_count(processes, k)
    ranks = np.random.default_rng(seed).choice(processes, size=k, replace=False)
    return _schedule([int(r) for r in ranks], first_iteration, spacing, window_offset)


def build_preset(preset: PlanPreset, world: WorldConfig) -> FaultPlan:
    args = dict(first_iteration=preset.first_iteration, spacing=preset.spacing, window_offset=preset.window_offset)
    if preset.name == PlanPresetName.WORST_CASE_SHRINK:
        return worst_case_shrink(world.processes, preset.k, **args)
    if preset.name == PlanPresetName.WORST_CASE_SUBSTITUTE:
        return worst_case_substitute(world.processes, preset.k, world.cores_per_node, world.spares, **args)
    return random_plan(world.processes, preset.k, world.seed, **args)


def parse_fault_plan(raw: str | bytes) -> FaultPlan:
    """A JSON list of {rank, outer_iteration[, window_offset]}, or {"injections": [...]}."""
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"fault plan is not valid JSON: {e}") from e
    if isinstance(doc, list):
        doc = {"injections": doc}
    try:
        return FaultPlan.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid fault plan: {e}") from e


def load_fault_plan(
    path: str | Path,
    processes: Optional[int] = None,
    redundancy: int = 1,
    max_outer_iterations: Optional[int] = None,
    allow_unsurvivable: bool = False,
) -> FaultPlan:
    """Read a plan file; validated against the world when `processes` is given."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read fault plan {path}: {e}") from e
    plan = parse_fault_plan(raw)
    if processes is not None:
        validate_fault_plan(plan, processes, redundancy, max_outer_iterations, allow_unsurvivable)
    logger.info("Loaded fault plan %s: %s injections", path.name, len(plan))
    return plan


def dump_fault_plan(plan: FaultPlan) -> str:
    return json.dumps([inj.model_dump() for inj in plan.injections], indent=2)
