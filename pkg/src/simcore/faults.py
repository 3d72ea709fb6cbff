"""
Fault plans: which process dies, in which outer iteration, and how far into it.

A plan is validated once at load time; at run time the injector fires each
entry exactly once when the solver reaches its trigger point.
"""

import logging
from collections import Counter
from typing import Optional

from pydantic import BaseModel, Field

from src.simcore.errors import ConfigError
from src.simcore.world import World

logger = logging.getLogger(__name__)


class FaultInjection(BaseModel):
    """Kill `rank` during outer iteration `outer_iteration`."""

    model_config = {"extra": "forbid", "frozen": True}

    rank: int = Field(..., ge=0, description="Original rank (process id) of the victim.")
    outer_iteration: int = Field(..., ge=0, description="Global outer-iteration index of the trigger.")
    window_offset: float = Field(
        1.0,
        ge=0.0,
        le=1.0,
        description="Fraction of that iteration's inner steps that complete before the kill.",
    )

    def kill_step(self, m_inner: int) -> int:
        return min(m_inner, max(0, round(self.window_offset * m_inner)))


class FaultPlan(BaseModel):
    injections: list[FaultInjection] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.injections)

    @property
    def ranks(self) -> list[int]:
        return [inj.rank for inj in self.injections]


def validate_fault_plan(
    plan: FaultPlan,
    processes: int,
    redundancy: int,
    max_outer_iterations: Optional[int] = None,
    allow_unsurvivable: bool = False,
) -> FaultPlan:
    """
    Reject plans that target spares or unknown ranks, repeat a rank, trigger
    beyond the run, kill everyone, or (unless allowed) kill more processes in
    one window than the buddy redundancy can cover.
    """
    seen: set[int] = set()
    for inj in plan.injections:
        if inj.rank >= processes:
            raise ConfigError(f"fault plan targets rank {inj.rank}, but only ranks 0..{processes - 1} are active")
        if inj.rank in seen:
            raise ConfigError(f"fault plan lists rank {inj.rank} more than once")
        seen.add(inj.rank)
        if max_outer_iterations is not None and inj.outer_iteration >= max_outer_iterations:
            raise ConfigError(
                f"trigger at outer iteration {inj.outer_iteration} is beyond the last iteration "
                f"({max_outer_iterations - 1})"
            )
    if len(seen) >= processes and processes > 0 and plan.injections:
        raise ConfigError("fault plan kills every active process")
    if not allow_unsurvivable:
        per_window = Counter(inj.outer_iteration for inj in plan.injections)
        for it, count in sorted(per_window.items()):
            if count > redundancy:
                raise ConfigError(
                    f"{count} simultaneous failures at outer iteration {it} exceed redundancy {redundancy}"
                )
    return plan


class FaultInjector:
    """Fires plan entries at (outer_iteration, inner_step) trigger points."""

    def __init__(self, plan: Optional[FaultPlan], m_inner: int) -> None:
        self.plan = plan or FaultPlan()
        self.m_inner = m_inner
        self._fired: set[int] = set()

    @property
    def pending(self) -> int:
        return len(self.plan.injections) - len(self._fired)

    def fire(self, world: World, outer_iteration: int, step: int) -> list[int]:
        """Kill every not-yet-fired victim whose trigger point has been reached."""
        killed = []
        for inj in self.plan.injections:
            if inj.rank in self._fired:
                continue
            if inj.outer_iteration == outer_iteration and step >= inj.kill_step(self.m_inner):
                self._fired.add(inj.rank)
                world.inject_failure(inj.rank)
                killed.append(inj.rank)
        if killed:
            logger.info("Injected failure of %s at outer iteration %s step %s", killed, outer_iteration, step)
        return killed


def inject_failure(plan: FaultPlan, world: World, outer_iteration: int, step: int, m_inner: int) -> list[int]:
    """One-shot helper: fire the plan's entries due at this point on a fresh injector."""
    return FaultInjector(plan, m_inner).fire(world, outer_iteration, step)
