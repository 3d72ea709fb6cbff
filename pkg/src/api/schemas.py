"""
Pydantic request/response schemas for experiments and fault plans.

Experiment requests reuse the harness document model; responses mirror the
CSV row plus the per-recovery details the CSV leaves out.
"""

from typing import Optional

from pydantic import BaseModel, Field

from src.harness.schemas import ExperimentConfig


# -----------------------------------------------------------------------------
# Experiments
# -----------------------------------------------------------------------------


class RecoveryOut(BaseModel):
    """One recovery as it happened in the run."""

    strategy: str
    failed: list[int]
    tag: int = Field(..., description="Outer iteration the run rolled back to.")
    epoch: int
    t_pfd: float
    t_pfr: float
    t_pfx: float
    bytes_moved: float
    spares: list[int] = Field(default_factory=list)
    fallback: bool = False


class ExperimentOut(BaseModel):
    """Result row of one experiment plus run statistics."""

    P: int
    strategy: str
    failures: int
    total_s: float
    t_check_s: float
    t_pfd_s: float
    t_pfr_s: float
    t_pfx_s: float
    t_recompute_s: float
    slowdown: float
    pct_check: float
    pct_recovery: float
    pct_reconfig: float
    useful_s: float
    status: str
    problem: str
    reason: str = ""
    inner_iterations: int = 0
    inner_iterations_recomputed: int = 0
    outer_iterations: int = 0
    checkpoints_taken: int = 0
    unfired_failures: int = 0
    relative_residual: Optional[float] = None
    recoveries: list[RecoveryOut] = Field(default_factory=list)


class CompareIn(BaseModel):
    """Experiments to run and compare side by side (shrink vs substitute)."""

    experiments: list[ExperimentConfig] = Field(..., min_length=2)


class ComparisonOut(BaseModel):
    P: int
    failures: int
    problem: str
    slowdown_shrink: float
    slowdown_substitute: float
    slowdown_ratio: float
    pct_check: tuple[float, float]
    pct_recovery: tuple[float, float]
    pct_reconfig: tuple[float, float]
    check_ratio: float
    reconfig_ratio: float
    recovery_ratio: float
    recompute_ratio: float
    shrink_check_higher: bool
    shrink_reconfig_higher: bool
    shrink_recompute_higher: bool


class CompareOut(BaseModel):
    rows: list[ExperimentOut]
    comparisons: list[ComparisonOut]


# -----------------------------------------------------------------------------
# Fault plans
# -----------------------------------------------------------------------------


class InjectionOut(BaseModel):
    rank: int
    outer_iteration: int
    window_offset: float


class PlanOut(BaseModel):
    preset: str
    processes: int
    k: int
    injections: list[InjectionOut]
