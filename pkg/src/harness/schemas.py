"""
Experiment documents.

One document describes one simulated run: the machine, the workload, the
solver, the recovery strategy, the checkpoint policy and where the faults
come from (inline list, separate plan file, or a generator preset).
"""

import json
from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from src.checkpoint.policy import CheckpointMode, CheckpointPolicy
from src.recovery.manager import RecoveryStrategy
from src.simcore.config import WorldConfig
from src.simcore.errors import ConfigError
from src.simcore.faults import FaultPlan
from src.solver.state import SolverConfig


class ProblemKind(str, Enum):
    POISSON27 = "poisson27"
    MATRIX_MARKET = "matrix_market"


class ProblemConfig(BaseModel):
    """Workload: the 27-point problem on an n^3 grid, or a Matrix Market file."""

    model_config = {"extra": "forbid"}

    kind: ProblemKind = ProblemKind.POISSON27
    n: int = Field(8, ge=1, description="Grid points per dimension (poisson27).")
    path: Optional[str] = Field(None, description="Matrix Market file (matrix_market).")
    diagonal_shift: float = Field(0.0, ge=0, description="Added to the stencil diagonal.")

    @model_validator(mode="after")
    def _path_for_files(self) -> "ProblemConfig":
        if self.kind == ProblemKind.MATRIX_MARKET and not self.path:
            raise ValueError("matrix_market problems need a path")
        return self

    @property
    def label(self) -> str:
        if self.kind == ProblemKind.POISSON27:
            return f"poisson27-n{self.n}"
        return f"mm-{Path(self.path).stem}"


class PlanPresetName(str, Enum):
    WORST_CASE_SHRINK = "worst_case_shrink"
    WORST_CASE_SUBSTITUTE = "worst_case_substitute"
    RANDOM = "random"


class PlanPreset(BaseModel):
    """Generated fault plan: k victims, one every `spacing` outer iterations."""

    model_config = {"extra": "forbid"}

    name: PlanPresetName
    k: int = Field(..., ge=0, description="Number of failures.")
    first_iteration: int = Field(1, ge=0, description="Outer iteration of the first failure.")
    spacing: int = Field(1, ge=0, description="Outer iterations between successive failures (0 = simultaneous).")
    window_offset: float = Field(1.0, ge=0.0, le=1.0)


class ExperimentConfig(BaseModel):
    """A complete experiment document."""

    model_config = {"extra": "forbid"}

    name: Optional[str] = None
    world: WorldConfig
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    strategy: RecoveryStrategy = RecoveryStrategy.SHRINK
    checkpoint: CheckpointPolicy = Field(default_factory=CheckpointPolicy)
    faults: Optional[FaultPlan] = Field(None, description="Inline fault plan.")
    fault_plan_path: Optional[str] = Field(None, description="Fault plan JSON file.")
    preset: Optional[PlanPreset] = Field(None, description="Generated fault plan.")
    baseline: bool = Field(False, description="No-protection run: no checkpoints, no recovery, no spares.")
    fallback_to_shrink: bool = Field(False, description="Shrink instead of failing when spares run out.")
    allow_unsurvivable_plans: bool = Field(
        False,
        description="Accept plans killing more processes per window than the redundancy covers.",
    )

    @model_validator(mode="after")
    def _one_fault_source(self) -> "ExperimentConfig":
        sources = [s for s in (self.faults, self.fault_plan_path, self.preset) if s is not None]
        if len(sources) > 1:
            raise ValueError("give at most one of faults, fault_plan_path, preset")
        return self

    @model_validator(mode="after")
    def _enough_spares(self) -> "ExperimentConfig":
        if self.baseline or self.strategy != RecoveryStrategy.SUBSTITUTE or self.fallback_to_shrink:
            return self
        planned = self.planned_failures
        if planned is not None and planned > self.world.spares:
            raise ValueError(f"substitute needs {planned} spares, world has {self.world.spares}")
        return self

    @property
    def planned_failures(self) -> Optional[int]:
        """Failure count known without reading files; None for plan files."""
        if self.faults is not None:
            return len(self.faults)
        if self.preset is not None:
            return self.preset.k
        if self.fault_plan_path is not None:
            return None
        return 0

    @property
    def strategy_label(self) -> str:
        return "none" if self.baseline else self.strategy.value

    def baseline_config(self) -> "ExperimentConfig":
        """Same machine, workload and solver with every protection off and no faults."""
        return ExperimentConfig(
            name=f"{self.name or 'experiment'}-baseline",
            world=self.world.model_copy(update={"spares": 0, "proactive_check_interval": 0}),
            problem=self.problem,
            solver=self.solver,
            checkpoint=CheckpointPolicy(mode=CheckpointMode.DISABLED),
            baseline=True,
        )


def parse_experiment(raw: str | bytes | dict) -> ExperimentConfig:
    """Validate an experiment document; ConfigError carries pydantic's message."""
    try:
        if isinstance(raw, dict):
            return ExperimentConfig.model_validate(raw)
        return ExperimentConfig.model_validate_json(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e


def load_experiment(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read experiment config {path}: {e}") from e
    config = parse_experiment(raw)
    if config.fault_plan_path and not Path(config.fault_plan_path).is_absolute():
        config = config.model_copy(update={"fault_plan_path": str(path.parent / config.fault_plan_path)})
    if config.problem.path and not Path(config.problem.path).is_absolute():
        problem = config.problem.model_copy(update={"path": str(path.parent / config.problem.path)})
        config = config.model_copy(update={"problem": problem})
    return config


def dump_experiment(config: ExperimentConfig) -> str:
    """Canonical JSON (sorted keys), used as a cache key."""
    return json.dumps(config.model_dump(mode="json"), sort_keys=True)
