"""
Checkpoint cadence.

fixed_interval checkpoints every k outer iterations; young converts the
optimal interval sqrt(2*C*MTTF) into outer iterations once the first
checkpoint and the first outer iteration have been measured; disabled turns
checkpointing off (the no-protection baseline).
"""

import logging
import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, PrivateAttr, model_validator

from src.simcore.errors import ConfigError

logger = logging.getLogger(__name__)


def optimal_interval(checkpoint_cost: float, mttf: float) -> float:
    """Young's first-order optimum sqrt(2 * C * MTTF)."""
    if mttf <= 0:
        raise ConfigError("MTTF must be positive")
    if checkpoint_cost < 0:
        raise ConfigError("checkpoint cost must be non-negative")
    return math.sqrt(2.0 * checkpoint_cost * mttf)


class CheckpointMode(str, Enum):
    FIXED_INTERVAL = "fixed_interval"
    YOUNG = "young"
    DISABLED = "disabled"


class CheckpointPolicy(BaseModel):
    """Checkpoint section of an experiment document."""

    model_config = {"extra": "forbid"}

    mode: CheckpointMode = CheckpointMode.FIXED_INTERVAL
    k: int = Field(1, ge=1, description="Outer iterations between Dynamic checkpoints (fixed_interval).")
    checkpoint_cost_s: Optional[float] = Field(
        None,
        ge=0,
        description="C for Young's formula; measured from the first checkpoint when unset.",
    )
    mttf_s: Optional[float] = Field(None, gt=0, description="System MTTF for Young's formula.")
    redundancy: int = Field(1, ge=1, description="Buddy copies r kept for every rank.")

    _cadence: Optional[int] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _young_needs_mttf(self) -> "CheckpointPolicy":
        if self.mode == CheckpointMode.YOUNG and self.mttf_s is None:
            raise ValueError("young mode requires mttf_s")
        return self

    @property
    def enabled(self) -> bool:
        return self.mode != CheckpointMode.DISABLED

    @property
    def cadence(self) -> Optional[int]:
        """Outer iterations between checkpoints, None until Young calibration ran."""
        if self.mode == CheckpointMode.FIXED_INTERVAL:
            return self.k
        return self._cadence

    def calibrate(self, measured_checkpoint_s: float, iteration_s: float) -> int:
        """Fix the Young cadence from measured costs; a no-op for other modes."""
        if self.mode != CheckpointMode.YOUNG:
            return self.cadence or 1
        if self._cadence is None:
            c = self.checkpoint_cost_s if self.checkpoint_cost_s is not None else measured_checkpoint_s
            interval = optimal_interval(c, self.mttf_s)
            self._cadence = max(1, round(interval / iteration_s)) if iteration_s > 0 else 1
            logger.info(
                "Young cadence: C=%.6fs MTTF=%.1fs interval=%.6fs -> every %s outer iterations",
                c,
                self.mttf_s,
                interval,
                self._cadence,
            )
        return self._cadence

    def should_checkpoint(self, completed_iterations: int) -> bool:
        """True when the state after `completed_iterations` outer iterations is due."""
        if not self.enabled:
            return False
        cadence = self.cadence
        if cadence is None:
            return True
        return completed_iterations % cadence == 0
