"""
World document: process counts, placement and the latency/compute model.

Fields the document omits fall back to Settings defaults.
"""

from pydantic import BaseModel, Field, model_validator

from src.config import get_settings


def _default(name: str):
    return lambda: getattr(get_settings(), name)


class WorldConfig(BaseModel):
    """Parameters of one simulated machine."""

    model_config = {"extra": "forbid"}

    processes: int = Field(..., ge=1, description="Active ranks P at startup.")
    spares: int = Field(0, ge=0, description="Warm spares S, idle until a recovery stitches them in.")
    cores_per_node: int = Field(..., ge=1, description="Processes placed on each node.")
    alpha_intra: float = Field(default_factory=_default("DEFAULT_ALPHA_INTRA_S"), ge=0)
    alpha_inter: float = Field(default_factory=_default("DEFAULT_ALPHA_INTER_S"), ge=0)
    bandwidth_bytes_per_s: float = Field(default_factory=_default("DEFAULT_BANDWIDTH_BYTES_PER_S"), gt=0)
    seconds_per_flop: float = Field(default_factory=_default("DEFAULT_SECONDS_PER_FLOP"), ge=0)
    collective_tree_factor: float = Field(default_factory=_default("DEFAULT_COLLECTIVE_TREE_FACTOR"), gt=0)
    detection_timeout_s: float = Field(default_factory=_default("DEFAULT_DETECTION_TIMEOUT_S"), ge=0)
    proactive_check_interval: int = Field(
        0,
        ge=0,
        description="Barrier every k outer iterations to surface failures early (0 = reactive only).",
    )
    seed: int = Field(0, description="Seed for the world's random stream (random plan preset).")

    @model_validator(mode="after")
    def _latency_order(self) -> "WorldConfig":
        if self.alpha_inter < self.alpha_intra:
            raise ValueError("alpha_inter must be >= alpha_intra")
        return self
