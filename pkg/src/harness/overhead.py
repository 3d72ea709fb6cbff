"""Waste-model breakdown of a run's simulated time."""

from collections.abc import Mapping
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class OverheadBreakdown:
    t_check: float = 0.0
    t_pfd: float = 0.0
    t_pfr: float = 0.0
    t_pfx: float = 0.0
    t_recompute: float = 0.0
    useful: float = 0.0
    bytes_checkpointed: float = 0.0
    bytes_recovered: float = 0.0

    def __post_init__(self) -> None:
        negative = [k for k, v in asdict(self).items() if v < 0]
        if negative:
            raise ValueError(f"negative overhead components: {negative}")

    @classmethod
    def from_buckets(
        cls,
        buckets: Mapping[str, float],
        bytes_checkpointed: float = 0.0,
        bytes_recovered: float = 0.0,
    ) -> "OverheadBreakdown":
        """Map simulated-clock categories onto waste-model components."""
        return cls(
            t_check=buckets.get("check", 0.0),
            t_pfd=buckets.get("detect", 0.0),
            t_pfr=buckets.get("reconfig", 0.0),
            t_pfx=buckets.get("recover", 0.0),
            t_recompute=buckets.get("recompute", 0.0),
            useful=buckets.get("useful", 0.0),
            bytes_checkpointed=bytes_checkpointed,
            bytes_recovered=bytes_recovered,
        )

    @property
    def waste(self) -> float:
        return compute_waste(self)

    @property
    def total(self) -> float:
        return self.useful + self.waste

    @property
    def recovery(self) -> float:
        """Detection plus state recovery; reconfiguration is reported on its own."""
        return self.t_pfd + self.t_pfx


def compute_waste(b: OverheadBreakdown) -> float:
    """t_check + t_pfd + t_pfr + t_pfx + t_recompute."""
    return b.t_check + b.t_pfd + b.t_pfr + b.t_pfx + b.t_recompute
