"""
Application configuration from environment variables.

Uses pydantic-settings for validation and defaults. Process-level tunables
(logging, default network model, sweep parallelism, results location, API
limits) are read here; per-experiment documents are validated separately in
src/harness/schemas.py and fall back to these defaults.
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"


class Settings(BaseSettings):
    """Application settings loaded from environment and .env file."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # -------------------------------------------------------------------------
    # Logging
    # -------------------------------------------------------------------------
    LOG_LEVEL: str = Field(default="INFO", description="Root log level (DEBUG shows per-phase costs).")

    # -------------------------------------------------------------------------
    # Network / compute model defaults (used when a world document omits them)
    # -------------------------------------------------------------------------
    DEFAULT_ALPHA_INTRA_S: float = Field(default=1e-6, ge=0, description="Intra-node message latency.")
    DEFAULT_ALPHA_INTER_S: float = Field(default=5e-5, ge=0, description="Inter-node message latency.")
    DEFAULT_BANDWIDTH_BYTES_PER_S: float = Field(
        default=215e6,
        gt=0,
        description="Point-to-point bandwidth (the cluster interconnect measured 215 MB/s).",
    )
    DEFAULT_SECONDS_PER_FLOP: float = Field(
        default=1e-7,
        ge=0,
        description="Modeled time of one flop; sized so local work outweighs messaging on desk-sized grids.",
    )
    DEFAULT_DETECTION_TIMEOUT_S: float = Field(
        default=1e-3,
        ge=0,
        description="Failure-detector timeout charged once per detection.",
    )
    DEFAULT_COLLECTIVE_TREE_FACTOR: float = Field(
        default=1.0,
        gt=0,
        description="Multiplier on the log2(P) rounds of a collective.",
    )

    # -------------------------------------------------------------------------
    # Harness
    # -------------------------------------------------------------------------
    SWEEP_MAX_WORKERS: int = Field(
        default=1,
        ge=1,
        le=64,
        description="Worlds simulated concurrently in a sweep (1 = sequential).",
    )
    RESULTS_DIR: str = Field(default="results", description="Default directory for CSV output.")

    # -------------------------------------------------------------------------
    # API
    # -------------------------------------------------------------------------
    API_MAX_COMPARE_EXPERIMENTS: int = Field(
        default=16,
        ge=1,
        le=256,
        description="Max experiment documents per compare request.",
    )


@lru_cache
def get_settings() -> Settings:
    """Return cached settings instance (loads env once)."""
    return Settings()
