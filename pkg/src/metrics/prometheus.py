"""
Prometheus-style metrics: experiments run, injected failures, recoveries,
checkpoints, simulated recovery time, last slowdown, API latency.

Exposed at GET /metrics.
"""

from prometheus_client import Counter, Gauge, Histogram, generate_latest

# Request latency (API)
REQUEST_LATENCY = Histogram(
    "ckpt_sim_request_duration_seconds",
    "Request latency in seconds",
    ["method", "path"],
    buckets=(0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0, 30.0),
)

# Experiments
EXPERIMENTS_TOTAL = Counter(
    "ckpt_sim_experiments_total",
    "Simulated experiments",
    ["strategy", "status"],  # shrink/substitute/none; ok, not_converged, unrecoverable
)
FAILURES_INJECTED_TOTAL = Counter(
    "ckpt_sim_failures_injected_total",
    "Process failures injected into simulated runs",
)
RECOVERIES_TOTAL = Counter(
    "ckpt_sim_recoveries_total",
    "Completed recoveries",
    ["strategy"],
)
CHECKPOINTS_TOTAL = Counter(
    "ckpt_sim_checkpoints_total",
    "Committed coordinated checkpoints",
    ["kind"],  # static, dynamic
)
RECOVERY_SIM_SECONDS = Histogram(
    "ckpt_sim_recovery_simulated_seconds",
    "Simulated detect + reconfigure + recover time per recovery",
    buckets=(1e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 0.1, 0.5, 1.0),
)
LAST_SLOWDOWN = Gauge(
    "ckpt_sim_last_slowdown",
    "Normalized slowdown of the last experiment against its baseline",
    ["strategy"],
)


def get_metrics_bytes() -> bytes:
    """Return Prometheus text format (for GET /metrics)."""
    return generate_latest()


def record_experiment(strategy: str, status: str, slowdown: float | None = None) -> None:
    EXPERIMENTS_TOTAL.labels(strategy=strategy, status=status).inc()
    if slowdown is not None:
        LAST_SLOWDOWN.labels(strategy=strategy).set(slowdown)


def record_failures(count: int) -> None:
    if count:
        FAILURES_INJECTED_TOTAL.inc(count)


def record_recovery(strategy: str, simulated_seconds: float) -> None:
    """Record one completed recovery and its simulated cost."""
    RECOVERIES_TOTAL.labels(strategy=strategy).inc()
    RECOVERY_SIM_SECONDS.observe(simulated_seconds)


def record_checkpoints(dynamic: int, static: int = 0) -> None:
    if static:
        CHECKPOINTS_TOTAL.labels(kind="static").inc(static)
    if dynamic:
        CHECKPOINTS_TOTAL.labels(kind="dynamic").inc(dynamic)
