"""
FastAPI application entry point.

Mounts API routes (/api/v1/experiments, /api/v1/plans), /metrics, /health;
latency middleware; ConfigError mapped to 422, anything else to a logged 500.
"""

import logging

from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse

from src.api.middleware import RequestLatencyMiddleware
from src.api.routes import experiments, metrics, plans
from src.config import LOG_FORMAT, get_settings
from src.simcore.errors import ConfigError

logging.basicConfig(
    level=get_settings().LOG_LEVEL,
    format=LOG_FORMAT,
)
logger = logging.getLogger(__name__)


app = FastAPI(
    title="Checkpoint/Restart Simulator API",
    description=(
        "Run simulated fault-tolerance experiments: a distributed inner-outer FGMRES solve under "
        "injected process failures, protected by buddy in-memory checkpoints and recovered by "
        "shrink or substitute. Returns waste-model breakdowns normalized against a no-protection "
        "baseline, generated fault plans and Prometheus metrics."
    ),
    version="0.1.0",
)

app.add_middleware(RequestLatencyMiddleware)

app.include_router(experiments.router, prefix="/api/v1")
app.include_router(plans.router, prefix="/api/v1")
app.include_router(metrics.router)


@app.get("/health")
def health():
    """Health check for load balancers."""
    import os

    return {"status": "ok", "process_id": os.getpid()}


@app.exception_handler(ConfigError)
async def config_error_handler(request: Request, exc: ConfigError):
    """Invalid documents and misuse: 422 with the reason."""
    logger.info("Rejected %s: %s", request.url.path, exc)
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": str(exc)},
    )


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Return 500 with generic message; log traceback."""
    logger.exception("Unhandled exception: %s", exc)
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"detail": "An internal error occurred."},
    )
