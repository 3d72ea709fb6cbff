"""
GET /metrics - Prometheus-style metrics (experiments, failures, recoveries, checkpoints, latency).
"""

from fastapi import APIRouter, Response

from src.metrics.prometheus import get_metrics_bytes

router = APIRouter(tags=["metrics"])


@router.get("/metrics")
def get_metrics() -> Response:
    """Serve Prometheus text format."""
    return Response(content=get_metrics_bytes(), media_type="text/plain; version=0.0.4; charset=utf-8")
