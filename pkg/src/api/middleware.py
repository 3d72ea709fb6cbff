"""
Request latency middleware.

- Request latency recorded for Prometheus, labelled by method and path.
- Slow requests (whole simulations) logged at INFO with their duration.
"""

import logging
import time
from typing import Callable

from fastapi import Request, Response
from starlette.middleware.base import BaseHTTPMiddleware

from src.metrics.prometheus import REQUEST_LATENCY

logger = logging.getLogger(__name__)

_SLOW_REQUEST_S = 1.0


class RequestLatencyMiddleware(BaseHTTPMiddleware):
    """Record request latency for Prometheus."""

    async def dispatch(self, request: Request, call_next: Callable) -> Response:
        start = time.monotonic()
        response = await call_next(request)
        duration = time.monotonic() - start
        path = request.url.path or "/"
        method = request.method or "GET"
        REQUEST_LATENCY.labels(method=method, path=path).observe(duration)
        if duration >= _SLOW_REQUEST_S:
            logger.info("%s %s took %.2fs", method, path, duration)
        return response
