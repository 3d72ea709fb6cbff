"""Prometheus instruments for simulated runs and API latency."""
