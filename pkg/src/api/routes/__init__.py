"""Routers: experiments, fault plans, metrics."""
