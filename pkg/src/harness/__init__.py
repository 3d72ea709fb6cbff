"""Experiment driver: configs, fault plans, waste accounting, sweeps and CSV results."""
