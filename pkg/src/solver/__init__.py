"""Distributed inner-outer FGMRES workload and its problem generators."""
