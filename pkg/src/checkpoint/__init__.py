"""Buddy in-memory checkpointing: snapshots, stores, coordinated commits and cadence."""
