"""
Checkpoint/restart simulator.

Deterministic discrete-event simulation of an SPMD solver under process
failures: buddy in-memory checkpointing, shrink and substitute recovery, and
waste-model accounting of what fault tolerance costs.
"""
