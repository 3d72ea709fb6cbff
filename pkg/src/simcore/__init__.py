"""Simulated message-passing world: processes, epochs, costs, detection and fault injection."""
