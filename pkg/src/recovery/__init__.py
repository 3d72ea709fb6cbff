"""Recovery strategies (shrink, substitute), the redistribution planner and the recovery manager."""
