"""HTTP surface of the simulator: experiment and plan routes, latency middleware, response schemas."""
