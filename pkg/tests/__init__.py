"""Tests for the checkpoint/restart simulator."""
