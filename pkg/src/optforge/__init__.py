"""Benchmark harness and baseline optimisation agent for speed-up tasks."""

__version__ = "0.1.0"
