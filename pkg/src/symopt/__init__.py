"""Symbolic options for reinforcement learning: learned action models, planning and tabular options."""

__version__ = "0.1.0"
