"""Locally private distributed online learning over networks.

Library plus CLI simulator for a multi-learner consensus algorithm with
historical-average gradients, decaying step sequences, growing Laplace
broadcast noise, and a per-learner privacy accountant.
"""

from . import (config, learner, memory, metrics, objectives, privacy,
               rngstream, schedules, simulate, topology)

__all__ = [
    "config", "learner", "memory", "metrics", "objectives", "privacy",
    "rngstream", "schedules", "simulate", "topology",
]

__version__ = "0.1.0"
