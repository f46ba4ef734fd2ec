"""Reservoir-sampling Bloom filters for approximate stream deduplication."""

__version__ = "0.1.0"

from .baselines import ClassicBloom, SbfBank
from .core import Decision, FilterBank, FilterPlan, Verdict, plan
from .harness import MetricsWindow, StreamSpec, evaluate, generate, ingest, solve_universe

__all__ = [
    "ClassicBloom",
    "Decision",
    "FilterBank",
    "FilterPlan",
    "MetricsWindow",
    "SbfBank",
    "StreamSpec",
    "Verdict",
    "evaluate",
    "generate",
    "ingest",
    "plan",
    "solve_universe",
]
