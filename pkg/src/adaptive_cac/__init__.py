"""Adaptive multi-level bandwidth call admission control for one wireless cell.

``chain`` gives blocking, dropping and utilization from a birth-death model,
``des`` simulates the same cell call by call, ``oracle`` holds independent
reference solvers, and ``scenario``/``cli`` drive sweeps from JSON files.
"""

from .chain import ChainModel, ChainResults, SchemePolicy, Variant, build_chain, evaluate
from .des import SimConfig, SimStats, aggregate, run_replication, simulate
from .errors import CACError, ValidationError
from .traffic import CellParameters, MixAggregates, TrafficClass, TrafficMix, aggregates, validate

__all__ = [
    "CACError", "CellParameters", "ChainModel", "ChainResults", "MixAggregates", "SchemePolicy",
    "SimConfig", "SimStats", "TrafficClass", "TrafficMix", "ValidationError", "Variant",
    "aggregate", "aggregates", "build_chain", "evaluate", "run_replication", "simulate", "validate",
]
