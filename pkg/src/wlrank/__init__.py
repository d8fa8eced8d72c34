"""Weighted rank reputation system and the marketplace simulation that evaluates it."""

from .engine import RankState, ReputationParams, Transaction, update_ranks
from .harness import SweepSpec, emit_report, load_config, run_sweep
from .market import BehaviorParams, ScenarioConfig, SimulationLog, run_simulation
from .metrics import MetricsReport, evaluate

__all__ = [
    "BehaviorParams", "MetricsReport", "RankState", "ReputationParams", "ScenarioConfig",
    "SimulationLog", "SweepSpec", "Transaction", "emit_report", "evaluate", "load_config",
    "run_simulation", "run_sweep", "update_ranks",
]
