"""Robust statistical arbitrage detection with ridgelet trading strategies."""

from ridgearb.costs import CostBreakdown, CostParams, TransactionKind, total_cost
from ridgearb.market import (
    AmbiguitySet,
    MarketSpec,
    PositionSchedule,
    PricePath,
    ScenarioSet,
    gross_profit,
    validate_path,
)
from ridgearb.objective import (
    ObjectiveReport,
    Payoff,
    PenaltyConfig,
    detect_arbitrage,
    penalized_gradient,
    penalized_value,
    verify_arbitrage,
)
from ridgearb.partition import Partition, assign_cells, conditional_expectation, generate_partition
from ridgearb.strategy import Activation, RidgeletStrategy
from ridgearb.trainer import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "AmbiguitySet",
    "CostBreakdown",
    "CostParams",
    "MarketSpec",
    "ObjectiveReport",
    "Partition",
    "Payoff",
    "PenaltyConfig",
    "PositionSchedule",
    "PricePath",
    "RidgeletStrategy",
    "ScenarioSet",
    "TrainConfig",
    "TrainResult",
    "TransactionKind",
    "assign_cells",
    "conditional_expectation",
    "detect_arbitrage",
    "generate_partition",
    "gross_profit",
    "penalized_gradient",
    "penalized_value",
    "total_cost",
    "train",
    "validate_path",
    "verify_arbitrage",
]
