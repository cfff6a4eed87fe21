"""Staked-sentiment polls with performance-based settlement."""

from .core import (
    Continuous,
    ContinuousOutcomes,
    Discrete,
    DiscreteOutcomes,
    Interval,
    Label,
    TokenAmount,
    from_base_units,
    parse_choice,
    saturating_time_add,
    to_base_units,
)
from .engine import Phase, PollEngine, PollSpec, SettlementReport, StakingParams, run_governance_round
from .ledger import Ledger, TokenPolicy
from .oracle import Oracle, OutcomeFeed
from .sim import Simulation

__version__ = "0.1.0"

__all__ = [
    "Continuous", "ContinuousOutcomes", "Discrete", "DiscreteOutcomes", "Interval", "Label",
    "TokenAmount", "from_base_units", "parse_choice", "saturating_time_add", "to_base_units",
    "Phase", "PollEngine", "PollSpec", "SettlementReport", "StakingParams", "run_governance_round",
    "Ledger", "TokenPolicy", "Oracle", "OutcomeFeed", "Simulation",
]
