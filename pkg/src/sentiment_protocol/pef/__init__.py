"""Performance-evaluation function catalog, schedules, pool sizing and arbitrage checks."""

from .arbitrage import ArbitrageResult, detect_arbitrage, maximin, payoff_matrix
from .curves import curve_samples, parse_grid, samples_to_csv
from .functions import (
    CATALOG,
    ArctanBuySell,
    Constant,
    DiscreteMatch,
    PEFunction,
    RatingTriple,
    TabulatedDiscrete,
    evaluate,
    inf_bound,
    log_grid,
    pef_from_json,
    sup_bound,
)
from .schedule import (
    EvaluationSchedule,
    ScheduleEntry,
    geometric_cumulative,
    geometric_pool,
    geometric_pools,
    required_pool,
    scheduled_pef,
    withheld_tranches,
    withhold_per_token,
)

__all__ = [
    "ArbitrageResult", "detect_arbitrage", "maximin", "payoff_matrix",
    "curve_samples", "parse_grid", "samples_to_csv",
    "CATALOG", "ArctanBuySell", "Constant", "DiscreteMatch", "PEFunction", "RatingTriple",
    "TabulatedDiscrete", "evaluate", "inf_bound", "log_grid", "pef_from_json", "sup_bound",
    "EvaluationSchedule", "ScheduleEntry", "geometric_cumulative", "geometric_pool", "geometric_pools", "required_pool", "scheduled_pef",
    "withheld_tranches", "withhold_per_token",
]
