"""Riskless-profit check for a performance-evaluation function.

A function is "zero-sum" in the useful sense when no split of a stake across
sentiments earns a positive amount under every outcome. Finding the best
split is the maximin of a small matrix game, solved as a linear program:

    maximize t  subject to  sum_s lam_s * f(o, s) >= t  for every grid outcome o,
                            sum_s lam_s = 1,  lam >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from ..core import Outcome, SentimentChoice
from ..errors import EmptyGrid
from .functions import PEFunction


@dataclass(frozen=True)
class ArbitrageResult:
    mix: tuple[tuple[SentimentChoice, float], ...]
    profit: float

    def to_json(self) -> dict:
        return {
            "mix": [{"sentiment": str(s), "weight": w} for s, w in self.mix],
            "profit": self.profit,
        }


def payoff_matrix(f: PEFunction, sentiments: Sequence[SentimentChoice], outcomes: Sequence[Outcome]) -> np.ndarray:
    """Rows are outcomes, columns sentiments."""
    return np.array([[f.evaluate(o, s) for s in sentiments] for o in outcomes], dtype=float)


def maximin(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Best mixed column strategy against the worst row, and its value."""
    n_rows, n_cols = A.shape
    # variables: lam_1..lam_n, t
    c = np.zeros(n_cols + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A, np.ones((n_rows, 1))])
    b_ub = np.zeros(n_rows)
    A_eq = np.hstack([np.ones((1, n_cols)), np.zeros((1, 1))])
    bounds = [(0, None)] * n_cols + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    lam = np.clip(res.x[:-1], 0.0, None)
    lam /= lam.sum()
    # report the value the returned mix actually guarantees
    return lam, float((A @ lam).min())


def detect_arbitrage(
    f: PEFunction,
    sentiments: Optional[Sequence[SentimentChoice]] = None,
    outcome_grid: Optional[Sequence[Outcome]] = None,
    epsilon: Optional[float] = None,
) -> Optional[ArbitrageResult]:
    """Return the stake mix with the best guaranteed profit, or None if it is not above ``epsilon``.

    Defaults: the function's own sentiments, its own outcome grid (a 1001 point
    log grid over [1/100, 100] for continuous outcomes) and ``epsilon = 1e-9 * c``.
    """
    sentiments = list(f.default_sentiments() if sentiments is None else sentiments)
    grid = list(f.default_outcomes() if outcome_grid is None else outcome_grid)
    if not grid:
        raise EmptyGrid("outcome grid is empty")
    if not sentiments:
        raise EmptyGrid("no sentiments to mix")
    if epsilon is None:
        epsilon = 1e-9 * float(f.scale)
    lam, value = maximin(payoff_matrix(f, sentiments, grid))
    if value <= epsilon:
        return None
    return ArbitrageResult(tuple(zip(sentiments, (float(x) for x in lam))), value)
