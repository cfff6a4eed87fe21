"""Performance-evaluation functions: reward (or penalty) per staked token.

Each function maps an ``(outcome, sentiment)`` pair to a per-token value in
``[-1, inf)`` and declares finite closed-form bounds. The bounds drive reward
pool sizing (supremum) and stake withholding (infimum), so they are exact
``Fraction`` values, while ``evaluate`` returns a float because some
formulas are transcendental.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import ClassVar

import numpy as np

from ..core import (
    Continuous,
    Discrete,
    Interval,
    Label,
    Outcome,
    SentimentChoice,
    parse_choice,
    to_fraction,
)
from ..errors import (
    DeclaredBoundsViolated,
    InvalidPEF,
    OutcomeTypeMismatch,
    UnknownSentimentLabel,
)


def _ceil_double(q: Fraction) -> float:
    """Smallest double >= q."""
    x = float(q)
    return math.nextafter(x, math.inf) if Fraction(x) < q else x


def _floor_double(q: Fraction) -> float:
    """Largest double <= q."""
    x = float(q)
    return math.nextafter(x, -math.inf) if Fraction(x) > q else x


# comparing a double against these is the same as comparing it against the exact rationals
HOLD_LO = _ceil_double(Fraction(10, 11))
HOLD_HI = _floor_double(Fraction(11, 10))


def _positive(c, name="c") -> Fraction:
    try:
        value = to_fraction(c)
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidPEF(f"{name} is not a number: {c!r}") from exc
    if value <= 0:
        raise InvalidPEF(f"{name} must be positive, got {c}")
    return value


def _continuous(outcome: Outcome) -> float:
    if not isinstance(outcome, Continuous):
        raise OutcomeTypeMismatch(f"expected a positive real outcome, got {outcome!r}")
    return outcome.value


def _label(sentiment: SentimentChoice) -> str:
    if isinstance(sentiment, str):
        sentiment = parse_choice(sentiment)
    if not isinstance(sentiment, Label):
        raise UnknownSentimentLabel(f"expected a labelled sentiment, got {sentiment!r}")
    return sentiment.label


class PEFunction(ABC):
    variant: ClassVar[str]

    @abstractmethod
    def evaluate(self, outcome: Outcome, sentiment: SentimentChoice) -> float:
        """Reward per staked token; negative values are penalties."""

    def evaluate_exact(self, outcome: Outcome, sentiment: SentimentChoice) -> Fraction:
        """Exact rational value where the formula allows it, else the float made exact."""
        return Fraction(self.evaluate(outcome, sentiment))

    @abstractmethod
    def sup_bound(self) -> Fraction: ...

    @abstractmethod
    def inf_bound(self) -> Fraction: ...

    @abstractmethod
    def scaled(self, weight) -> PEFunction:
        """The same function multiplied by a positive weight."""

    @property
    @abstractmethod
    def scale(self) -> Fraction:
        """Normalizing constant used for plotting (the ``c`` parameter)."""

    @abstractmethod
    def default_sentiments(self) -> list[SentimentChoice]: ...

    @abstractmethod
    def default_outcomes(self) -> list[Outcome]: ...

    @abstractmethod
    def to_json(self) -> dict: ...

    outcome_independent: ClassVar[bool] = False
    continuous: ClassVar[bool] = False

    def evaluate_array(self, outcomes: np.ndarray, sentiment: SentimentChoice) -> np.ndarray:
        return np.array([self.evaluate(Continuous(o), sentiment) for o in outcomes])


def log_grid(lo: float = 0.01, hi: float = 100.0, points: int = 1001) -> list[Outcome]:
    return [Continuous(float(x)) for x in np.geomspace(lo, hi, points)]


@dataclass(frozen=True)
class Constant(PEFunction):
    """Flat reward ``c`` regardless of outcome and sentiment."""

    c: Fraction
    labels: tuple[str, ...] = ()
    variant: ClassVar[str] = "constant"
    outcome_independent: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "c", _positive(self.c))
        object.__setattr__(self, "labels", tuple(self.labels))

    def evaluate(self, outcome, sentiment) -> float:
        return float(self.c)

    def evaluate_exact(self, outcome, sentiment) -> Fraction:
        return self.c

    def sup_bound(self) -> Fraction:
        return self.c

    def inf_bound(self) -> Fraction:
        return self.c

    def scaled(self, weight) -> Constant:
        return Constant(self.c * to_fraction(weight), self.labels)

    @property
    def scale(self) -> Fraction:
        return self.c

    def default_sentiments(self):
        return [Label(x) for x in self.labels] or [Label("any")]

    def default_outcomes(self):
        return [Continuous(1.0)]

    def to_json(self) -> dict:
        out = {"variant": self.variant, "c": str(self.c)}
        if self.labels:
            out["labels"] = list(self.labels)
        return out


@dataclass(frozen=True)
class DiscreteMatch(PEFunction):
    """Reward ``c`` when the sentiment label names the realized outcome, else nothing."""

    c: Fraction
    labels: tuple[str, ...] = ()
    variant: ClassVar[str] = "discrete_match"

    def __post_init__(self):
        object.__setattr__(self, "c", _positive(self.c))
        object.__setattr__(self, "labels", tuple(self.labels))

    def _match(self, outcome, sentiment) -> bool:
        if not isinstance(outcome, Discrete):
            raise OutcomeTypeMismatch(f"expected a discrete outcome, got {outcome!r}")
        label = _label(sentiment)
        if self.labels:
            if label not in self.labels:
                raise UnknownSentimentLabel(label)
            if outcome.label not in self.labels:
                raise OutcomeTypeMismatch(f"outcome {outcome.label!r} not in {self.labels}")
        return label == outcome.label

    def evaluate(self, outcome, sentiment) -> float:
        return float(self.c) if self._match(outcome, sentiment) else 0.0

    def evaluate_exact(self, outcome, sentiment) -> Fraction:
        return self.c if self._match(outcome, sentiment) else Fraction(0)

    def sup_bound(self) -> Fraction:
        return self.c

    def inf_bound(self) -> Fraction:
        return Fraction(0)

    def scaled(self, weight) -> DiscreteMatch:
        return DiscreteMatch(self.c * to_fraction(weight), self.labels)

    @property
    def scale(self) -> Fraction:
        return self.c

    def default_sentiments(self):
        if not self.labels:
            raise InvalidPEF("discrete_match needs declared labels to enumerate sentiments")
        return [Label(x) for x in self.labels]

    def default_outcomes(self):
        if not self.labels:
            raise InvalidPEF("discrete_match needs declared labels to enumerate outcomes")
        return [Discrete(x) for x in self.labels]

    def to_json(self) -> dict:
        out = {"variant": self.variant, "c": str(self.c)}
        if self.labels:
            out["labels"] = list(self.labels)
        return out


_BUY = Interval(1.0, math.inf)
_SELL = Interval(0.0, 1.0, lo_closed=True)


@dataclass(frozen=True)
class ArctanBuySell(PEFunction):
    """Bounded, monotone buy/sell payoff on a price ratio ``o``.

    ``(2c/pi) * sgn(o-1) * arctan(max(o-1, 1/o-1)) * g(s)`` with
    ``g(buy) = 1`` and ``g(sell) = -1``. A doubling pays a buyer what a halving
    pays a seller. Bounds are the unattained limits ``+-c``.
    """

    c: Fraction
    variant: ClassVar[str] = "arctan_buy_sell"
    continuous: ClassVar[bool] = True

    def __post_init__(self):
        c = _positive(self.c)
        if c > 1:
            raise InvalidPEF("arctan_buy_sell needs c <= 1 so a provider loses at most the stake")
        object.__setattr__(self, "c", c)

    @staticmethod
    def direction(sentiment) -> int:
        if isinstance(sentiment, str):
            sentiment = parse_choice(sentiment)
        if isinstance(sentiment, Label):
            if sentiment.label == "buy":
                return 1
            if sentiment.label == "sell":
                return -1
        elif isinstance(sentiment, Interval):
            if sentiment.lo == 1 and math.isinf(sentiment.hi) and not sentiment.lo_closed:
                return 1
            if sentiment.lo == 0 and sentiment.hi == 1 and not sentiment.hi_closed:
                return -1
        raise UnknownSentimentLabel(f"expected buy or sell, got {sentiment!r}")

    @staticmethod
    def shape(o: float) -> float:
        """Buy-side value divided by ``c``, in (-1, 1)."""
        if o > 1:
            return 2.0 * math.atan(o - 1.0) / math.pi
        if o < 1:
            # 1/o - 1 written as (1-o)/o keeps relative precision near o = 1
            return -2.0 * math.atan((1.0 - o) / o) / math.pi
        return 0.0

    def evaluate(self, outcome, sentiment) -> float:
        return float(self.evaluate_exact(outcome, sentiment))

    def evaluate_exact(self, outcome, sentiment) -> Fraction:
        o = _continuous(outcome)
        g = self.direction(sentiment)
        value = self.c * Fraction(self.shape(o)) * g
        return min(max(value, -self.c), self.c)

    def evaluate_array(self, outcomes, sentiment) -> np.ndarray:
        o = np.asarray(outcomes, dtype=float)
        if np.any(~(o > 0)) or np.any(~np.isfinite(o)):
            raise OutcomeTypeMismatch("outcomes must be positive reals")
        g = self.direction(sentiment)
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.arctan(o - 1.0)
            down = -np.arctan((1.0 - o) / o)
        shape = np.where(o > 1, 2.0 * up / math.pi, np.where(o < 1, 2.0 * down / math.pi, 0.0))
        c = float(self.c)
        return np.clip(c * shape * g, -c, c)

    def sup_bound(self) -> Fraction:
        return self.c

    def inf_bound(self) -> Fraction:
        return -self.c

    def scaled(self, weight) -> ArctanBuySell:
        return ArctanBuySell(self.c * to_fraction(weight))

    @property
    def scale(self) -> Fraction:
        return self.c

    def default_sentiments(self):
        return [Label("buy"), Label("sell")]

    def default_outcomes(self):
        return log_grid()

    def to_json(self) -> dict:
        return {"variant": self.variant, "c": str(self.c)}


RATING_ALIASES = {
    "up": "up", "⇑": "up", "↑": "up",
    "hold": "hold", "⇔": "hold", "↔": "hold",
    "down": "down", "⇓": "down", "↓": "down",
}


@dataclass(frozen=True)
class RatingTriple(PEFunction):
    """Three-way stock rating (up, hold, down) on a price ratio ``o``.

    * up:   ``c * min(1, max(0, o - 1))``
    * down: ``c * min(1, max(0, 1/o - 1))``
    * hold: ``5c(1.1 - 1/o)`` on ``[10/11, 1]``, ``5c(1.1 - o)`` on ``[1, 1.1]``, else 0
    """

    c: Fraction
    variant: ClassVar[str] = "rating_triple"
    continuous: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "c", _positive(self.c))

    @staticmethod
    def kind(sentiment) -> str:
        try:
            return RATING_ALIASES[_label(sentiment)]
        except KeyError:
            raise UnknownSentimentLabel(f"expected up, hold or down, got {sentiment!r}") from None

    @staticmethod
    def shape(o: float, kind: str) -> float:
        """Value divided by ``c``."""
        if kind == "up":
            return min(1.0, max(0.0, o - 1.0))
        if kind == "down":
            return min(1.0, max(0.0, 1.0 / o - 1.0))
        if HOLD_LO <= o <= 1.0:
            return max(0.0, 5.0 * (1.1 - 1.0 / o))
        if 1.0 < o <= HOLD_HI:
            return max(0.0, 5.0 * (1.1 - o))
        return 0.0

    def evaluate(self, outcome, sentiment) -> float:
        return float(self.evaluate_exact(outcome, sentiment))

    def evaluate_exact(self, outcome, sentiment) -> Fraction:
        o = _continuous(outcome)
        return self.c * Fraction(self.shape(o, self.kind(sentiment)))

    def evaluate_array(self, outcomes, sentiment) -> np.ndarray:
        o = np.asarray(outcomes, dtype=float)
        if np.any(~(o > 0)) or np.any(~np.isfinite(o)):
            raise OutcomeTypeMismatch("outcomes must be positive reals")
        kind = self.kind(sentiment)
        if kind == "up":
            shape = np.clip(o - 1.0, 0.0, 1.0)
        elif kind == "down":
            shape = np.clip(1.0 / o - 1.0, 0.0, 1.0)
        else:
            left = np.maximum(0.0, 5.0 * (1.1 - 1.0 / o))
            right = np.maximum(0.0, 5.0 * (1.1 - o))
            shape = np.where(
                (o >= HOLD_LO) & (o <= 1.0), left, np.where((o > 1.0) & (o <= HOLD_HI), right, 0.0)
            )
        return float(self.c) * shape

    def sup_bound(self) -> Fraction:
        return self.c

    def inf_bound(self) -> Fraction:
        return Fraction(0)

    def scaled(self, weight) -> RatingTriple:
        return RatingTriple(self.c * to_fraction(weight))

    @property
    def scale(self) -> Fraction:
        return self.c

    def default_sentiments(self):
        return [Label("up"), Label("hold"), Label("down")]

    def default_outcomes(self):
        return log_grid()

    def to_json(self) -> dict:
        return {"variant": self.variant, "c": str(self.c)}


@dataclass(frozen=True)
class TabulatedDiscrete(PEFunction):
    """Explicit payoff table over discrete outcomes with declared bounds.

    ``matrix`` maps ``(outcome_label, sentiment_label)`` to the per-token value.
    """

    matrix: dict = field(hash=False)
    declared_sup: Fraction = Fraction(0)
    declared_inf: Fraction = Fraction(0)
    variant: ClassVar[str] = "tabulated"

    def __post_init__(self):
        try:
            matrix = {(str(o), str(s)): to_fraction(v) for (o, s), v in self.matrix.items()}
            sup, inf = to_fraction(self.declared_sup), to_fraction(self.declared_inf)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidPEF(f"bad tabulated entry: {exc}") from exc
        if not matrix:
            raise InvalidPEF("tabulated function needs at least one entry")
        if inf < -1:
            raise DeclaredBoundsViolated(f"declared inf {inf} is below -1")
        if inf > sup:
            raise DeclaredBoundsViolated(f"declared inf {inf} exceeds declared sup {sup}")
        for key, v in matrix.items():
            if not inf <= v <= sup:
                raise DeclaredBoundsViolated(f"entry {key} = {v} outside [{inf}, {sup}]")
        rows = {o for o, _ in matrix}
        cols = {s for _, s in matrix}
        if len(matrix) != len(rows) * len(cols):
            raise InvalidPEF("tabulated matrix must define every (outcome, sentiment) pair")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "declared_sup", sup)
        object.__setattr__(self, "declared_inf", inf)

    @property
    def outcome_labels(self) -> list[str]:
        return sorted({o for o, _ in self.matrix})

    @property
    def sentiment_labels(self) -> list[str]:
        return sorted({s for _, s in self.matrix})

    def evaluate_exact(self, outcome, sentiment) -> Fraction:
        if not isinstance(outcome, Discrete):
            raise OutcomeTypeMismatch(f"expected a discrete outcome, got {outcome!r}")
        label = _label(sentiment)
        if label not in self.sentiment_labels:
            raise UnknownSentimentLabel(label)
        try:
            return self.matrix[(outcome.label, label)]
        except KeyError:
            raise OutcomeTypeMismatch(f"outcome {outcome.label!r} not tabulated") from None

    def evaluate(self, outcome, sentiment) -> float:
        return float(self.evaluate_exact(outcome, sentiment))

    def sup_bound(self) -> Fraction:
        return self.declared_sup

    def inf_bound(self) -> Fraction:
        return self.declared_inf

    def scaled(self, weight) -> TabulatedDiscrete:
        w = to_fraction(weight)
        return TabulatedDiscrete(
            {k: v * w for k, v in self.matrix.items()}, self.declared_sup * w, self.declared_inf * w
        )

    @property
    def scale(self) -> Fraction:
        return max(abs(self.declared_sup), abs(self.declared_inf)) or Fraction(1)

    def default_sentiments(self):
        return [Label(s) for s in self.sentiment_labels]

    def default_outcomes(self):
        return [Discrete(o) for o in self.outcome_labels]

    def to_json(self) -> dict:
        table: dict[str, dict[str, str]] = {}
        for (o, s), v in sorted(self.matrix.items()):
            table.setdefault(o, {})[s] = str(v)
        return {
            "variant": self.variant,
            "matrix": table,
            "sup": str(self.declared_sup),
            "inf": str(self.declared_inf),
        }


CATALOG = {cls.variant: cls for cls in (Constant, DiscreteMatch, ArctanBuySell, RatingTriple, TabulatedDiscrete)}


def pef_from_json(obj: dict) -> PEFunction:
    """Build a function from its JSON form, e.g. ``{"variant": "arctan_buy_sell", "c": "0.05"}``."""
    variant = obj.get("variant")
    if variant not in CATALOG:
        raise InvalidPEF(f"unknown variant {variant!r}; expected one of {sorted(CATALOG)}")
    if variant == "tabulated":
        matrix = {
            (o, s): v for o, row in obj["matrix"].items() for s, v in row.items()
        }
        return TabulatedDiscrete(matrix, obj["sup"], obj["inf"])
    if "c" not in obj:
        raise InvalidPEF(f"{variant} needs a 'c' parameter")
    if variant in ("constant", "discrete_match"):
        return CATALOG[variant](obj["c"], tuple(obj.get("labels", ())))
    return CATALOG[variant](obj["c"])


def evaluate(f: PEFunction, outcome: Outcome, sentiment: SentimentChoice) -> float:
    return f.evaluate(outcome, sentiment)


def sup_bound(f: PEFunction) -> Fraction:
    return f.sup_bound()


def inf_bound(f: PEFunction) -> Fraction:
    return f.inf_bound()
