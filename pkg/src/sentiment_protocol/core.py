"""Shared primitives: logical time, token amounts, outcomes and sentiments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation, localcontext
from fractions import Fraction
from typing import Union

from .errors import (
    InvalidAmount,
    NegativeAmount,
    Overflow,
    OutcomeTypeMismatch,
    TooManyFractionalDigits,
)

MAX_TIMESTAMP = 2**64 - 1
MAX_BASE_UNITS = 2**128 - 1
DEFAULT_DECIMALS = 9

DAY = 86_400
QUARTER = 90 * DAY


# --------------------------------------------------------------------------
# time

def saturating_time_add(t: int, delta: int) -> int:
    """``t + delta`` clamped to the largest representable timestamp."""
    if t < 0 or delta < 0:
        raise ValueError("timestamps are unsigned")
    return min(t + delta, MAX_TIMESTAMP)


# --------------------------------------------------------------------------
# token amounts

def check_units(units: int) -> int:
    if units < 0:
        raise NegativeAmount(f"negative amount: {units}")
    if units > MAX_BASE_UNITS:
        raise Overflow(f"amount exceeds 128 bits: {units}")
    return units


def to_base_units(display: str, decimals: int = DEFAULT_DECIMALS) -> int:
    """Parse a non-negative decimal string into integer base units.

    >>> to_base_units("100", 9)
    100000000000
    """
    try:
        value = Decimal(str(display).strip())
    except InvalidOperation:
        raise InvalidAmount(f"not a decimal number: {display!r}") from None
    if not value.is_finite():
        raise InvalidAmount(f"not a finite amount: {display!r}")
    if value < 0:
        raise NegativeAmount(f"negative amount: {display!r}")
    if value.adjusted() > 60:
        raise Overflow(f"amount exceeds 128 bits: {display!r}")
    exponent = value.normalize().as_tuple().exponent
    if isinstance(exponent, int) and -exponent > decimals:
        raise TooManyFractionalDigits(
            f"{display!r} has more than {decimals} fractional digits"
        )
    # the default 28-digit context would round amounts near the 128-bit limit
    with localcontext() as ctx:
        ctx.prec = 200
        return check_units(int(value.scaleb(decimals)))


def from_base_units(units: int, decimals: int = DEFAULT_DECIMALS) -> str:
    """Render base units as a normalized decimal string (no exponent, no trailing zeros)."""
    sign = "-" if units < 0 else ""
    whole, frac = divmod(abs(units), 10**decimals)
    if frac == 0 or decimals == 0:
        return f"{sign}{whole}"
    digits = str(frac).rjust(decimals, "0").rstrip("0")
    return f"{sign}{whole}.{digits}"


@dataclass(frozen=True, order=True)
class TokenAmount:
    """Exact token quantity in integer base units."""

    base_units: int
    decimals: int = DEFAULT_DECIMALS

    def __post_init__(self):
        check_units(self.base_units)

    @classmethod
    def parse(cls, display: str, decimals: int = DEFAULT_DECIMALS) -> TokenAmount:
        return cls(to_base_units(display, decimals), decimals)

    def _same(self, other: TokenAmount) -> None:
        if self.decimals != other.decimals:
            raise ValueError("cannot mix token amounts with different decimals")

    def __add__(self, other: TokenAmount) -> TokenAmount:
        self._same(other)
        return TokenAmount(self.base_units + other.base_units, self.decimals)

    def __sub__(self, other: TokenAmount) -> TokenAmount:
        self._same(other)
        return TokenAmount(self.base_units - other.base_units, self.decimals)

    def __int__(self) -> int:
        return self.base_units

    def __str__(self) -> str:
        return from_base_units(self.base_units, self.decimals)


def to_fraction(value: Union[str, int, float, Fraction, Decimal]) -> Fraction:
    """Exact rational from user input.

    Floats go through ``repr`` so that ``0.1`` means one tenth rather than the
    nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"not a finite number: {value}")
        return Fraction(repr(value))
    return Fraction(str(value).strip())


# --------------------------------------------------------------------------
# outcomes

@dataclass(frozen=True)
class Discrete:
    label: str

    def to_json(self) -> dict:
        return {"discrete": self.label}


@dataclass(frozen=True)
class Continuous:
    """A positive real outcome, e.g. the ratio of two prices."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (math.isfinite(v) and v > 0):
            raise OutcomeTypeMismatch(f"continuous outcome must be a positive real, got {self.value!r}")
        object.__setattr__(self, "value", v)

    def to_json(self) -> dict:
        return {"continuous": repr(self.value)}


Outcome = Union[Discrete, Continuous]


def outcome_from_json(obj) -> Outcome:
    if isinstance(obj, (Discrete, Continuous)):
        return obj
    if "discrete" in obj:
        return Discrete(str(obj["discrete"]))
    if "continuous" in obj:
        return Continuous(float(obj["continuous"]))
    raise OutcomeTypeMismatch(f"unrecognized outcome: {obj!r}")


@dataclass(frozen=True)
class DiscreteOutcomes:
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels or len(set(self.labels)) != len(self.labels):
            raise ValueError("discrete outcome set needs distinct labels")

    def contains(self, outcome: Outcome) -> bool:
        return isinstance(outcome, Discrete) and outcome.label in self.labels

    def to_json(self) -> dict:
        return {"discrete": list(self.labels)}


@dataclass(frozen=True)
class ContinuousOutcomes:
    """The positive reals."""

    def contains(self, outcome: Outcome) -> bool:
        return isinstance(outcome, Continuous)

    def to_json(self) -> dict:
        return {"continuous": True}


OutcomeSet = Union[DiscreteOutcomes, ContinuousOutcomes]


def outcome_set_from_json(obj) -> OutcomeSet:
    if "discrete" in obj:
        return DiscreteOutcomes(tuple(str(x) for x in obj["discrete"]))
    if obj.get("continuous"):
        return ContinuousOutcomes()
    raise ValueError(f"unrecognized outcome set: {obj!r}")


# --------------------------------------------------------------------------
# sentiments

@dataclass(frozen=True)
class Label:
    label: str

    def encode(self) -> bytes:
        return self.label.encode("utf-8")

    def __str__(self) -> str:
        return self.label


def _fmt_real(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


@dataclass(frozen=True)
class Interval:
    """A real interval of outcomes; ``sell`` may be written ``[0,1)`` and ``buy`` ``(1,inf)``."""

    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ValueError(f"bad interval bounds {self.lo!r}, {self.hi!r}")
        if (math.isinf(lo) and self.lo_closed) or (math.isinf(hi) and self.hi_closed):
            raise ValueError("infinite endpoints must be open")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x: float) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    def encode(self) -> bytes:
        return str(self).encode("utf-8")

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{_fmt_real(self.lo)},{_fmt_real(self.hi)}{right}"


SentimentChoice = Union[Label, Interval]


def parse_choice(text: str) -> SentimentChoice:
    """``"D"`` -> Label, ``"(1,inf)"`` -> Interval."""
    if isinstance(text, (Label, Interval)):
        return text
    text = str(text).strip()
    if len(text) >= 5 and text[0] in "[(" and text[-1] in "])" and "," in text:
        lo, hi = text[1:-1].split(",", 1)
        try:
            return Interval(float(lo), float(hi), text[0] == "[", text[-1] == "]")
        except ValueError:
            pass
    return Label(text)


def canonical_encoding(choice: SentimentChoice) -> bytes:
    return choice.encode()


def interval_within(interval: Interval, outcomes: OutcomeSet) -> bool:
    """Whether an interval sentiment lies inside the continuous outcome set.

    A closed endpoint at zero is tolerated: it adds no attainable outcome.
    """
    return isinstance(outcomes, ContinuousOutcomes) and interval.lo >= 0
