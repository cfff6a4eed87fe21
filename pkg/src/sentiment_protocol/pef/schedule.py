"""Evaluation schedules and the pool/withholding arithmetic built on them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil

from ..core import check_units, to_fraction
from ..errors import IndexOutOfRange, InvalidRatio, InvalidSpec
from .functions import PEFunction


@dataclass(frozen=True)
class ScheduleEntry:
    dt: int
    weight: Fraction

    def __post_init__(self):
        if int(self.dt) < 0:
            raise InvalidSpec("evaluation delays are non-negative")
        w = to_fraction(self.weight)
        if w <= 0:
            raise InvalidSpec(f"evaluation weight must be positive, got {self.weight}")
        object.__setattr__(self, "dt", int(self.dt))
        object.__setattr__(self, "weight", w)


@dataclass(frozen=True)
class EvaluationSchedule:
    """Performance evaluations after tally: delay since the previous event, and a weight.

    The function paid at evaluation ``i`` is the base function scaled by the
    ``i``-th weight.
    """

    entries: tuple[ScheduleEntry, ...]
    penalties_possible: bool = True

    def __post_init__(self):
        entries = tuple(
            e if isinstance(e, ScheduleEntry) else ScheduleEntry(*e) for e in self.entries
        )
        object.__setattr__(self, "entries", entries)

    @classmethod
    def single(cls, dt: int = 0) -> EvaluationSchedule:
        return cls((ScheduleEntry(dt, Fraction(1)),))

    @classmethod
    def halving(cls, n: int, dt: int) -> EvaluationSchedule:
        """``n`` evaluations ``dt`` apart with weights 1/2, 1/4, ..."""
        return cls(tuple(ScheduleEntry(dt, Fraction(1, 2**i)) for i in range(1, n + 1)))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def weights(self) -> list[Fraction]:
        return [e.weight for e in self.entries]

    @property
    def total_weight(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def offsets(self) -> list[int]:
        """Cumulative delay of each evaluation after the tally time."""
        out, t = [], 0
        for e in self.entries:
            t += e.dt
            out.append(t)
        return out

    def to_json(self) -> list[dict]:
        return [{"dt": e.dt, "weight": str(e.weight)} for e in self.entries]

    @classmethod
    def from_json(cls, items, penalties_possible: bool = True) -> EvaluationSchedule:
        return cls(
            tuple(ScheduleEntry(int(x["dt"]), to_fraction(x.get("weight", 1))) for x in items),
            penalties_possible,
        )


def required_pool(schedule: EvaluationSchedule, f: PEFunction, max_total_submissions: int) -> int:
    """Smallest reward pool (base units) that covers every scheduled evaluation."""
    if not schedule.entries:
        raise InvalidSpec("schedule is empty")
    per_token = schedule.total_weight * max(f.sup_bound(), Fraction(0))
    return check_units(ceil(per_token * int(max_total_submissions)))


def withhold_per_token(schedule: EvaluationSchedule, f: PEFunction) -> Fraction:
    """Share of each staked token kept back at tally to cover the worst penalty."""
    worst = max(Fraction(0), -f.inf_bound())
    return schedule.total_weight * worst


def withheld_tranches(schedule: EvaluationSchedule, f: PEFunction, stake: int) -> list[int]:
    """Per-evaluation withholding for one stake, each rounded up, capped at the stake."""
    worst = max(Fraction(0), -f.inf_bound())
    out, left = [], int(stake)
    for w in schedule.weights:
        t = min(ceil(w * worst * stake), left)
        out.append(t)
        left -= t
    return out


def scheduled_pef(f: PEFunction, i: int, schedule: EvaluationSchedule) -> PEFunction:
    """The function paid at the ``i``-th evaluation (1-based)."""
    if not 1 <= i <= len(schedule):
        raise IndexOutOfRange(f"evaluation {i} not in 1..{len(schedule)}")
    return f.scaled(schedule.entries[i - 1].weight)


def _ratio(x) -> Fraction:
    try:
        ratio = to_fraction(x)
    except (ValueError, ZeroDivisionError):
        raise InvalidRatio(f"ratio is not a number: {x!r}") from None
    if not 0 < ratio < 1:
        raise InvalidRatio(f"ratio must lie strictly between 0 and 1, got {x}")
    return ratio


def geometric_cumulative(total: int, x, n: int) -> int:
    """``floor(total * (1 - x**n))``: what the first ``n`` rounds spend together."""
    ratio = _ratio(x)
    if n < 0:
        raise IndexOutOfRange("round count must be non-negative")
    num, den = ratio.numerator**n, ratio.denominator**n
    return int(total) - (-(-int(total) * num // den))


def geometric_pool(total: int, x, i: int) -> int:
    """Pool for the ``i``-th round when ``total`` is spread as a geometric series.

    Ideally ``R_1 = total * (1 - x)`` and ``R_{i+1} = x * R_i``. Each round gets
    the increase of the floored running total, so every partial sum equals
    ``floor(total * (1 - x**n))`` exactly and stays below ``total``.
    """
    if i < 1:
        raise IndexOutOfRange("rounds are numbered from 1")
    return geometric_cumulative(total, x, i) - geometric_cumulative(total, x, i - 1)


def geometric_pools(total: int, x, n: int) -> list[int]:
    """``[geometric_pool(total, x, i) for i in 1..n]`` without recomputing powers."""
    ratio = _ratio(x)
    total = int(total)
    num, den = ratio.numerator, ratio.denominator
    pn, pd = 1, 1
    prev, out = 0, []
    for _ in range(n):
        pn, pd = pn * num, pd * den
        if total * pn <= pd:
            # total * x**i is at most one base unit from here on: nothing left to hand out
            out.append(total - 1 - prev if total else 0)
            out.extend([0] * (n - len(out)))
            break
        cum = total - (-(-total * pn // pd))
        out.append(cum - prev)
        prev = cum
    return out
