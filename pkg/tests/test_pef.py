from __future__ import annotations

import csv
import io
import math
from fractions import Fraction

import mpmath as mp
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentiment_protocol.core import Continuous, Discrete, Interval, Label
from sentiment_protocol.errors import (
    BadGrid,
    DeclaredBoundsViolated,
    IndexOutOfRange,
    InvalidPEF,
    InvalidRatio,
    OutcomeTypeMismatch,
    UnknownSentimentLabel,
)
from sentiment_protocol.pef import (
    ArctanBuySell,
    Constant,
    DiscreteMatch,
    EvaluationSchedule,
    RatingTriple,
    TabulatedDiscrete,
    curve_samples,
    geometric_cumulative,
    geometric_pool,
    geometric_pools,
    parse_grid,
    pef_from_json,
    required_pool,
    samples_to_csv,
    scheduled_pef,
    withheld_tranches,
    withhold_per_token,
)
from sentiment_protocol.pef.functions import HOLD_HI, HOLD_LO

mp.mp.dps = 50
U = 10**9


def mp_arctan(c, o, g):
    """Independent high-precision evaluation of the arctan buy/sell payoff."""
    c, o = mp.mpf(c), mp.mpf(o)
    if o == 1:
        return mp.mpf(0)
    sign = 1 if o > 1 else -1
    return 2 * c / mp.pi * sign * mp.atan(max(o - 1, 1 / o - 1)) * g


def mp_rating(o, kind):
    o = mp.mpf(o)
    if kind == "up":
        return min(mp.mpf(1), max(mp.mpf(0), o - 1))
    if kind == "down":
        return min(mp.mpf(1), max(mp.mpf(0), 1 / o - 1))
    if mp.mpf(10) / 11 <= o <= 1:
        return 5 * (mp.mpf(11) / 10 - 1 / o)
    if 1 <= o <= mp.mpf(11) / 10:
        return 5 * (mp.mpf(11) / 10 - o)
    return mp.mpf(0)


class TestConstant:
    def test_value_and_bounds(self):
        f = Constant("0.1")
        assert f.evaluate(Discrete("R"), "D") == 0.1
        assert f.evaluate_exact(None, "x") == Fraction(1, 10)
        assert f.sup_bound() == f.inf_bound() == Fraction(1, 10)
        assert f.scaled("1/2").c == Fraction(1, 20)

    def test_positive_c(self):
        for bad in ("0", "-1", "abc"):
            with pytest.raises(InvalidPEF):
                Constant(bad)


class TestDiscreteMatch:
    def test_rewards_the_winner(self):
        f = DiscreteMatch("0.1", ("R", "D"))
        assert f.evaluate_exact(Discrete("D"), "D") == Fraction(1, 10)
        assert f.evaluate_exact(Discrete("D"), "R") == 0
        assert (f.sup_bound(), f.inf_bound()) == (Fraction(1, 10), 0)

    def test_errors(self):
        f = DiscreteMatch("0.1", ("R", "D"))
        with pytest.raises(UnknownSentimentLabel):
            f.evaluate(Discrete("D"), "I")
        with pytest.raises(OutcomeTypeMismatch):
            f.evaluate(Continuous(1.0), "D")
        with pytest.raises(OutcomeTypeMismatch):
            f.evaluate(Discrete("I"), "D")
        with pytest.raises(UnknownSentimentLabel):
            f.evaluate(Discrete("D"), Interval(1.0, math.inf))


class TestArctan:
    f = ArctanBuySell("0.1")

    def test_doubling_pays_half_c(self):
        # oracle: (2c/pi) * atan(1) = c/2
        assert mp.almosteq(mp_arctan("0.1", 2, 1), mp.mpf("0.05"), 1e-45)
        assert self.f.evaluate_exact(Continuous(2.0), "buy") == Fraction(1, 20)
        assert self.f.evaluate_exact(Continuous(0.5), "buy") == Fraction(-1, 20)
        assert self.f.evaluate_exact(Continuous(0.5), "sell") == Fraction(1, 20)

    def test_interval_aliases(self):
        o = Continuous(1.7)
        assert self.f.evaluate(o, "(1,inf)") == self.f.evaluate(o, "buy")
        assert self.f.evaluate(o, "[0,1)") == self.f.evaluate(o, "sell")
        with pytest.raises(UnknownSentimentLabel):
            self.f.evaluate(o, "hold")

    def test_at_one_is_zero(self):
        assert self.f.evaluate(Continuous(1.0), "buy") == 0.0

    @pytest.mark.parametrize("o", [0.01, 0.3, 0.5, 0.9, 0.999999, 1.000001, 1.25, 2.0, 3.7, 100.0])
    def test_against_mpmath(self, o):
        for s, g in (("buy", 1), ("sell", -1)):
            got = self.f.evaluate(Continuous(o), s)
            want = mp_arctan("0.1", o, g)
            assert abs(got - float(want)) <= 1e-15 * 0.1 + 1e-13 * abs(float(want))

    def test_bounded_by_c(self):
        for o in (1e-12, 1e12):
            v = self.f.evaluate(Continuous(o), "buy")
            assert -0.1 <= v <= 0.1

    def test_rejects_large_c_and_discrete_outcomes(self):
        with pytest.raises(InvalidPEF):
            ArctanBuySell("1.5")
        with pytest.raises(OutcomeTypeMismatch):
            self.f.evaluate(Discrete("D"), "buy")

    def test_array_matches_scalar(self):
        grid = parse_grid("0.1:10:97")
        arr = self.f.evaluate_array(grid, "buy")
        assert list(arr) == pytest.approx([self.f.evaluate(Continuous(o), "buy") for o in grid], rel=1e-15, abs=1e-18)


class TestRating:
    f = RatingTriple("1000/9000000")

    def test_c(self):
        assert self.f.c == Fraction(1, 9000)

    def test_thresholds_are_exact(self):
        assert Fraction(HOLD_LO) >= Fraction(10, 11) > Fraction(math.nextafter(HOLD_LO, 0))
        assert Fraction(HOLD_HI) <= Fraction(11, 10) < Fraction(math.nextafter(HOLD_HI, 2))

    @pytest.mark.parametrize("o", [0.4, 0.5, 0.8, 0.95, 1.0, 1.05, 1.1, 1.5, 2.0, 2.5])
    def test_against_mpmath(self, o):
        for kind in ("up", "hold", "down"):
            got = self.f.evaluate(Continuous(o), kind) / float(self.f.c)
            want = float(mp_rating(o, kind))
            assert abs(got - want) <= 1e-12 * max(abs(want), 1e-3)

    def test_aliases(self):
        o = Continuous(1.3)
        for a, b in (("⇑", "up"), ("↑", "up"), ("⇔", "hold"), ("↔", "hold"), ("⇓", "down"), ("↓", "down")):
            assert self.f.evaluate(o, a) == self.f.evaluate(o, b)
        with pytest.raises(UnknownSentimentLabel):
            self.f.evaluate(o, "buy")

    def test_bounds(self):
        assert self.f.sup_bound() == self.f.c
        assert self.f.inf_bound() == 0


class TestTabulated:
    def test_bounds_checked(self):
        with pytest.raises(DeclaredBoundsViolated):
            TabulatedDiscrete({("R", "R"): "0.5"}, "0.1", "0")
        with pytest.raises(DeclaredBoundsViolated):
            TabulatedDiscrete({("R", "R"): "-2"}, "0", "-2")
        with pytest.raises(InvalidPEF):
            TabulatedDiscrete({("R", "R"): "0", ("D", "D"): "0"}, "0", "0")

    def test_json_round_trip(self):
        f = TabulatedDiscrete(
            {("R", "R"): "0.1", ("R", "D"): "-0.1", ("D", "R"): "-0.1", ("D", "D"): "0.1"}, "0.1", "-0.1"
        )
        g = pef_from_json(f.to_json())
        assert g.evaluate_exact(Discrete("D"), "R") == Fraction(-1, 10)
        assert g.to_json() == f.to_json()


def test_catalog_json():
    for obj in (
        {"variant": "constant", "c": "0.1"},
        {"variant": "discrete_match", "c": "0.1", "labels": ["R", "D"]},
        {"variant": "arctan_buy_sell", "c": "0.1"},
        {"variant": "rating_triple", "c": "1/9000"},
    ):
        f = pef_from_json(obj)
        assert pef_from_json(f.to_json()).to_json() == f.to_json()
        assert f.c == Fraction(obj["c"])
    with pytest.raises(InvalidPEF):
        pef_from_json({"variant": "nope"})
    with pytest.raises(InvalidPEF):
        pef_from_json({"variant": "constant"})


class TestSchedule:
    def test_required_pool_single(self):
        assert required_pool(EvaluationSchedule.single(), Constant("0.1"), 10_000 * U) == 1_000 * U

    def test_required_pool_halving(self):
        f = Constant("0.1")
        for n in range(1, 12):
            pool = required_pool(EvaluationSchedule.halving(n, 90), f, 10_000 * U)
            assert pool == math.ceil(Fraction(2**n - 1, 2**n) * Fraction(1, 10) * 10_000 * U)
            assert pool <= 1_000 * U

    def test_required_pool_ignores_negative_sup(self):
        f = TabulatedDiscrete({("R", "R"): "-0.1"}, "-0.1", "-0.1")
        assert required_pool(EvaluationSchedule.single(), f, 100) == 0

    def test_withholding(self):
        s = EvaluationSchedule.single()
        assert withhold_per_token(s, ArctanBuySell("0.1")) == Fraction(1, 10)
        assert withhold_per_token(s, Constant("0.1")) == 0
        assert withheld_tranches(s, ArctanBuySell("0.1"), 1000 * U) == [100 * U]
        two = EvaluationSchedule.from_json([{"dt": 1, "weight": "1/2"}, {"dt": 1, "weight": "1/4"}])
        assert withheld_tranches(two, ArctanBuySell("0.1"), 3) == [1, 1]
        # rounding up never withholds more than the stake
        assert withheld_tranches(two, ArctanBuySell("1"), 1) == [1, 0]

    def test_scheduled_pef(self):
        s = EvaluationSchedule.halving(3, 1)
        assert scheduled_pef(Constant("0.1"), 2, s).c == Fraction(1, 40)
        with pytest.raises(IndexOutOfRange):
            scheduled_pef(Constant("0.1"), 4, s)

    def test_offsets(self):
        s = EvaluationSchedule.from_json([{"dt": 5, "weight": 1}, {"dt": 7, "weight": 1}])
        assert s.offsets() == [5, 12]
        assert EvaluationSchedule.from_json(s.to_json(), s.penalties_possible) == s


class TestGeometric:
    def test_first_round(self):
        assert geometric_pool(100_000 * U, "0.99", 1) == 1_000 * U
        assert geometric_pool(100_000, 0.99, 1) == 1_000

    def test_partial_sums_are_floored_closed_form(self):
        total = 100_000 * U
        pools = geometric_pools(total, "0.99", 20)
        assert sum(pools) == math.floor(total * (1 - Fraction(99, 100) ** 20))
        assert pools == [geometric_pool(total, "0.99", i) for i in range(1, 21)]
        assert geometric_cumulative(total, "0.99", 20) == sum(pools)

    def test_ratio_validation(self):
        for bad in ("1", "0", "1.5", "x"):
            with pytest.raises(InvalidRatio):
                geometric_pool(100, bad, 1)
        with pytest.raises(IndexOutOfRange):
            geometric_pool(100, "0.5", 0)

    @given(st.integers(min_value=0, max_value=10**15), st.integers(min_value=1, max_value=99),
           st.integers(min_value=1, max_value=60))
    def test_pools_shrink_and_stay_below_total(self, total, pct, n):
        x = Fraction(pct, 100)
        pools = geometric_pools(total, x, n)
        assert all(p >= 0 for p in pools)
        assert sum(pools) <= max(total - 1, 0) or sum(pools) == 0
        # consecutive pools follow the ratio up to rounding
        for a, b in zip(pools, pools[1:]):
            assert abs(b - x * a) <= 2


class TestCurves:
    def test_grid(self):
        g = parse_grid("0.5:2:4")
        assert g == [0.5, 1.0, 1.5, 2.0]
        for bad in ("0:1:5", "1:0.5:3", "a:b:c", "1:2", "1:2:0"):
            with pytest.raises(BadGrid):
                parse_grid(bad)

    def test_csv(self):
        f = RatingTriple("0.1")
        text = samples_to_csv(curve_samples(f, Label("up"), parse_grid("1:3:5")))
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["outcome", "normalized_value"]
        assert [float(v) for _, v in rows[1:]] == pytest.approx([0.0, 0.5, 1.0, 1.0, 1.0])
