"""Shared builders for the test suite."""

from __future__ import annotations

import random
from fractions import Fraction
from math import ceil, floor

from sentiment_protocol.core import DAY, QUARTER, Continuous, Discrete
from sentiment_protocol.engine import PHASE_RANK, Phase, PollEngine, PollSpec
from sentiment_protocol.ledger import Ledger, TokenPolicy
from sentiment_protocol.oracle import Oracle, OutcomeFeed
from sentiment_protocol.pef import required_pool
from sentiment_protocol.sim import Simulation

UNIT = 10**9
WINDOW_END = 10 * DAY - 1
TALLY = WINDOW_END + DAY


def spec_json(pef: dict, *, outcomes=None, sentiments=None, dt=0, schedule=None, max_total="10000",
              min_total="1000", penalties=True, topic="topic", **extra) -> dict:
    obj = {
        "topic": topic,
        "outcomes": outcomes or {"discrete": ["R", "D"]},
        "sentiments": sentiments or ["R", "D"],
        "staking": {"token": "ETH", "start": 0, "end": WINDOW_END, "min": min_total, "max": max_total},
        "dt0": DAY,
        "schedule": schedule or [{"dt": dt, "weight": "1"}],
        "penalties_possible": penalties,
        "pef": pef,
        "pollster": "pollster",
    }
    obj.update(extra)
    return obj


def simulation(balances: dict[str, str], feeds=(), decimals: int = 9) -> Simulation:
    sim = Simulation()
    sim.apply({"op": "create_token", "id": "ETH", "decimals": decimals, "rule": {"kind": "free"}})
    for account, amount in balances.items():
        sim.apply({"op": "mint", "token": "ETH", "account": account, "amount": amount})
    for feed in feeds:
        sim.apply({"op": "register_feed", "feed": feed})
    return sim


def feed(topic: str, at: int, outcome: dict) -> dict:
    return {"topic": topic, "finalized_at": at, "entries": [[at, outcome]]}


# --------------------------------------------------------------------------
# randomized lifecycles

PEF_CHOICES = ("constant", "discrete_match", "arctan_buy_sell", "rating_triple")


def random_lifecycle(rng: random.Random) -> dict:
    """Run one random poll to completion directly on the engine and check invariants.

    Returns a summary used by the callers for extra assertions.
    """
    variant = rng.choice(PEF_CHOICES)
    c = Fraction(rng.randint(1, 200), 1000)
    n_evals = rng.randint(1, 3)
    weights = [Fraction(1, 2**i) for i in range(1, n_evals + 1)] if n_evals > 1 else [Fraction(1)]
    offsets = [rng.choice([0, DAY, QUARTER]) for _ in range(n_evals)]

    if variant in ("constant", "discrete_match"):
        labels = ["R", "D", "I"][: rng.randint(2, 3)]
        outcomes = {"discrete": labels}
        sentiments = labels
        pef = {"variant": variant, "c": str(c), "labels": labels}
        realized = [Discrete(rng.choice(labels)) for _ in range(n_evals)]
    elif variant == "arctan_buy_sell":
        outcomes = {"continuous": True}
        sentiments = ["(1,inf)", "[0,1)"]
        pef = {"variant": variant, "c": str(c)}
        realized = [Continuous(round(rng.lognormvariate(0, 0.7), 6) or 1.0) for _ in range(n_evals)]
    else:
        outcomes = {"continuous": True}
        sentiments = ["up", "hold", "down"]
        pef = {"variant": variant, "c": str(c)}
        realized = [Continuous(round(rng.lognormvariate(0, 0.2), 6) or 1.0) for _ in range(n_evals)]

    decimals = rng.choice([0, 2, 6, 9])
    scale = 10**decimals
    max_total = rng.randint(1, 10_000)
    min_total = rng.randint(0, max_total // 2)
    ledger = Ledger()
    ledger.create_token(TokenPolicy("TOK", decimals))
    oracle = Oracle()
    engine = PollEngine(ledger, oracle)

    spec = PollSpec.from_json(
        {
            "topic": "t", "outcomes": outcomes, "sentiments": sentiments,
            "staking": {"token": "TOK", "start": 0, "end": WINDOW_END,
                        "min": str(min_total), "max": str(max_total)},
            "dt0": rng.choice([0, DAY]),
            "schedule": [{"dt": dt, "weight": str(w)} for dt, w in zip(offsets, weights)],
            "pef": pef, "pollster": "pollster",
        },
        decimals,
    )
    due = [spec.evaluation_at(k) for k in range(1, n_evals + 1)]
    entries, seen = [], set()
    for t, o in zip(due, realized):
        if t in seen:
            entries[-1] = (t, o)
        else:
            entries.append((t, o))
            seen.add(t)
    oracle.register_feed(OutcomeFeed("t", tuple(entries), due[0]))
    need = required_pool(spec.schedule, spec.pef, spec.staking.max_total)
    deposit = need + rng.randint(0, scale)
    ledger.mint("TOK", "pollster", deposit + rng.randint(0, 5 * scale))

    accounts = [f"a{i}" for i in range(rng.randint(1, 6))]
    cap = spec.staking.max_total
    for a in accounts:
        ledger.mint("TOK", a, rng.randint(0, 2 * cap // len(accounts) + 1))
    supply = ledger.total_supply("TOK")
    before = {a: ledger.balance("TOK", a) for a in accounts + ["pollster"]}

    pid = engine.create_poll(spec, deposit, 0)
    now = 0
    staked = 0
    for a in accounts:
        for _ in range(rng.randint(0, 2)):
            room = cap - staked
            have = ledger.balance("TOK", a)
            if room <= 0 or have <= 0:
                break
            stake = rng.randint(1, min(room, have))
            now += rng.randint(0, DAY)
            now = min(now, WINDOW_END)
            engine.submit(pid, a, rng.choice(sentiments), stake, now)
            staked += stake

    result = engine.tally(pid, spec.tally_at, None)
    if not result.voided:
        for k in range(1, n_evals + 1):
            engine.evaluate_performance(pid, k, due[k - 1])
    engine.close_poll(pid, max(due[-1], spec.tally_at))
    poll = engine.poll(pid)
    report = engine.report(pid)

    # conservation: supply unchanged, every account plus escrow sums to it, escrow empty
    assert ledger.is_conserved()
    assert ledger.total_supply("TOK") == supply
    assert ledger.escrow(pid).total == 0
    assert sum(ledger.balance("TOK", a) for a in accounts + ["pollster"]) == supply
    # solvency: rewards never exceed the deposited pool
    assert report.totals["pool_spent"] <= deposit
    # forward-only phases
    ranks = [PHASE_RANK[Phase(e["phase"])] for e in engine.log.of_kind("phase")]
    assert ranks == sorted(ranks)
    assert poll.phase is Phase.CLOSED
    # per-submission settlement and proportionality to stake
    worst = max(Fraction(0), -spec.pef.inf_bound())
    for sub in poll.submissions:
        if result.voided:
            assert sub.net == 0
            continue
        expected, left = 0, sub.stake
        for w, o, pay in zip(weights, poll.outcomes, sub.payouts):
            # withholding is rounded up per evaluation and cannot exceed what is still staked
            tranche = min(ceil(w * worst * sub.stake), left)
            left -= tranche
            v = w * spec.pef.evaluate_exact(o, sub.sentiment)
            assert pay.value_per_token == v
            expected += floor(v * sub.stake) if v >= 0 else -min(tranche, ceil(-v * sub.stake))
        assert sub.net == expected
        assert abs(sub.net - sum(p.value_per_token for p in sub.payouts) * sub.stake) <= n_evals
    # the pollster gets back everything not paid out
    delta_pollster = ledger.balance("TOK", "pollster") - before["pollster"]
    assert delta_pollster == -sum(sub.net for sub in poll.submissions)
    return {"variant": variant, "voided": result.voided, "submissions": len(poll.submissions)}
