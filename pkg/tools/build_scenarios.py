"""Regenerate the bundled scenario files, example specs and golden reports.

    python3 tools/build_scenarios.py

Fixture values (stakes, price ratios, keys, nonces) are fixed here so the
generated JSON is stable; rerunning this script is a no-op unless it changes.
"""

from __future__ import annotations

import hashlib
import json
import random
from datetime import date
from pathlib import Path

from sentiment_protocol.core import DAY, QUARTER, Label
from sentiment_protocol.pef import geometric_pool
from sentiment_protocol.scenarios import SCENARIO_DIR, write_golden
from sentiment_protocol.sealing import PollKeyPair, seal

EPOCH = date(2017, 12, 1)
SPECS = SCENARIO_DIR / "specs"


def at(d: date) -> int:
    return (d - EPOCH).days * DAY


def nonce(*parts: str) -> str:
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


WINDOW_END = at(date(2017, 12, 11)) - 1  # 2017-12-10 inclusive
TALLY = WINDOW_END + DAY


def staking(token: str, max_total: str, min_total: str = "1000", start: int = 0, end: int = WINDOW_END) -> dict:
    return {"token": token, "start": start, "end": end, "min": min_total, "max": max_total}


def election2020() -> dict:
    keys = PollKeyPair.generate(seed=b"election2020")
    eval_dt = 1071 * DAY
    spec = {
        "topic": "us-president-2020",
        "outcomes": {"discrete": ["R", "D"]},
        "sentiments": ["R", "D"],
        "staking": staking("ETH", "10000"),
        "dt0": DAY,
        "schedule": [{"dt": eval_dt, "weight": "1"}],
        "penalties_possible": False,
        "pef": {"variant": "discrete_match", "c": "0.1", "labels": ["R", "D"]},
        "pollster": "pollster",
        "sealed": True,
        "seal_key": keys.public.hex(),
    }
    feed = {
        "topic": "us-president-2020",
        "finalized_at": at(date(2020, 11, 16)),
        "entries": [[at(date(2020, 11, 3)), {"discrete": "D"}]],
    }
    voters = [("alice", "D", "3000", 1), ("bob", "R", "2000", 2), ("carol", "D", "1500", 4), ("dave", "R", "1000", 9)]
    cmds = [
        {"op": "create_token", "id": "ETH", "decimals": 9, "rule": {"kind": "free"}},
        {"op": "mint", "token": "ETH", "account": "pollster", "amount": "1500"},
    ]
    for name, _, _, _ in voters + [("eve", "D", "500", 5)]:
        cmds.append({"op": "mint", "token": "ETH", "account": name, "amount": "5000"})
    cmds.append({"op": "register_feed", "feed": feed, "outcomes": spec["outcomes"]})
    cmds.append({"op": "create_poll", "ref": "election", "spec": spec, "deposit": "1000", "at": 0})
    for name, choice, stake, day in voters:
        cmds.append({
            "op": "submit", "poll": "election", "account": name, "choice": choice, "stake": stake,
            "nonce": nonce("election2020", name), "at": day * DAY,
        })
    # a submission whose ciphertext was damaged in transit: accepted, then refunded at tally
    sealed = seal(Label("D"), bytes.fromhex(nonce("election2020", "eve")), keys.public)
    body = bytearray(sealed.ciphertext)
    body[-1] ^= 0x01
    damaged = type(sealed)(bytes(body), sealed.commitment).to_json()
    cmds.append({"op": "submit", "poll": "election", "account": "eve", "sealed": damaged, "stake": "500", "at": 9 * DAY + 3600})
    cmds.append({"op": "submit", "poll": "election", "account": "eve", "choice": "D", "stake": "100",
                 "nonce": nonce("late"), "at": WINDOW_END + 1, "expect_error": "wrong_phase"})
    cmds.append({"op": "tally", "poll": "election", "reveal_key": keys.private.hex(), "at": TALLY - 1,
                 "expect_error": "too_early"})
    cmds.append({"op": "tally", "poll": "election", "reveal_key": keys.private.hex(), "at": TALLY})
    cmds.append({"op": "evaluate", "poll": "election", "k": 1, "at": TALLY + eval_dt})
    cmds.append({"op": "close", "poll": "election"})
    return {
        "name": "election2020",
        "description": "Sealed two-candidate poll with a flat reward for backing the winner; "
                       "evaluated 1071 days after the tally.",
        "epoch": EPOCH.isoformat(),
        "reveal_key": keys.private.hex(),
        "reports": ["election"],
        "commands": cmds,
    }


def tesla_buy_sell() -> dict:
    eval_at = at(date(2018, 5, 1))
    topic = "TSLA-ratio-2017-11-01-to-2018-05-01"
    spec = {
        "topic": topic,
        "outcomes": {"continuous": True},
        "sentiments": ["(1,inf)", "[0,1)"],
        "staking": staking("ETH", "10000"),
        "dt0": DAY,
        "schedule": [{"dt": eval_at - TALLY, "weight": "1"}],
        "pef": {"variant": "arctan_buy_sell", "c": "0.1"},
        "pollster": "pollster",
    }
    # fixture only: no realized ratio is given, 1.25 means the price rose 25 %
    feed = {"topic": topic, "finalized_at": eval_at, "entries": [[eval_at, {"continuous": "1.25"}]]}
    cmds = [
        {"op": "create_token", "id": "ETH", "decimals": 9, "rule": {"kind": "free"}},
        {"op": "mint", "token": "ETH", "account": "pollster", "amount": "2000"},
    ]
    for name in ("alice", "bob", "carol", "dave"):
        cmds.append({"op": "mint", "token": "ETH", "account": name, "amount": "5000"})
    cmds.append({"op": "register_feed", "feed": feed, "outcomes": spec["outcomes"]})
    cmds.append({"op": "create_poll", "ref": "tesla", "spec": spec, "deposit": "1000", "at": 0})
    void_spec = dict(spec, topic=topic, staking=staking("ETH", "10000", min_total="1000"))
    cmds.append({"op": "create_poll", "ref": "thin", "spec": void_spec, "deposit": "1000"})
    for name, choice, stake, day in [
        ("bob", "(1,inf)", "3000", 1), ("alice", "[0,1)", "1000", 2),
        ("carol", "(1,inf)", "500", 3), ("dave", "[0,1)", "2000", 6),
    ]:
        cmds.append({"op": "submit", "poll": "tesla", "account": name, "choice": choice, "stake": stake, "at": day * DAY})
    cmds.append({"op": "submit", "poll": "thin", "account": "alice", "choice": "(1,inf)", "stake": "200", "at": 7 * DAY})
    cmds.append({"op": "submit", "poll": "tesla", "account": "dave", "choice": "hold", "stake": "1",
                 "at": 8 * DAY, "expect_error": "invalid_choice"})
    cmds.append({"op": "tally", "poll": "tesla", "at": TALLY})
    cmds.append({"op": "tally", "poll": "thin"})
    cmds.append({"op": "close", "poll": "thin"})
    cmds.append({"op": "evaluate", "poll": "tesla", "k": 1, "at": eval_at})
    cmds.append({"op": "close", "poll": "tesla"})
    return {
        "name": "tesla_buy_sell",
        "description": "Buy/sell poll on a price ratio with bounded arctan payoffs and penalties; "
                       "the realized ratio 1.25 is a fixture. A second poll misses its minimum and is voided.",
        "epoch": EPOCH.isoformat(),
        "reports": ["tesla", "thin"],
        "commands": cmds,
    }


def governance_dao(rounds: int = 20) -> dict:
    rng = random.Random(20)
    voters = ["v1", "v2", "v3", "v4", "v5"]
    cmds = [
        {"op": "create_token", "id": "GOV", "decimals": 9, "rule": {"kind": "free"}},
        {"op": "mint", "token": "GOV", "account": "treasury", "amount": "100000"},
    ]
    for v in voters:
        cmds.append({"op": "mint", "token": "GOV", "account": v, "amount": "2000"})
    for i in range(1, rounds + 1):
        start = (i - 1) * 7 * DAY
        end = start + 5 * DAY - 1
        template = {
            "topic": f"proposal-{i}",
            "outcomes": {"discrete": ["yes", "no"]},
            "sentiments": ["yes", "no"],
            "staking": staking("GOV", "10000", min_total="100", start=start, end=end),
            "dt0": DAY,
            "schedule": [{"dt": 0, "weight": "1"}],
            "penalties_possible": False,
            "pollster": "treasury",
            "policy_hook": "execute_decision",
        }
        ref = f"round{i}"
        cmds.append({"op": "governance_round", "ref": ref, "token": "GOV", "round": i, "template": template,
                     "total_reserve": "100000", "x": "0.99", "at": start})
        if i == 7:
            ballots = [("v1", "yes", 300), ("v2", "no", 300)]  # a tie executes nothing
        else:
            ballots = [(v, rng.choice(["yes", "no"]), 10 * rng.randint(5, 50)) for v in voters if rng.random() < 0.8]
        for j, (v, choice, stake) in enumerate(ballots):
            cmds.append({"op": "submit", "poll": ref, "account": v, "choice": choice, "stake": str(stake),
                         "at": start + (j + 1) * 3600})
        cmds.append({"op": "tally", "poll": ref, "at": end + DAY})
        cmds.append({"op": "evaluate", "poll": ref, "k": 1})
        cmds.append({"op": "close", "poll": ref})
    return {
        "name": "governance_dao",
        "description": f"{rounds} governance votes with flat rewards funded by a geometric reserve "
                       "(100,000 tokens, x = 0.99); winners are executed by a policy hook.",
        "epoch": EPOCH.isoformat(),
        "reports": [f"round{i}" for i in range(1, rounds + 1)],
        "commands": cmds,
    }


RATIOS = ["1.5", "0.95", "1.02", "0.7", "2.5", "1", "1.08", "0.4", "1.2", "0.9"]


def rating_agency() -> dict:
    rng = random.Random(42)
    per_poll = geometric_pool(100_000, "0.99", 1) // 10  # 1000 tokens over 10 stocks
    eval_at = TALLY + QUARTER
    cmds = [
        {"op": "create_token", "id": "RATE", "decimals": 9,
         "rule": {"kind": "quarterly_allowance", "fraction": "1/10"}, "reward_lots_free": True},
        {"op": "mint", "token": "RATE", "account": "agency", "amount": "100000"},
    ]
    users = [f"u{i}" for i in range(1, 10)]
    for u in users:
        cmds.append({"op": "mint", "token": "RATE", "account": u, "amount": "100000"})
    stocks = [f"STOCK{i:02d}" for i in range(1, 11)]
    for stock, ratio in zip(stocks, RATIOS):
        feed = {"topic": stock, "finalized_at": eval_at, "entries": [[eval_at, {"continuous": ratio}]]}
        cmds.append({"op": "register_feed", "feed": feed, "outcomes": {"continuous": True}})
    for stock in stocks:
        spec = {
            "topic": stock,
            "outcomes": {"continuous": True},
            "sentiments": ["⇑", "⇔", "⇓"],
            "staking": staking("RATE", "900000", min_total="0"),
            "dt0": DAY,
            "schedule": [{"dt": QUARTER, "weight": "1"}],
            "penalties_possible": False,
            "pef": {"variant": "rating_triple", "c": "1000/9000000"},
            "pollster": "agency",
        }
        cmds.append({"op": "create_poll", "ref": stock, "spec": spec, "deposit": str(per_poll), "at": 0})
    t = DAY
    for u in users:
        picks = rng.sample(stocks, rng.randint(3, 6))
        for stock in picks:
            stake = 1000 * rng.randint(1, 15)
            cmds.append({"op": "submit", "poll": stock, "account": u, "choice": rng.choice(["⇑", "⇔", "⇓"]),
                         "stake": str(stake), "at": t})
            t += 3600
    for stock in stocks:
        cmds.append({"op": "tally", "poll": stock, "at": TALLY})
    for stock in stocks:
        cmds.append({"op": "evaluate", "poll": stock, "k": 1, "at": eval_at})
        cmds.append({"op": "close", "poll": stock})
    # originated tokens move at most 10 % per quarter; earned ones are spent first and move freely
    cmds.append({"op": "transfer", "token": "RATE", "from": "u1", "to": "u2", "amount": "10000"})
    cmds.append({"op": "transfer", "token": "RATE", "from": "u1", "to": "u2", "amount": "5000",
                 "expect_error": "allowance_exhausted"})
    cmds.append({"op": "transfer", "token": "RATE", "from": "u1", "to": "u2", "amount": "5000",
                 "at": eval_at + QUARTER})
    return {
        "name": "rating_agency",
        "description": "Ten parallel three-way stock-rating polls sharing one restricted token and a "
                       "1000-token round pool split evenly; c = 1000/(10*900,000).",
        "epoch": EPOCH.isoformat(),
        "reports": stocks,
        "commands": cmds,
    }


def multi_pe() -> dict:
    topic = "TSLA-quarterly"
    e1 = TALLY + QUARTER
    e2 = e1 + QUARTER
    spec = {
        "topic": topic,
        "outcomes": {"continuous": True},
        "sentiments": ["(1,inf)", "[0,1)"],
        "staking": staking("ETH", "10000"),
        "dt0": DAY,
        "schedule": [{"dt": QUARTER, "weight": "1/2"}, {"dt": QUARTER, "weight": "1/4"}],
        "pef": {"variant": "arctan_buy_sell", "c": "0.1"},
        "pollster": "pollster",
    }
    feed = {"topic": topic, "finalized_at": e1,
            "entries": [[e1, {"continuous": "1.2"}], [e2, {"continuous": "0.9"}]]}
    cmds = [
        {"op": "create_token", "id": "ETH", "decimals": 9, "rule": {"kind": "free"}},
        {"op": "mint", "token": "ETH", "account": "pollster", "amount": "1000"},
    ]
    for name in ("alice", "bob", "carol"):
        cmds.append({"op": "mint", "token": "ETH", "account": name, "amount": "5000"})
    cmds.append({"op": "register_feed", "feed": feed, "outcomes": spec["outcomes"]})
    # deposit the single-evaluation pool; the halving weights need only 3/4 of it
    cmds.append({"op": "create_poll", "ref": "multi", "spec": spec, "deposit": "1000", "at": 0})
    for name, choice, stake, day in [("bob", "(1,inf)", "2000", 1), ("alice", "[0,1)", "1000", 2),
                                     ("carol", "(1,inf)", "1000", 3)]:
        cmds.append({"op": "submit", "poll": "multi", "account": name, "choice": choice, "stake": stake,
                     "at": day * DAY})
    cmds.append({"op": "tally", "poll": "multi", "at": TALLY})
    cmds.append({"op": "evaluate", "poll": "multi", "k": 1, "at": e1})
    cmds.append({"op": "close", "poll": "multi", "expect_error": "wrong_phase"})
    cmds.append({"op": "evaluate", "poll": "multi", "k": 2, "at": e2})
    cmds.append({"op": "close", "poll": "multi"})
    return {
        "name": "multi_pe",
        "description": "Two quarterly evaluations weighted 1/2 and 1/4 of a bounded arctan payoff; "
                       "funded with the single-evaluation pool.",
        "epoch": EPOCH.isoformat(),
        "reports": ["multi"],
        "commands": cmds,
    }


def first(scenario: dict, op: str) -> dict:
    return next(c for c in scenario["commands"] if c["op"] == op)


def example_specs() -> dict[str, dict]:
    """Stand-alone poll and function files for the command line."""
    base = {
        "topic": "us-president-2020",
        "outcomes": {"discrete": ["R", "D"]},
        "sentiments": ["R", "D"],
        "staking": staking("ETH", "10000"),
        "dt0": DAY,
        "schedule": [{"dt": 0, "weight": "1"}],
        "penalties_possible": False,
        "pollster": "pollster",
    }
    return {
        "constant_poll": dict(base, pef={"variant": "constant", "c": "0.1", "labels": ["R", "D"]}),
        "election_poll": dict(base, schedule=[{"dt": 1071 * DAY, "weight": "1"}],
                             pef={"variant": "discrete_match", "c": "0.1", "labels": ["R", "D"]}),
        "tesla_poll": first(tesla_buy_sell(), "create_poll")["spec"],
        "pef_discrete_match": {"variant": "discrete_match", "c": "0.1", "labels": ["R", "D"]},
        "pef_arctan": {"variant": "arctan_buy_sell", "c": "0.1"},
        "pef_rating": {"variant": "rating_triple", "c": "1000/9000000"},
        "feed_election": first(election2020(), "register_feed")["feed"],
    }


def dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def main() -> None:
    SPECS.mkdir(exist_ok=True)
    for build in (election2020, tesla_buy_sell, governance_dao, rating_agency, multi_pe):
        scenario = build()
        dump(SCENARIO_DIR / f"{scenario['name']}.json", scenario)
    for name, obj in example_specs().items():
        dump(SPECS / f"{name}.json", obj)
    for build in (election2020, tesla_buy_sell, governance_dao, rating_agency, multi_pe):
        print(write_golden(build.__name__))


if __name__ == "__main__":
    main()
