"""Command-driven simulation on a manual clock.

Scenario files and the command line both reduce to the same JSON commands,
applied here, so the two produce identical event logs for identical inputs.

Command shapes (amounts are decimal strings in display units)::

    {"op": "advance", "to": T} | {"op": "advance", "by": DT}
    {"op": "create_token", "id": ..., "decimals": 9, "rule": {...}, "reward_lots_free": true}
    {"op": "mint", "token": ..., "account": ..., "amount": "100", "lot": "originated"}
    {"op": "transfer", "token": ..., "from": ..., "to": ..., "amount": "10"}
    {"op": "register_feed", "feed": {...}, "outcomes": {...}}
    {"op": "create_poll", "ref": "p1", "spec": {...}, "deposit": "1000"}
    {"op": "submit", "poll": "p1", "account": ..., "choice": "D", "stake": "100", "nonce": HEX}
    {"op": "tally", "poll": "p1", "reveal_key": HEX}
    {"op": "evaluate", "poll": "p1", "k": 1}
    {"op": "close", "poll": "p1"}
    {"op": "governance_round", "ref": ..., "token": ..., "round": 1,
     "template": {...}, "total_reserve": "100000", "x": "0.99"}

Any command may carry ``"at": T`` to move the clock first.
"""

from __future__ import annotations

import hashlib
from typing import Optional

from .core import MAX_TIMESTAMP, outcome_set_from_json, parse_choice, saturating_time_add
from .engine import HookCall, HookHandler, PollEngine, PollSpec, run_governance_round
from .errors import ClockError, InvalidSpec
from .events import EventLog
from .ledger import ORIGINATED, Ledger, TokenPolicy
from .oracle import Oracle, OutcomeFeed
from .pef import required_pool
from .sealing import PrivateRevealKey, SealedChoice, seal


class ManualClock:
    def __init__(self, now: int = 0):
        self.now = now

    def advance(self, delta: int) -> int:
        self.now = saturating_time_add(self.now, int(delta))
        return self.now

    def set(self, t: int) -> int:
        t = int(t)
        if t < self.now:
            raise ClockError(f"clock cannot move back from {self.now} to {t}")
        if t > MAX_TIMESTAMP:
            raise ClockError("timestamp out of range")
        self.now = t
        return t


class Simulation:
    def __init__(self, hooks: Optional[dict[str, HookHandler]] = None):
        self.log = EventLog()
        self.ledger = Ledger()
        self.oracle = Oracle()
        self.clock = ManualClock()
        self.decisions: list[dict] = []
        table = {"execute_decision": self._execute_decision}
        table.update(hooks or {})
        self.engine = PollEngine(self.ledger, self.oracle, table, self.log)
        self.refs: dict[str, str] = {}

    def _execute_decision(self, call: HookCall) -> None:
        self.decisions.append({"poll": call.poll_id, "decision": call.winner, "t": call.t})

    def poll_id(self, ref: str) -> str:
        return self.refs.get(ref, ref)

    def _units(self, token_id: str, amount) -> int:
        return self.ledger.units(token_id, str(amount))

    # ---- command dispatch

    def apply(self, cmd: dict):
        if "at" in cmd:
            self.clock.set(cmd["at"])
        op = cmd.get("op")
        handler = getattr(self, f"_op_{op}", None)
        if handler is None:
            raise InvalidSpec(f"unknown command {op!r}")
        return handler(cmd)

    def run(self, commands) -> None:
        for cmd in commands:
            self.apply(cmd)

    def _op_advance(self, cmd):
        if "to" in cmd:
            return {"now": self.clock.set(cmd["to"])}
        return {"now": self.clock.advance(cmd.get("by", 0))}

    def _op_create_token(self, cmd):
        policy = TokenPolicy.from_json(cmd)
        self.ledger.create_token(policy)
        self.log.append("token_created", self.clock.now, **policy.to_json())
        return {"token": policy.token_id}

    def _op_mint(self, cmd):
        token, account = cmd["token"], cmd["account"]
        lot = cmd.get("lot", ORIGINATED)
        amount = self._units(token, cmd["amount"])
        self.ledger.mint(token, account, amount, lot)
        self.log.append("minted", self.clock.now, token=token, account=account, amount=amount, lot=lot)
        return {"token": token, "account": account, "amount": str(cmd["amount"])}

    def _op_transfer(self, cmd):
        token = cmd["token"]
        amount = self._units(token, cmd["amount"])
        moved = self.ledger.transfer(token, cmd["from"], cmd["to"], amount, self.clock.now)
        self.log.append(
            "transferred", self.clock.now, token=token, src=cmd["from"], dst=cmd["to"],
            originated=moved.originated, earned=moved.earned,
        )
        return {"originated": moved.originated, "earned": moved.earned}

    def _op_register_feed(self, cmd):
        feed = OutcomeFeed.from_json(cmd["feed"])
        outcomes = outcome_set_from_json(cmd["outcomes"]) if cmd.get("outcomes") else None
        self.oracle.register_feed(feed, outcomes)
        self.log.append("feed_registered", self.clock.now, **feed.to_json())
        return {"topic": feed.topic_id}

    def spec_from_json(self, obj: dict) -> PollSpec:
        token = obj.get("staking", {}).get("token")
        return PollSpec.from_json(obj, self.ledger.policy(token).decimals if token else 9)

    def _op_create_poll(self, cmd):
        spec = self.spec_from_json(cmd["spec"])
        if cmd.get("deposit") is None:
            deposit = required_pool(spec.schedule, spec.pef, spec.staking.max_total)
        else:
            deposit = self._units(spec.staking.token_id, cmd["deposit"])
        poll_id = self.engine.create_poll(spec, deposit, self.clock.now)
        if cmd.get("ref"):
            self.refs[cmd["ref"]] = poll_id
        return {"poll": poll_id}

    def _op_submit(self, cmd):
        poll_id = self.poll_id(cmd["poll"])
        poll = self.engine.poll(poll_id)
        token = poll.spec.staking.token_id
        if "sealed" in cmd:
            choice = SealedChoice.from_json(cmd["sealed"])
        elif poll.spec.sealed:
            nonce = bytes.fromhex(cmd["nonce"]) if cmd.get("nonce") else _derived_nonce(poll_id, cmd)
            choice = seal(parse_choice(cmd["choice"]), nonce, poll.spec.seal_key)
        else:
            choice = cmd["choice"]
        sub_id = self.engine.submit(poll_id, cmd["account"], choice, self._units(token, cmd["stake"]), self.clock.now)
        return {"submission": sub_id}

    def _op_tally(self, cmd):
        poll_id = self.poll_id(cmd["poll"])
        key = PrivateRevealKey.from_hex(cmd["reveal_key"]) if cmd.get("reveal_key") else None
        result = self.engine.tally(poll_id, self.clock.now, key)
        return {
            "poll": poll_id, "voided": result.voided, "winner": result.winner,
            "weights": {k: self.ledger.display(self.engine.poll(poll_id).spec.staking.token_id, v)
                        for k, v in result.weights.items()},
            "excluded": list(result.excluded),
        }

    def _op_evaluate(self, cmd):
        poll_id = self.poll_id(cmd["poll"])
        k = cmd.get("k") or self.engine.poll(poll_id).evaluations_done + 1
        return self.engine.evaluate_performance(poll_id, int(k), self.clock.now).to_json()

    def _op_close(self, cmd):
        return self.engine.close_poll(self.poll_id(cmd["poll"]), self.clock.now).to_json()

    def _op_governance_round(self, cmd):
        token = cmd["token"]
        # the round sets its own flat reward, so a template may omit the function
        template = self.spec_from_json({"pef": {"variant": "constant", "c": "1"}, **cmd["template"]})
        poll_id = run_governance_round(
            self.engine, token, int(cmd["round"]), template,
            self._units(token, cmd["total_reserve"]), cmd["x"], self.clock.now,
        )
        if cmd.get("ref"):
            self.refs[cmd["ref"]] = poll_id
        return {"poll": poll_id}


def _derived_nonce(poll_id: str, cmd: dict) -> bytes:
    """Reproducible nonce for simulated submitters that did not supply one."""
    material = f"{poll_id}|{cmd['account']}|{cmd['choice']}|{cmd['stake']}|{cmd.get('at', '')}"
    return hashlib.sha256(material.encode()).digest()
