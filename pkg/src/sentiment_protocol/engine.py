"""Poll lifecycle: create, stake, tally, evaluate, close.

Settlement arithmetic is exact. Per-token values are rationals (floats made
exact where the payoff is transcendental) and are turned into base units
only when tokens move:

* at tally each stake keeps back ``ceil(w_k * worst_penalty * stake)`` per
  scheduled evaluation ``k`` and returns the rest;
* at evaluation ``k`` a provider with per-token value ``v`` receives
  ``floor(v * stake)`` from the pool when ``v >= 0``, or forfeits
  ``ceil(-v * stake)`` of that evaluation's withheld tranche when ``v < 0``;
  the rest of the tranche is released.

So each evaluation changes a provider's position by exactly
``floor(v * stake)``, and all rounding dust stays with the pollster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Union

from .core import (
    Continuous,
    Discrete,
    DiscreteOutcomes,
    Interval,
    OutcomeSet,
    SentimentChoice,
    interval_within,
    outcome_set_from_json,
    parse_choice,
    saturating_time_add,
    to_base_units,
    from_base_units,
)
from .errors import (
    ClockError,
    InsufficientBalance,
    InsufficientPool,
    InsufficientReserve,
    InvalidChoice,
    InvalidSpec,
    InvalidStake,
    CapExceeded,
    KeyMismatch,
    MissingRevealKey,
    NotFinalized,
    OracleUnavailable,
    ProtocolError,
    TooEarly,
    UnknownHook,
    UnknownPoll,
    UnknownTopic,
    VerificationFailed,
    WrongPhase,
)
from .events import EventLog
from .ledger import Ledger, LotSplit
from .oracle import Oracle
from .pef import Constant, EvaluationSchedule, PEFunction, pef_from_json, required_pool, withheld_tranches
from .pef.schedule import geometric_pool
from .sealing import PrivateRevealKey, PublicSealKey, SealedChoice, reveal

STAKE = "stake"
WITHHELD = "withheld"
POOL = "pool"
FORFEITED = "forfeited"


class Phase(str, Enum):
    CREATED = "created"
    CONTRIBUTING = "contributing"
    AWAITING_TALLY = "awaiting_tally"
    TALLIED = "tallied"
    EVALUATED = "evaluated"
    CLOSED = "closed"
    VOIDED = "voided"


PHASE_RANK = {
    Phase.CREATED: 0,
    Phase.CONTRIBUTING: 1,
    Phase.AWAITING_TALLY: 2,
    Phase.TALLIED: 3,
    Phase.VOIDED: 3,
    Phase.EVALUATED: 4,
    Phase.CLOSED: 5,
}


# --------------------------------------------------------------------------
# poll definition

@dataclass(frozen=True)
class StakingParams:
    token_id: str
    start: int
    end: int
    min_total: int
    max_total: int


@dataclass(frozen=True)
class PollSpec:
    topic_id: str
    outcomes: OutcomeSet
    sentiments: tuple[SentimentChoice, ...]
    staking: StakingParams
    cooldown_dt0: int
    schedule: EvaluationSchedule
    pef: PEFunction
    pollster: str
    sealed: bool = False
    seal_key: Optional[PublicSealKey] = None
    policy_hook: Optional[str] = None

    def validate(self) -> None:
        st = self.staking
        if not st.start < st.end:
            raise InvalidSpec("contribution window needs start < end")
        if not 0 <= st.min_total <= st.max_total:
            raise InvalidSpec("staking limits need 0 <= min <= max")
        if self.cooldown_dt0 < 0:
            raise InvalidSpec("cool-down must be non-negative")
        if not self.sentiments:
            raise InvalidSpec("sentiment set is empty")
        if len(set(self.sentiments)) != len(self.sentiments):
            raise InvalidSpec("sentiments must be distinct")
        if not self.schedule.entries:
            raise InvalidSpec("at least one performance evaluation is required")
        if not self.schedule.penalties_possible and self.pef.inf_bound() < 0:
            raise InvalidSpec("schedule forbids penalties but the function can be negative")
        if self.sealed and self.seal_key is None:
            raise InvalidSpec("a sealed poll needs a public seal key")
        for s in self.sentiments:
            if isinstance(s, Interval) and not interval_within(s, self.outcomes):
                raise InvalidSpec(f"sentiment {s} is not a subset of the outcome set")
        probe = (
            [Discrete(x) for x in self.outcomes.labels]
            if isinstance(self.outcomes, DiscreteOutcomes)
            else [Continuous(0.5), Continuous(1.0), Continuous(2.0)]
        )
        for s in self.sentiments:
            for o in probe:
                try:
                    self.pef.evaluate(o, s)
                except ProtocolError as exc:
                    raise InvalidSpec(f"function cannot score sentiment {s} on outcome {o}: {exc}") from exc

    @property
    def tally_at(self) -> int:
        # the window end is inclusive, so even a zero cool-down tallies one second later
        return saturating_time_add(self.staking.end, max(self.cooldown_dt0, 1))

    def evaluation_at(self, k: int) -> int:
        return saturating_time_add(self.tally_at, self.schedule.offsets()[k - 1])

    def to_json(self, decimals: int) -> dict:
        st = self.staking
        return {
            "topic": self.topic_id,
            "outcomes": self.outcomes.to_json(),
            "sentiments": [str(s) for s in self.sentiments],
            "staking": {
                "token": st.token_id,
                "start": st.start,
                "end": st.end,
                "min": from_base_units(st.min_total, decimals),
                "max": from_base_units(st.max_total, decimals),
            },
            "dt0": self.cooldown_dt0,
            "schedule": self.schedule.to_json(),
            "penalties_possible": self.schedule.penalties_possible,
            "pef": self.pef.to_json(),
            "sealed": self.sealed,
            "seal_key": self.seal_key.hex() if self.seal_key else None,
            "policy_hook": self.policy_hook,
            "pollster": self.pollster,
        }

    @classmethod
    def from_json(cls, obj: dict, decimals: int = 9) -> PollSpec:
        try:
            st = obj["staking"]
            staking = StakingParams(
                token_id=str(st["token"]),
                start=int(st["start"]),
                end=int(st["end"]),
                min_total=to_base_units(str(st.get("min", "0")), decimals),
                max_total=to_base_units(str(st["max"]), decimals),
            )
            seal_key = obj.get("seal_key")
            return cls(
                topic_id=str(obj["topic"]),
                outcomes=outcome_set_from_json(obj["outcomes"]),
                sentiments=tuple(parse_choice(s) for s in obj["sentiments"]),
                staking=staking,
                cooldown_dt0=int(obj.get("dt0", 0)),
                schedule=EvaluationSchedule.from_json(
                    obj.get("schedule", [{"dt": 0, "weight": "1"}]),
                    bool(obj.get("penalties_possible", True)),
                ),
                pef=pef_from_json(obj["pef"]),
                pollster=str(obj["pollster"]),
                sealed=bool(obj.get("sealed", False)),
                seal_key=PublicSealKey.from_hex(seal_key) if seal_key else None,
                policy_hook=obj.get("policy_hook"),
            )
        except ProtocolError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed poll spec: {exc!r}") from exc


# --------------------------------------------------------------------------
# runtime records

@dataclass
class EvalPayout:
    index: int
    value_per_token: Fraction
    reward: int
    released: int
    forfeited: int


@dataclass
class Submission:
    submission_id: str
    account_id: str
    stake: int
    choice: Union[SentimentChoice, SealedChoice]
    submitted_at: int
    lots: LotSplit
    revealed: Optional[SentimentChoice] = None
    excluded: bool = False
    returned_at_tally: int = 0
    tranches: list[int] = field(default_factory=list)
    outstanding: LotSplit = field(default_factory=LotSplit)
    payouts: list[EvalPayout] = field(default_factory=list)

    @property
    def sentiment(self) -> Optional[SentimentChoice]:
        if isinstance(self.choice, SealedChoice):
            return self.revealed
        return self.choice

    @property
    def received(self) -> int:
        return self.returned_at_tally + sum(p.reward + p.released for p in self.payouts)

    @property
    def net(self) -> int:
        return self.received - self.stake


@dataclass(frozen=True)
class TallyResult:
    weights: dict[str, int]
    winner: Optional[str]
    excluded: tuple[str, ...] = ()
    voided: bool = False


@dataclass(frozen=True)
class HookCall:
    poll_id: str
    hook: str
    winner: str
    weights: dict[str, int]
    t: int


@dataclass
class Poll:
    poll_id: str
    spec: PollSpec
    created_at: int
    pool_deposit: int
    pool_lots: LotSplit
    phase: Phase = Phase.CREATED
    evaluations_done: int = 0
    total_staked: int = 0
    submissions: list[Submission] = field(default_factory=list)
    withheld_per_token: Fraction = Fraction(0)
    tally_result: Optional[TallyResult] = None
    outcomes: list = field(default_factory=list)
    pool_residual: int = 0
    forfeited_total: int = 0

    @property
    def escrow_id(self) -> str:
        return self.poll_id

    @property
    def live(self) -> list[Submission]:
        return [s for s in self.submissions if not s.excluded]


# --------------------------------------------------------------------------
# reports

@dataclass
class SettlementReport:
    poll_id: str
    phase: str
    token_id: str
    decimals: int
    rows: list[dict]
    totals: dict[str, int]

    def _d(self, units: int) -> str:
        return from_base_units(units, self.decimals)

    def to_json(self) -> dict:
        rows = []
        for r in self.rows:
            rows.append({
                **{k: r[k] for k in ("submission_id", "account", "sentiment", "excluded")},
                "stake": self._d(r["stake"]),
                "returned_at_tally": self._d(r["returned_at_tally"]),
                "evaluations": [
                    {
                        "eval_index": p.index,
                        "value_per_token": repr(float(p.value_per_token)),
                        "reward": self._d(p.reward),
                        "released": self._d(p.released),
                        "forfeited": self._d(p.forfeited),
                    }
                    for p in r["payouts"]
                ],
                "net": self._d(r["net"]),
            })
        return {
            "poll": self.poll_id,
            "phase": self.phase,
            "token": self.token_id,
            "submissions": rows,
            "totals": {k: self._d(v) for k, v in sorted(self.totals.items())},
        }

    def to_csv(self) -> str:
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["submission_id", "account", "sentiment", "stake", "returned_at_tally", "eval_index", "payout", "net"])
        for r in self.rows:
            base = [r["submission_id"], r["account"], r["sentiment"], self._d(r["stake"]), self._d(r["returned_at_tally"])]
            if not r["payouts"]:
                w.writerow(base + [0, self._d(0), self._d(r["net"])])
            for p in r["payouts"]:
                w.writerow(base + [p.index, self._d(p.reward + p.released), self._d(r["net"])])
        return buf.getvalue()

    def net_by_submission(self) -> dict[str, int]:
        return {r["submission_id"]: r["net"] for r in self.rows}


HookHandler = Callable[[HookCall], None]


# --------------------------------------------------------------------------
# the engine

class PollEngine:
    """Runs polls against a ledger and an oracle. One writer at a time."""

    def __init__(
        self,
        ledger: Ledger,
        oracle: Optional[Oracle] = None,
        hooks: Optional[dict[str, HookHandler]] = None,
        log: Optional[EventLog] = None,
    ):
        self.ledger = ledger
        self.oracle = oracle or Oracle()
        self.hooks: dict[str, HookHandler] = dict(hooks or {})
        self.log = log if log is not None else EventLog()
        self.polls: dict[str, Poll] = {}
        self.last_time = 0

    # ---- helpers

    def poll(self, poll_id: str) -> Poll:
        try:
            return self.polls[poll_id]
        except KeyError:
            raise UnknownPoll(poll_id) from None

    def _tick(self, now: int) -> None:
        if now < self.last_time:
            raise ClockError(f"time went backwards: {now} < {self.last_time}")
        self.last_time = now

    def _set_phase(self, poll: Poll, phase: Phase, now: int) -> None:
        if PHASE_RANK[phase] < PHASE_RANK[poll.phase]:
            raise AssertionError(f"backward transition {poll.phase} -> {phase}")
        poll.phase = phase
        self.log.append("phase", now, poll=poll.poll_id, phase=phase.value, evaluations=poll.evaluations_done)

    def _sync(self, poll: Poll, now: int) -> None:
        st = poll.spec.staking
        if poll.phase is Phase.CREATED and now >= st.start:
            self._set_phase(poll, Phase.CONTRIBUTING, now)
        if poll.phase is Phase.CONTRIBUTING and now > st.end:
            self._set_phase(poll, Phase.AWAITING_TALLY, now)

    def _pay(self, poll: Poll, bucket: str, account: str, split: LotSplit) -> None:
        self.ledger.escrow_withdraw(poll.escrow_id, bucket, account, split)

    def _refund(self, poll: Poll, sub: Submission, now: int, reason: str) -> None:
        self._pay(poll, STAKE, sub.account_id, sub.lots)
        sub.returned_at_tally = sub.stake
        sub.outstanding = LotSplit()
        self.log.append("refund", now, poll=poll.poll_id, submission=sub.submission_id, amount=sub.stake, reason=reason)

    def phase(self, poll_id: str, now: Optional[int] = None) -> Phase:
        """Phase as of ``now`` without mutating anything."""
        poll = self.poll(poll_id)
        if now is None:
            return poll.phase
        st = poll.spec.staking
        if poll.phase is Phase.CREATED and now >= st.start:
            return Phase.AWAITING_TALLY if now > st.end else Phase.CONTRIBUTING
        if poll.phase is Phase.CONTRIBUTING and now > st.end:
            return Phase.AWAITING_TALLY
        return poll.phase

    # ---- operations

    def create_poll(self, spec: PollSpec, pool_deposit: int, now: int) -> str:
        spec.validate()
        policy = self.ledger.policy(spec.staking.token_id)
        if now > spec.staking.start:
            raise InvalidSpec(f"poll must be created by its window start {spec.staking.start}")
        if spec.policy_hook is not None and spec.policy_hook not in self.hooks:
            raise UnknownHook(f"no handler registered for {spec.policy_hook!r}")
        need = required_pool(spec.schedule, spec.pef, spec.staking.max_total)
        if pool_deposit < need:
            raise InsufficientPool(
                f"pool {from_base_units(pool_deposit, policy.decimals)} below required "
                f"{from_base_units(need, policy.decimals)}"
            )
        have = self.ledger.balance(spec.staking.token_id, spec.pollster)
        if have < pool_deposit:
            raise InsufficientBalance(f"{spec.pollster} holds {have}, pool needs {pool_deposit}")
        self._tick(now)
        poll_id = f"poll-{len(self.polls) + 1}"
        self.ledger.open_escrow(poll_id, spec.staking.token_id)
        lots = self.ledger.escrow_deposit(poll_id, spec.pollster, POOL, pool_deposit)
        poll = Poll(poll_id, spec, now, pool_deposit, lots)
        self.polls[poll_id] = poll
        self.log.append(
            "created", now, poll=poll_id, topic=spec.topic_id, pollster=spec.pollster,
            token=spec.staking.token_id, pool=pool_deposit, required=need, pef=spec.pef.to_json(),
        )
        self._sync(poll, now)
        return poll_id

    def _check_choice(self, poll: Poll, choice) -> Union[SentimentChoice, SealedChoice]:
        spec = poll.spec
        if isinstance(choice, SealedChoice):
            if not spec.sealed:
                raise InvalidChoice("this poll takes open choices")
            if choice.ciphertext[: len(spec.seal_key.key_id)] != spec.seal_key.key_id:
                raise InvalidChoice("choice is sealed under a different poll key")
            return choice
        if spec.sealed:
            raise InvalidChoice("this poll takes sealed choices only")
        choice = parse_choice(choice)
        if choice not in spec.sentiments:
            raise InvalidChoice(f"{choice} is not one of {[str(s) for s in spec.sentiments]}")
        return choice

    def submit(self, poll_id: str, account_id: str, choice, stake: int, now: int) -> str:
        poll = self.poll(poll_id)
        phase = self.phase(poll_id, now)
        if phase is not Phase.CONTRIBUTING:
            if phase is Phase.CREATED:
                raise TooEarly(f"contribution opens at {poll.spec.staking.start}")
            raise WrongPhase(f"poll is {phase.value}, not contributing")
        stake = int(stake)
        if stake <= 0:
            raise InvalidStake("stake must be positive")
        choice = self._check_choice(poll, choice)
        if poll.total_staked + stake > poll.spec.staking.max_total:
            raise CapExceeded(
                f"stake {stake} would lift the total past the cap {poll.spec.staking.max_total}"
            )
        token = poll.spec.staking.token_id
        if self.ledger.balance(token, account_id) < stake:
            raise InsufficientBalance(f"{account_id} cannot stake {stake}")
        self._tick(now)
        self._sync(poll, now)
        lots = self.ledger.escrow_deposit(poll.escrow_id, account_id, STAKE, stake)
        sub_id = f"{poll_id}/{len(poll.submissions) + 1}"
        poll.submissions.append(Submission(sub_id, account_id, stake, choice, now, lots, outstanding=lots))
        poll.total_staked += stake
        shown = choice.commitment.hex() if isinstance(choice, SealedChoice) else str(choice)
        self.log.append("submitted", now, poll=poll_id, submission=sub_id, account=account_id, stake=stake, choice=shown)
        return sub_id

    def tally(self, poll_id: str, now: int, reveal_key: Optional[PrivateRevealKey] = None) -> TallyResult:
        poll = self.poll(poll_id)
        spec = poll.spec
        phase = self.phase(poll_id, now)
        if phase in (Phase.CREATED, Phase.CONTRIBUTING):
            raise TooEarly(f"contribution period ends at {spec.staking.end}")
        if phase is not Phase.AWAITING_TALLY:
            raise WrongPhase(f"poll is {phase.value}")
        if now < spec.tally_at:
            raise TooEarly(f"tally opens at {spec.tally_at}")
        if spec.sealed:
            if reveal_key is None:
                raise MissingRevealKey("sealed poll needs the pollster's reveal key")
            if reveal_key.key_id != spec.seal_key.key_id:
                raise KeyMismatch("reveal key does not belong to this poll")
        self._tick(now)
        self._sync(poll, now)

        if poll.total_staked < spec.staking.min_total:
            for sub in poll.submissions:
                self._refund(poll, sub, now, "minimum not reached")
            self._pay(poll, POOL, spec.pollster, poll.pool_lots)
            poll.pool_residual = poll.pool_deposit
            result = TallyResult({}, None, voided=True)
            poll.tally_result = result
            self.log.append("voided", now, poll=poll_id, staked=poll.total_staked, minimum=spec.staking.min_total)
            self._set_phase(poll, Phase.VOIDED, now)
            return result

        excluded = []
        for sub in poll.submissions:
            if isinstance(sub.choice, SealedChoice):
                try:
                    choice, _ = reveal(sub.choice, reveal_key)
                    if choice not in spec.sentiments:
                        raise VerificationFailed(f"revealed {choice} is not an allowed sentiment")
                except (VerificationFailed, KeyMismatch) as exc:
                    sub.excluded = True
                    excluded.append(sub.submission_id)
                    self._refund(poll, sub, now, f"reveal failed: {exc}")
                    continue
                sub.revealed = choice
                self.log.append("revealed", now, poll=poll_id, submission=sub.submission_id, choice=str(choice))

        poll.withheld_per_token = spec.schedule.total_weight * max(Fraction(0), -spec.pef.inf_bound())
        weights: dict[str, int] = {}
        for sub in poll.live:
            sub.tranches = withheld_tranches(spec.schedule, spec.pef, sub.stake)
            withheld = sum(sub.tranches)
            self.ledger.escrow_move(poll.escrow_id, STAKE, WITHHELD, withheld)
            back, sub.outstanding = sub.lots.allocate(sub.stake - withheld)
            self._pay(poll, STAKE, sub.account_id, back)
            sub.returned_at_tally = back.total
            key = str(sub.sentiment)
            weights[key] = weights.get(key, 0) + sub.stake
            self.log.append(
                "stake_returned", now, poll=poll_id, submission=sub.submission_id,
                returned=back.total, withheld=withheld,
            )

        winner = None
        if weights:
            top = max(weights.values())
            leaders = [k for k, v in weights.items() if v == top]
            winner = leaders[0] if len(leaders) == 1 else None
        result = TallyResult(dict(sorted(weights.items())), winner, tuple(excluded))
        poll.tally_result = result
        self.log.append("tallied", now, poll=poll_id, weights=result.weights, winner=winner, excluded=list(excluded))
        self._set_phase(poll, Phase.TALLIED, now)

        if spec.policy_hook is not None:
            if winner is None:
                self.log.append("hook_skipped", now, poll=poll_id, hook=spec.policy_hook, reason="tie or no votes")
            else:
                self.hooks[spec.policy_hook](HookCall(poll_id, spec.policy_hook, winner, result.weights, now))
                self.log.append("hook_fired", now, poll=poll_id, hook=spec.policy_hook, winner=winner)
        return result

    def evaluate_performance(self, poll_id: str, k: int, now: int) -> SettlementReport:
        poll = self.poll(poll_id)
        spec = poll.spec
        phase = self.phase(poll_id, now)
        if phase not in (Phase.TALLIED, Phase.EVALUATED) or poll.evaluations_done != k - 1:
            raise WrongPhase(
                f"evaluation {k} not allowed: poll is {phase.value} after {poll.evaluations_done} evaluations"
            )
        if not 1 <= k <= len(spec.schedule):
            raise WrongPhase(f"schedule has {len(spec.schedule)} evaluations")
        due = spec.evaluation_at(k)
        if now < due:
            raise TooEarly(f"evaluation {k} is due at {due}")

        outcome = None
        if not spec.pef.outcome_independent:
            try:
                outcome = self.oracle.resolve(spec.topic_id, due, now)
            except (UnknownTopic, NotFinalized) as exc:
                raise OracleUnavailable(f"{spec.topic_id!r}: {exc}") from exc
            if not spec.outcomes.contains(outcome):
                raise OracleUnavailable(f"oracle outcome {outcome!r} is outside the outcome set")
        self._tick(now)

        weight = spec.schedule.entries[k - 1].weight
        for sub in poll.live:
            v = weight * spec.pef.evaluate_exact(outcome, sub.sentiment)
            reward = math.floor(max(v, 0) * sub.stake)
            tranche = sub.tranches[k - 1]
            forfeit = min(tranche, math.ceil(max(-v, 0) * sub.stake))
            released = tranche - forfeit
            self._pay(poll, POOL, sub.account_id, LotSplit(0, reward))
            back, sub.outstanding = sub.outstanding.allocate(released)
            self._pay(poll, WITHHELD, sub.account_id, back)
            _, sub.outstanding = sub.outstanding.allocate(forfeit)
            self.ledger.escrow_move(poll.escrow_id, WITHHELD, FORFEITED, forfeit)
            poll.forfeited_total += forfeit
            sub.payouts.append(EvalPayout(k, v, reward, released, forfeit))
            self.log.append(
                "payout", now, poll=poll_id, submission=sub.submission_id, eval_index=k,
                value=str(v), reward=reward, released=released, forfeited=forfeit,
            )
        poll.outcomes.append(outcome)
        poll.evaluations_done = k
        self.log.append(
            "evaluated", now, poll=poll_id, eval_index=k,
            outcome=outcome.to_json() if outcome is not None else None,
        )
        self._set_phase(poll, Phase.EVALUATED, now)
        return self.report(poll_id)

    def close_poll(self, poll_id: str, now: int) -> SettlementReport:
        poll = self.poll(poll_id)
        spec = poll.spec
        done = poll.phase is Phase.EVALUATED and poll.evaluations_done == len(spec.schedule)
        if not (done or poll.phase is Phase.VOIDED):
            raise WrongPhase(f"poll is {poll.phase.value} after {poll.evaluations_done} evaluations")
        self._tick(now)
        if done:
            residual = self.ledger.bucket(poll.escrow_id, POOL)
            back, _ = poll.pool_lots.allocate(residual)
            self._pay(poll, POOL, spec.pollster, back)
            forfeited = self.ledger.bucket(poll.escrow_id, FORFEITED)
            self._pay(poll, FORFEITED, spec.pollster, LotSplit(0, forfeited))
            poll.pool_residual = residual
            if self.ledger.escrow(poll.escrow_id).total:
                raise AssertionError(f"escrow {poll.escrow_id} not empty at close")
        self._set_phase(poll, Phase.CLOSED, now)
        report = self.report(poll_id)
        self.log.append("closed", now, poll=poll_id, totals=report.totals)
        return report

    # ---- reading

    def report(self, poll_id: str) -> SettlementReport:
        poll = self.poll(poll_id)
        rows = []
        for sub in poll.submissions:
            sentiment = sub.sentiment
            rows.append({
                "submission_id": sub.submission_id,
                "account": sub.account_id,
                "sentiment": str(sentiment) if sentiment is not None else "sealed",
                "excluded": sub.excluded,
                "stake": sub.stake,
                "returned_at_tally": sub.returned_at_tally,
                "payouts": list(sub.payouts),
                "net": sub.net,
            })
        rewards = sum(p.reward for sub in poll.submissions for p in sub.payouts)
        totals = {
            "pool_deposit": poll.pool_deposit,
            "pool_spent": rewards,
            "pool_residual_to_pollster": poll.pool_residual,
            "forfeited_to_pollster": poll.forfeited_total,
            "total_staked": poll.total_staked,
        }
        token = poll.spec.staking.token_id
        return SettlementReport(poll_id, poll.phase.value, token, self.ledger.policy(token).decimals, rows, totals)


def run_governance_round(
    engine: PollEngine,
    token_id: str,
    round_index: int,
    template: PollSpec,
    total_reserve: int,
    x,
    now: int,
) -> str:
    """Open governance round ``i``: a flat-reward poll funded from a geometric reserve schedule.

    The flat reward per token is the round's pool divided by the template's
    staking cap, so a full poll spends the whole pool.
    """
    pool = geometric_pool(total_reserve, x, round_index)
    if pool == 0:
        raise InsufficientReserve(f"round {round_index} pool rounds to zero")
    if engine.ledger.balance(token_id, template.pollster) < pool:
        raise InsufficientReserve(f"{template.pollster} cannot fund round {round_index} pool of {pool}")
    c = Fraction(pool, template.staking.max_total)
    staking = StakingParams(
        token_id, template.staking.start, template.staking.end,
        template.staking.min_total, template.staking.max_total,
    )
    spec = PollSpec(
        topic_id=template.topic_id,
        outcomes=template.outcomes,
        sentiments=template.sentiments,
        staking=staking,
        cooldown_dt0=template.cooldown_dt0,
        schedule=template.schedule,
        pef=Constant(c, tuple(str(s) for s in template.sentiments)),
        pollster=template.pollster,
        sealed=template.sealed,
        seal_key=template.seal_key,
        policy_hook=template.policy_hook,
    )
    return engine.create_poll(spec, pool, now)
