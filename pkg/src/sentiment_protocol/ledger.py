"""Token registry and balance store.

Balances are plain integers in base units. Each account's holding of a token
is split into two lots: ``originated`` (minted/distributed tokens, subject to
the token's transfer rule) and ``earned`` (rewards, optionally always free).
Poll stakes, penalties and reward pools sit in escrows, which are split into
named buckets. For every token, account balances plus escrow buckets always
add up to the minted supply.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .core import DEFAULT_DECIMALS, MAX_BASE_UNITS, QUARTER, from_base_units, to_base_units
from .errors import (
    AllowanceExhausted,
    DuplicateEscrow,
    DuplicateToken,
    InsufficientBalance,
    InsufficientBucket,
    NegativeAmount,
    Overflow,
    TransferRestricted,
    UnknownEscrow,
    UnknownToken,
)

ORIGINATED = "originated"
EARNED = "earned"
LOTS = (ORIGINATED, EARNED)


# --------------------------------------------------------------------------
# transfer rules

@dataclass(frozen=True)
class Free:
    kind = "free"

    def to_json(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class NonTransferableBetweenUsers:
    """Moves to and from escrows only; no user-to-user transfers of distributed tokens."""

    kind = "non_transferable_between_users"

    def to_json(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class QuarterlyAllowance:
    """At most ``fraction`` of an account's distributed tokens may leave it per quarter."""

    fraction: Fraction
    kind = "quarterly_allowance"

    def __post_init__(self):
        f = Fraction(self.fraction)
        if not 0 < f <= 1:
            raise ValueError(f"allowance fraction must lie in (0, 1], got {self.fraction}")
        object.__setattr__(self, "fraction", f)

    def to_json(self) -> dict:
        return {"kind": self.kind, "fraction": str(self.fraction)}


TransferRule = Union[Free, NonTransferableBetweenUsers, QuarterlyAllowance]


def rule_from_json(obj) -> TransferRule:
    if isinstance(obj, str):
        obj = {"kind": obj}
    kind = obj.get("kind")
    if kind == Free.kind:
        return Free()
    if kind == NonTransferableBetweenUsers.kind:
        return NonTransferableBetweenUsers()
    if kind == QuarterlyAllowance.kind:
        return QuarterlyAllowance(Fraction(str(obj["fraction"])))
    raise ValueError(f"unknown transfer rule: {obj!r}")


@dataclass(frozen=True)
class TokenPolicy:
    token_id: str
    decimals: int = DEFAULT_DECIMALS
    transfer_rule: TransferRule = field(default_factory=Free)
    reward_lots_free: bool = True

    def to_json(self) -> dict:
        return {
            "id": self.token_id,
            "decimals": self.decimals,
            "rule": self.transfer_rule.to_json(),
            "reward_lots_free": self.reward_lots_free,
        }

    @classmethod
    def from_json(cls, obj: dict) -> TokenPolicy:
        return cls(
            token_id=str(obj["id"]),
            decimals=int(obj.get("decimals", DEFAULT_DECIMALS)),
            transfer_rule=rule_from_json(obj.get("rule", {"kind": "free"})),
            reward_lots_free=bool(obj.get("reward_lots_free", True)),
        )


# --------------------------------------------------------------------------
# balances

@dataclass(frozen=True)
class LotSplit:
    """An amount broken down by lot."""

    originated: int = 0
    earned: int = 0

    @property
    def total(self) -> int:
        return self.originated + self.earned

    def allocate(self, amount: int) -> tuple[LotSplit, LotSplit]:
        """Split ``amount`` off this split, originated lot first.

        Returns ``(taken, rest)``.
        """
        if not 0 <= amount <= self.total:
            raise ValueError(f"cannot allocate {amount} from {self.total}")
        orig = min(amount, self.originated)
        taken = LotSplit(orig, amount - orig)
        return taken, LotSplit(self.originated - taken.originated, self.earned - taken.earned)


@dataclass
class Holding:
    originated: int = 0
    earned: int = 0
    distributed: int = 0
    quarter: int = 0
    quarter_spent: int = 0

    @property
    def total(self) -> int:
        return self.originated + self.earned


@dataclass
class Escrow:
    escrow_id: str
    token_id: str
    buckets: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.buckets.values())

    def bucket(self, name: str) -> int:
        return self.buckets.get(name, 0)


def _amount(amount) -> int:
    units = int(amount)
    if units < 0:
        raise NegativeAmount(f"negative amount: {units}")
    return units


class Ledger:
    """Single-writer balance store. Callers serialize mutations."""

    def __init__(self):
        self.tokens: dict[str, TokenPolicy] = {}
        self.supply: dict[str, int] = {}
        self.holdings: dict[str, dict[str, Holding]] = {}
        self.escrows: dict[str, Escrow] = {}

    # ---- registry

    def create_token(self, policy: TokenPolicy) -> str:
        if policy.token_id in self.tokens:
            raise DuplicateToken(policy.token_id)
        self.tokens[policy.token_id] = policy
        self.supply[policy.token_id] = 0
        return policy.token_id

    def policy(self, token_id: str) -> TokenPolicy:
        try:
            return self.tokens[token_id]
        except KeyError:
            raise UnknownToken(token_id) from None

    def units(self, token_id: str, display: str) -> int:
        """Parse a display amount using the token's decimals."""
        return to_base_units(display, self.policy(token_id).decimals)

    def display(self, token_id: str, units: int) -> str:
        return from_base_units(units, self.policy(token_id).decimals)

    def _holding(self, token_id: str, account_id: str) -> Holding:
        self.policy(token_id)
        per_token = self.holdings.setdefault(account_id, {})
        return per_token.setdefault(token_id, Holding())

    def _credit(self, h: Holding, lot: str, amount: int) -> None:
        if lot == ORIGINATED:
            new = h.originated + amount
        elif lot == EARNED:
            new = h.earned + amount
        else:
            raise ValueError(f"unknown lot {lot!r}")
        if new > MAX_BASE_UNITS:
            raise Overflow("balance exceeds 128 bits")
        setattr(h, lot, new)

    def mint(self, token_id: str, account_id: str, amount, lot: str = ORIGINATED) -> None:
        amount = _amount(amount)
        policy = self.policy(token_id)
        if amount == 0:
            return
        if self.supply[policy.token_id] + amount > MAX_BASE_UNITS:
            raise Overflow("supply exceeds 128 bits")
        h = self._holding(token_id, account_id)
        self._credit(h, lot, amount)
        if lot == ORIGINATED:
            h.distributed += amount
        self.supply[token_id] += amount

    # ---- queries

    def balance(self, token_id: str, account_id: str) -> int:
        self.policy(token_id)
        h = self.holdings.get(account_id, {}).get(token_id)
        return h.total if h else 0

    def lots(self, token_id: str, account_id: str) -> LotSplit:
        self.policy(token_id)
        h = self.holdings.get(account_id, {}).get(token_id)
        return LotSplit(h.originated, h.earned) if h else LotSplit()

    def total_supply(self, token_id: str) -> int:
        self.policy(token_id)
        return self.supply[token_id]

    def accounts(self) -> list[str]:
        return sorted(self.holdings)

    # ---- user to user

    def allowance_left(self, token_id: str, account_id: str, now: int) -> int | None:
        """Remaining quarterly allowance, or None if the rule has no allowance."""
        rule = self.policy(token_id).transfer_rule
        if not isinstance(rule, QuarterlyAllowance):
            return None
        h = self._holding(token_id, account_id)
        spent = h.quarter_spent if h.quarter == now // QUARTER else 0
        cap = (rule.fraction * h.distributed).__floor__()
        return max(cap - spent, 0)

    def transfer(self, token_id: str, src: str, dst: str, amount, now: int) -> LotSplit:
        """Move tokens between two users, debiting the earned lot first."""
        amount = _amount(amount)
        policy = self.policy(token_id)
        h_src = self._holding(token_id, src)
        if h_src.total < amount:
            raise InsufficientBalance(
                f"{src} holds {h_src.total} {token_id}, needs {amount}"
            )
        earned = min(amount, h_src.earned)
        moved = LotSplit(amount - earned, earned)
        restricted = moved.originated + (0 if policy.reward_lots_free else moved.earned)

        rule = policy.transfer_rule
        quarter = now // QUARTER
        if restricted and isinstance(rule, NonTransferableBetweenUsers):
            raise TransferRestricted(
                f"{token_id} distributed tokens cannot move between users"
            )
        if restricted and isinstance(rule, QuarterlyAllowance):
            left = self.allowance_left(token_id, src, now)
            if restricted > left:
                raise AllowanceExhausted(
                    f"{src} may move {left} more {token_id} this quarter, asked {restricted}"
                )

        if amount == 0:
            return moved
        h_dst = self._holding(token_id, dst)
        if h_dst.total + amount > MAX_BASE_UNITS and dst != src:
            raise Overflow("balance exceeds 128 bits")
        if restricted and isinstance(rule, QuarterlyAllowance):
            if h_src.quarter != quarter:
                h_src.quarter, h_src.quarter_spent = quarter, 0
            h_src.quarter_spent += restricted
        h_src.originated -= moved.originated
        h_src.earned -= moved.earned
        h_dst.originated += moved.originated
        h_dst.earned += moved.earned
        return moved

    # ---- escrows

    def open_escrow(self, escrow_id: str, token_id: str) -> Escrow:
        self.policy(token_id)
        if escrow_id in self.escrows:
            raise DuplicateEscrow(escrow_id)
        esc = self.escrows[escrow_id] = Escrow(escrow_id, token_id)
        return esc

    def escrow(self, escrow_id: str) -> Escrow:
        try:
            return self.escrows[escrow_id]
        except KeyError:
            raise UnknownEscrow(escrow_id) from None

    def bucket(self, escrow_id: str, name: str) -> int:
        return self.escrow(escrow_id).bucket(name)

    def escrow_deposit(self, escrow_id: str, account_id: str, bucket: str, amount) -> LotSplit:
        """Move tokens from an account into an escrow bucket, originated lot first."""
        amount = _amount(amount)
        esc = self.escrow(escrow_id)
        h = self._holding(esc.token_id, account_id)
        if h.total < amount:
            raise InsufficientBalance(
                f"{account_id} holds {h.total} {esc.token_id}, needs {amount}"
            )
        taken, _ = LotSplit(h.originated, h.earned).allocate(amount)
        h.originated -= taken.originated
        h.earned -= taken.earned
        esc.buckets[bucket] = esc.bucket(bucket) + amount
        return taken

    def escrow_withdraw(self, escrow_id: str, bucket: str, account_id: str, split: LotSplit) -> None:
        """Pay ``split`` out of an escrow bucket into the matching lots of an account."""
        esc = self.escrow(escrow_id)
        amount = split.total
        if split.originated < 0 or split.earned < 0:
            raise NegativeAmount(f"negative payout {split}")
        if esc.bucket(bucket) < amount:
            raise InsufficientBucket(
                f"{escrow_id}/{bucket} holds {esc.bucket(bucket)}, needs {amount}"
            )
        if amount == 0:
            return
        h = self._holding(esc.token_id, account_id)
        if h.total + amount > MAX_BASE_UNITS:
            raise Overflow("balance exceeds 128 bits")
        esc.buckets[bucket] -= amount
        h.originated += split.originated
        h.earned += split.earned

    def escrow_move(self, escrow_id: str, bucket_from: str, bucket_to: str, amount) -> None:
        amount = _amount(amount)
        esc = self.escrow(escrow_id)
        if esc.bucket(bucket_from) < amount:
            raise InsufficientBucket(
                f"{escrow_id}/{bucket_from} holds {esc.bucket(bucket_from)}, needs {amount}"
            )
        if amount == 0:
            return
        esc.buckets[bucket_from] -= amount
        esc.buckets[bucket_to] = esc.bucket(bucket_to) + amount

    # ---- invariants

    def conservation_gap(self, token_id: str) -> int:
        """``minted - (accounts + escrows)``; zero when the books balance."""
        held = sum(
            per_token[token_id].total
            for per_token in self.holdings.values()
            if token_id in per_token
        )
        escrowed = sum(e.total for e in self.escrows.values() if e.token_id == token_id)
        return self.total_supply(token_id) - held - escrowed

    def is_conserved(self) -> bool:
        nonneg = all(
            h.originated >= 0 and h.earned >= 0
            for per_token in self.holdings.values()
            for h in per_token.values()
        ) and all(v >= 0 for e in self.escrows.values() for v in e.buckets.values())
        return nonneg and all(self.conservation_gap(t) == 0 for t in self.tokens)

    # ---- persistence

    def snapshot(self) -> dict:
        def disp(token_id, units):
            return from_base_units(units, self.tokens[token_id].decimals)

        tokens = []
        for tid in sorted(self.tokens):
            entry = self.tokens[tid].to_json()
            entry["supply"] = disp(tid, self.supply[tid])
            tokens.append(entry)
        accounts = []
        for aid in sorted(self.holdings):
            balances = {}
            for tid, h in sorted(self.holdings[aid].items()):
                balances[tid] = {
                    "originated": disp(tid, h.originated),
                    "earned": disp(tid, h.earned),
                    "distributed": disp(tid, h.distributed),
                    "quarter": h.quarter,
                    "quarter_spent": disp(tid, h.quarter_spent),
                }
            accounts.append({"id": aid, "balances": balances})
        escrows = [
            {
                "id": e.escrow_id,
                "token": e.token_id,
                "buckets": {k: disp(e.token_id, v) for k, v in sorted(e.buckets.items())},
            }
            for e in sorted(self.escrows.values(), key=lambda e: e.escrow_id)
        ]
        return {"tokens": tokens, "accounts": accounts, "escrows": escrows}

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, indent=2)

    @classmethod
    def from_snapshot(cls, snap: dict) -> Ledger:
        ledger = cls()
        for entry in snap.get("tokens", []):
            policy = TokenPolicy.from_json(entry)
            ledger.create_token(policy)
            ledger.supply[policy.token_id] = to_base_units(entry.get("supply", "0"), policy.decimals)
        for acct in snap.get("accounts", []):
            for tid, b in acct["balances"].items():
                dec = ledger.policy(tid).decimals
                h = ledger._holding(tid, acct["id"])
                h.originated = to_base_units(b["originated"], dec)
                h.earned = to_base_units(b["earned"], dec)
                h.distributed = to_base_units(b.get("distributed", "0"), dec)
                h.quarter = int(b.get("quarter", 0))
                h.quarter_spent = to_base_units(b.get("quarter_spent", "0"), dec)
        for e in snap.get("escrows", []):
            esc = ledger.open_escrow(e["id"], e["token"])
            dec = ledger.policy(e["token"]).decimals
            esc.buckets = {k: to_base_units(v, dec) for k, v in e["buckets"].items()}
        return ledger

    @classmethod
    def from_json(cls, text: str) -> Ledger:
        return cls.from_snapshot(json.loads(text))
