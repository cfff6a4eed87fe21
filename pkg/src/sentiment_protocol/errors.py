"""Exception hierarchy.

Every error carries a stable ``exit_code`` so the command line front end can
map failures to distinct process exit statuses.
"""

from __future__ import annotations


class ProtocolError(Exception):
    exit_code = 1
    category = "error"


# core
class TooManyFractionalDigits(ProtocolError, ValueError):
    exit_code = 10
    category = "too_many_fractional_digits"


class NegativeAmount(ProtocolError, ValueError):
    exit_code = 11
    category = "negative_amount"


class Overflow(ProtocolError, OverflowError):
    exit_code = 12
    category = "overflow"


class InvalidAmount(ProtocolError, ValueError):
    exit_code = 13
    category = "invalid_amount"


# ledger
class DuplicateToken(ProtocolError):
    exit_code = 20
    category = "duplicate_token"


class UnknownToken(ProtocolError, KeyError):
    exit_code = 21
    category = "unknown_token"


class InsufficientBalance(ProtocolError):
    exit_code = 22
    category = "insufficient_balance"


class TransferRestricted(ProtocolError):
    exit_code = 23
    category = "transfer_restricted"


class AllowanceExhausted(TransferRestricted):
    exit_code = 24
    category = "allowance_exhausted"


class InsufficientBucket(ProtocolError):
    exit_code = 25
    category = "insufficient_bucket"


class UnknownEscrow(ProtocolError, KeyError):
    exit_code = 26
    category = "unknown_escrow"


class DuplicateEscrow(ProtocolError):
    exit_code = 27
    category = "duplicate_escrow"


# performance evaluation
class OutcomeTypeMismatch(ProtocolError, ValueError):
    exit_code = 30
    category = "outcome_type_mismatch"


class UnknownSentimentLabel(ProtocolError, ValueError):
    exit_code = 31
    category = "unknown_sentiment_label"


class DeclaredBoundsViolated(ProtocolError, ValueError):
    exit_code = 32
    category = "declared_bounds_violated"


class IndexOutOfRange(ProtocolError, IndexError):
    exit_code = 33
    category = "index_out_of_range"


class InvalidRatio(ProtocolError, ValueError):
    exit_code = 34
    category = "invalid_ratio"


class EmptyGrid(ProtocolError, ValueError):
    exit_code = 35
    category = "empty_grid"


class BadGrid(ProtocolError, ValueError):
    exit_code = 36
    category = "bad_grid"


class InvalidPEF(ProtocolError, ValueError):
    exit_code = 37
    category = "invalid_pef"


# sealing
class EncodingFailure(ProtocolError, ValueError):
    exit_code = 40
    category = "encoding_failure"


class VerificationFailed(ProtocolError):
    exit_code = 41
    category = "verification_failed"


class KeyMismatch(ProtocolError):
    exit_code = 42
    category = "key_mismatch"


# oracle
class DuplicateTopic(ProtocolError):
    exit_code = 50
    category = "duplicate_topic"


class UnknownTopic(ProtocolError, KeyError):
    exit_code = 51
    category = "unknown_topic"


class NotFinalized(ProtocolError):
    exit_code = 52
    category = "not_finalized"


class InvalidFeed(ProtocolError, ValueError):
    exit_code = 53
    category = "invalid_feed"


# engine
class InvalidSpec(ProtocolError, ValueError):
    exit_code = 60
    category = "invalid_spec"


class InsufficientPool(ProtocolError):
    exit_code = 61
    category = "insufficient_pool"


class WrongPhase(ProtocolError):
    exit_code = 62
    category = "wrong_phase"


class TooEarly(ProtocolError):
    exit_code = 63
    category = "too_early"


class CapExceeded(ProtocolError):
    exit_code = 64
    category = "cap_exceeded"


class InvalidChoice(ProtocolError, ValueError):
    exit_code = 65
    category = "invalid_choice"


class InvalidStake(InvalidChoice):
    exit_code = 66
    category = "invalid_stake"


class MissingRevealKey(ProtocolError):
    exit_code = 67
    category = "missing_reveal_key"


class OracleUnavailable(ProtocolError):
    exit_code = 68
    category = "oracle_unavailable"


class UnknownPoll(ProtocolError, KeyError):
    exit_code = 69
    category = "unknown_poll"


class InsufficientReserve(ProtocolError):
    exit_code = 70
    category = "insufficient_reserve"


class UnknownHook(ProtocolError):
    exit_code = 71
    category = "unknown_hook"


class ClockError(ProtocolError, ValueError):
    exit_code = 72
    category = "clock_error"


# scenarios / persisted state
class UnknownScenario(ProtocolError, KeyError):
    exit_code = 80
    category = "unknown_scenario"


class GoldenMismatch(ProtocolError):
    exit_code = 81
    category = "golden_mismatch"

    def __init__(self, message: str, diff: list | None = None):
        super().__init__(message)
        self.diff = diff or []


class StateCorrupted(ProtocolError):
    exit_code = 82
    category = "state_corrupted"


class StateLocked(ProtocolError):
    exit_code = 83
    category = "state_locked"


def all_errors() -> list[type[ProtocolError]]:
    """Every concrete error class, ordered by exit code."""
    seen: list[type[ProtocolError]] = []
    stack = [ProtocolError]
    while stack:
        cls = stack.pop()
        seen.append(cls)
        stack.extend(cls.__subclasses__())
    return sorted(set(seen), key=lambda c: c.exit_code)
