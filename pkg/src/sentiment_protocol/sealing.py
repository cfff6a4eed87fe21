"""Sealed sentiment submissions (commit, then reveal at tally).

A sealed choice carries a SHA-256 commitment to ``encoding(choice) || nonce``
and a ciphertext of the same payload that only the pollster can open. The
encryption is pluggable. The bundled ``KeystreamSealer`` is a deterministic
hash-keystream cipher meant for simulation and tests: its "public" key holds
the stream key, so it offers no secrecy against anyone who has that key.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import secrets
from dataclasses import dataclass
from typing import Optional, Protocol

from .core import Interval, Label, SentimentChoice, canonical_encoding, parse_choice
from .errors import EncodingFailure, KeyMismatch, VerificationFailed

NONCE_BYTES = 32
KEY_ID_BYTES = 8
_TAGS = {Label: b"L", Interval: b"I"}


@dataclass(frozen=True)
class SealedChoice:
    ciphertext: bytes
    commitment: bytes

    def to_json(self) -> dict:
        return {
            "ciphertext": base64.b64encode(self.ciphertext).decode("ascii"),
            "commitment": self.commitment.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> SealedChoice:
        try:
            return cls(base64.b64decode(obj["ciphertext"], validate=True), bytes.fromhex(obj["commitment"]))
        except (KeyError, ValueError) as exc:
            raise EncodingFailure(f"malformed sealed choice: {exc}") from exc


@dataclass(frozen=True)
class PublicSealKey:
    key_id: bytes
    stream_key: bytes

    def hex(self) -> str:
        return (self.key_id + self.stream_key).hex()

    @classmethod
    def from_hex(cls, text: str) -> PublicSealKey:
        raw = bytes.fromhex(text)
        return cls(raw[:KEY_ID_BYTES], raw[KEY_ID_BYTES:])


@dataclass(frozen=True)
class PrivateRevealKey:
    secret: bytes

    @property
    def key_id(self) -> bytes:
        return hashlib.sha256(b"seal-id" + self.secret).digest()[:KEY_ID_BYTES]

    @property
    def stream_key(self) -> bytes:
        return hashlib.sha256(b"seal-stream" + self.secret).digest()

    def public(self) -> PublicSealKey:
        return PublicSealKey(self.key_id, self.stream_key)

    def hex(self) -> str:
        return self.secret.hex()

    @classmethod
    def from_hex(cls, text: str) -> PrivateRevealKey:
        return cls(bytes.fromhex(text))


@dataclass(frozen=True)
class PollKeyPair:
    public: PublicSealKey
    private: PrivateRevealKey

    @classmethod
    def generate(cls, seed: Optional[bytes] = None) -> PollKeyPair:
        """Fresh key pair; pass ``seed`` for a reproducible one."""
        secret = hashlib.sha256(b"seal-seed" + seed).digest() if seed is not None else secrets.token_bytes(32)
        private = PrivateRevealKey(secret)
        return cls(private.public(), private)


class Sealer(Protocol):
    def encrypt(self, payload: bytes, iv: bytes, key: PublicSealKey) -> bytes: ...

    def decrypt(self, body: bytes, iv: bytes, key: PrivateRevealKey) -> bytes: ...


class KeystreamSealer:
    """XOR with a SHA-256 counter-mode keystream seeded by the commitment."""

    @staticmethod
    def _stream(stream_key: bytes, iv: bytes, n: int) -> bytes:
        out = bytearray()
        counter = 0
        while len(out) < n:
            out += hashlib.sha256(stream_key + iv + counter.to_bytes(8, "big")).digest()
            counter += 1
        return bytes(out[:n])

    def encrypt(self, payload: bytes, iv: bytes, key: PublicSealKey) -> bytes:
        ks = self._stream(key.stream_key, iv, len(payload))
        return bytes(a ^ b for a, b in zip(payload, ks))

    def decrypt(self, body: bytes, iv: bytes, key: PrivateRevealKey) -> bytes:
        ks = self._stream(key.stream_key, iv, len(body))
        return bytes(a ^ b for a, b in zip(body, ks))


DEFAULT_SEALER = KeystreamSealer()


def random_nonce() -> bytes:
    return secrets.token_bytes(NONCE_BYTES)


def commitment(choice: SentimentChoice, nonce: bytes) -> bytes:
    return hashlib.sha256(canonical_encoding(choice) + nonce).digest()


def verify(sealed: SealedChoice, choice: SentimentChoice, nonce: bytes) -> bool:
    return hmac.compare_digest(sealed.commitment, commitment(choice, nonce))


def _payload(choice: SentimentChoice, nonce: bytes) -> bytes:
    if len(nonce) != NONCE_BYTES:
        raise EncodingFailure(f"nonce must be {NONCE_BYTES} bytes")
    try:
        tag = _TAGS[type(choice)]
        enc = canonical_encoding(choice)
    except (KeyError, UnicodeEncodeError) as exc:
        raise EncodingFailure(f"cannot encode {choice!r}") from exc
    if not enc or len(enc) > 0xFFFF:
        raise EncodingFailure("choice encoding must be 1..65535 bytes")
    return tag + len(enc).to_bytes(2, "big") + enc + nonce


def _parse_payload(payload: bytes) -> tuple[SentimentChoice, bytes]:
    try:
        tag, size = payload[:1], int.from_bytes(payload[1:3], "big")
        enc, nonce = payload[3 : 3 + size], payload[3 + size :]
        text = enc.decode("utf-8")
    except (UnicodeDecodeError, IndexError):
        raise VerificationFailed("sealed payload does not decode") from None
    if len(enc) != size or len(nonce) != NONCE_BYTES or tag not in _TAGS.values():
        raise VerificationFailed("sealed payload has the wrong layout")
    choice = parse_choice(text) if tag == b"I" else Label(text)
    if tag == b"I" and not isinstance(choice, Interval):
        raise VerificationFailed("sealed interval does not parse")
    return choice, nonce


def seal(
    choice: SentimentChoice, nonce: bytes, key: PublicSealKey, sealer: Sealer = DEFAULT_SEALER
) -> SealedChoice:
    """Deterministic in ``(choice, nonce, key)``."""
    payload = _payload(choice, nonce)
    commit = commitment(choice, nonce)
    return SealedChoice(key.key_id + sealer.encrypt(payload, commit, key), commit)


def reveal(
    sealed: SealedChoice, key: PrivateRevealKey, sealer: Sealer = DEFAULT_SEALER
) -> tuple[SentimentChoice, bytes]:
    if not hmac.compare_digest(sealed.ciphertext[:KEY_ID_BYTES], key.key_id):
        raise KeyMismatch("sealed under a different poll key")
    payload = sealer.decrypt(sealed.ciphertext[KEY_ID_BYTES:], sealed.commitment, key)
    choice, nonce = _parse_payload(payload)
    if not verify(sealed, choice, nonce):
        raise VerificationFailed("revealed choice does not match its commitment")
    return choice, nonce
