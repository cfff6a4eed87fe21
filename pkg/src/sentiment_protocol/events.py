"""Append-only event log with a canonical JSON-lines form and digest."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Union


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class EventLog:
    def __init__(self, events: list[dict] | None = None):
        self.events: list[dict] = list(events or [])

    def append(self, kind: str, t: int, **fields) -> dict:
        event = {"seq": len(self.events), "t": t, "event": kind, **fields}
        self.events.append(event)
        return event

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["event"] == kind]

    def to_jsonl(self) -> str:
        return "".join(canonical_json(e) + "\n" for e in self.events)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def read(cls, path: Union[str, Path]) -> EventLog:
        text = Path(path).read_text(encoding="utf-8")
        return cls([json.loads(line) for line in text.splitlines() if line.strip()])
