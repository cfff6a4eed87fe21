"""Outcome resolution from static, deterministic feeds."""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .core import Outcome, OutcomeSet, outcome_from_json
from .errors import DuplicateTopic, InvalidFeed, NotFinalized, UnknownTopic


@dataclass(frozen=True)
class OutcomeFeed:
    """Timestamped outcomes for one topic; nothing resolves before ``finalized_at``."""

    topic_id: str
    entries: tuple[tuple[int, Outcome], ...]
    finalized_at: int

    def __post_init__(self):
        entries = tuple((int(t), o) for t, o in self.entries)
        times = [t for t, _ in entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidFeed(f"feed {self.topic_id!r} timestamps must strictly increase")
        if any(t < 0 for t in times) or int(self.finalized_at) < 0:
            raise InvalidFeed("timestamps are unsigned")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "finalized_at", int(self.finalized_at))

    def to_json(self) -> dict:
        return {
            "topic": self.topic_id,
            "finalized_at": self.finalized_at,
            "entries": [[t, o.to_json()] for t, o in self.entries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> OutcomeFeed:
        try:
            entries = tuple((int(t), outcome_from_json(o)) for t, o in obj.get("entries", []))
            return cls(str(obj["topic"]), entries, int(obj["finalized_at"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidFeed(f"malformed feed: {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> OutcomeFeed:
        return cls.from_json(json.loads(Path(path).read_text()))


class Oracle:
    """Registry of feeds keyed by topic."""

    def __init__(self):
        self.feeds: dict[str, OutcomeFeed] = {}

    def register_feed(self, feed: OutcomeFeed, outcome_set: Optional[OutcomeSet] = None) -> None:
        if feed.topic_id in self.feeds:
            raise DuplicateTopic(feed.topic_id)
        if outcome_set is not None:
            for t, o in feed.entries:
                if not outcome_set.contains(o):
                    raise InvalidFeed(f"feed {feed.topic_id!r} has outcome {o!r} at {t} outside the outcome set")
        self.feeds[feed.topic_id] = feed

    def feed(self, topic_id: str) -> OutcomeFeed:
        try:
            return self.feeds[topic_id]
        except KeyError:
            raise UnknownTopic(topic_id) from None

    def resolve(self, topic_id: str, at: int, now: Optional[int] = None) -> Outcome:
        """Latest entry at or before ``at``, readable once the feed has finalized by ``now``."""
        feed = self.feed(topic_id)
        now = at if now is None else now
        if now < feed.finalized_at:
            raise NotFinalized(f"{topic_id!r} finalizes at {feed.finalized_at}, asked at {now}")
        times = [t for t, _ in feed.entries]
        idx = bisect.bisect_right(times, at)
        if idx == 0:
            raise NotFinalized(f"{topic_id!r} has no outcome at or before {at}")
        return feed.entries[idx - 1][1]
