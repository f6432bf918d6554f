"""Personalized ranking: interaction events, decayed user vectors, and
scalar-product ordering of releases.

A user's vector is the weighted sum of the topic vectors of papers they
interacted with.  Each event's weight is its kind's base weight times a
half-life decay in event age, so the whole vector can be aged forward by
one scalar factor and updated incrementally as new events arrive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import PaperRecord
from .lda import TopicVector


class RankingError(ValueError):
    pass


EVENT_KINDS = ("abstract_expand", "pdf_open", "authored")

_DEFAULT_BASES = {
    "abstract_expand": 1.0,
    "pdf_open": 2.0,
    "authored": 5.0,
}


@dataclass(frozen=True)
class RankingConfig:
    base_weights: Mapping[str, float] = field(
        default_factory=lambda: dict(_DEFAULT_BASES)
    )
    half_life_days: float = 180.0

    def __post_init__(self):
        if self.half_life_days <= 0:
            raise RankingError(
                f"half_life_days must be positive, got {self.half_life_days}"
            )
        for kind, base in self.base_weights.items():
            if base <= 0:
                raise RankingError(f"base weight for {kind!r} must be positive")


_DEFAULT_CONFIG = RankingConfig()


@dataclass(frozen=True)
class ClickEvent:
    user_id: str
    paper_id: str
    kind: str
    timestamp: datetime

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise RankingError(
                f"unknown event kind {self.kind!r}; expected one of {EVENT_KINDS}"
            )
        if not self.user_id or not self.paper_id:
            raise RankingError("user_id and paper_id must be non-empty")


def _as_utc(ts: datetime) -> datetime:
    """Naive timestamps are taken to be UTC."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def utc_day(ts: datetime) -> date:
    return _as_utc(ts).date()


def event_weight(
    event: ClickEvent,
    now: datetime,
    config: RankingConfig = _DEFAULT_CONFIG,
) -> float:
    """Base weight of the event kind, halved for every half-life of age."""
    age_days = (_as_utc(now) - _as_utc(event.timestamp)).total_seconds() / 86400.0
    if age_days < 0:
        raise RankingError(
            f"event at {event.timestamp.isoformat()} is in the future of "
            f"{now.isoformat()}"
        )
    base = config.base_weights.get(event.kind)
    if base is None:
        raise RankingError(f"no base weight configured for kind {event.kind!r}")
    return base * 2.0 ** (-age_days / config.half_life_days)


def dedupe_events(events: Iterable[ClickEvent]) -> list[ClickEvent]:
    """Drop repeats of (user, paper, kind) within the same UTC day,
    keeping the earliest occurrence in input order."""
    seen: set[tuple[str, str, str, date]] = set()
    kept = []
    for ev in events:
        key = (ev.user_id, ev.paper_id, ev.kind, utc_day(ev.timestamp))
        if key in seen:
            continue
        seen.add(key)
        kept.append(ev)
    return kept


def decay_factor(
    from_time: datetime,
    to_time: datetime,
    config: RankingConfig = _DEFAULT_CONFIG,
) -> float:
    """Factor that ages a user vector from one reference time to a later one."""
    age_days = (_as_utc(to_time) - _as_utc(from_time)).total_seconds() / 86400.0
    if age_days < 0:
        raise RankingError("cannot age a vector backwards in time")
    return 2.0 ** (-age_days / config.half_life_days)


def user_vector(
    events: Iterable[ClickEvent],
    paper_thetas: Mapping[str, TopicVector],
    K: int,
    now: datetime,
    config: RankingConfig = _DEFAULT_CONFIG,
) -> np.ndarray:
    """Replay all events into an unnormalized user topic vector.

    Events are deduplicated per (user, paper, kind, UTC day) first.  A
    user with no events gets the zero vector, which scores every paper
    equally.  An event whose paper has no topic vector is an error
    naming that paper.
    """
    u = np.zeros(K, dtype=np.float64)
    for ev in dedupe_events(events):
        theta = paper_thetas.get(ev.paper_id)
        if theta is None:
            raise RankingError(
                f"no topic vector for paper {ev.paper_id!r} referenced by an event"
            )
        if len(theta) != K:
            raise RankingError(
                f"topic vector for paper {ev.paper_id!r} has {len(theta)} "
                f"components, expected {K}"
            )
        u += event_weight(ev, now, config) * theta.weights
    return u


def apply_event(
    u: np.ndarray,
    vector_time: datetime,
    event: ClickEvent,
    paper_thetas: Mapping[str, TopicVector],
    config: RankingConfig = _DEFAULT_CONFIG,
) -> tuple[np.ndarray, datetime]:
    """Incrementally fold one new event into an existing user vector.

    The vector is aged from its reference time to the event time, the
    event is added at full freshness, and the new reference time is the
    event time.  The result matches a full replay at the same reference
    time.
    """
    ev_time = _as_utc(event.timestamp)
    theta = paper_thetas.get(event.paper_id)
    if theta is None:
        raise RankingError(
            f"no topic vector for paper {event.paper_id!r} referenced by an event"
        )
    aged = u * decay_factor(vector_time, ev_time, config)
    base = config.base_weights[event.kind]
    return aged + base * theta.weights, ev_time


@dataclass(frozen=True)
class ScoredPaper:
    paper: PaperRecord
    score: float
    theta: TopicVector | None = None


def rank_key(sp: ScoredPaper) -> tuple:
    """Sort key: higher score first; ties newer-first, then id ascending."""
    return (-sp.score, -sp.paper.submitted.toordinal(), sp.paper.id)


def sort_release(
    papers: Iterable[PaperRecord],
    paper_thetas: Mapping[str, TopicVector],
    u: np.ndarray,
) -> list[ScoredPaper]:
    """Order a release by scalar product with the user vector.

    Ties (including the all-zero vector of a fresh user) fall back to
    newer submission date, then ascending id.  A paper without a topic
    vector is an error naming that paper.
    """
    scored = []
    for paper in papers:
        theta = paper_thetas.get(paper.id)
        if theta is None:
            raise RankingError(f"no topic vector for paper {paper.id!r}")
        scored.append(
            ScoredPaper(paper=paper, score=float(u @ theta.weights), theta=theta)
        )
    scored.sort(key=rank_key)
    return scored


def related_papers(
    paper_id: str,
    papers: Iterable[PaperRecord],
    paper_thetas: Mapping[str, TopicVector],
    n: int = 10,
) -> list[ScoredPaper]:
    """Top-n papers by topic-vector scalar product with the given paper,
    excluding the paper itself."""
    target = paper_thetas.get(paper_id)
    if target is None:
        raise RankingError(f"no topic vector for paper {paper_id!r}")
    if n < 1:
        raise RankingError(f"n must be at least 1, got {n}")
    candidates = [p for p in papers if p.id != paper_id]
    if not candidates:
        raise RankingError("no candidate papers besides the target")
    return sort_release(candidates, paper_thetas, target.weights)[:n]


def rebuild_user_vectors(
    events_by_user: Mapping[str, Sequence[ClickEvent]],
    paper_thetas: Mapping[str, TopicVector],
    K: int,
    now: datetime,
    config: RankingConfig = _DEFAULT_CONFIG,
) -> tuple[dict[str, np.ndarray], int]:
    """Replay every user's history against a fresh set of paper vectors.

    Events whose paper has no vector under the new model are skipped;
    the total number skipped is returned alongside the vectors.
    """
    skipped = 0
    vectors: dict[str, np.ndarray] = {}
    for user_id, events in events_by_user.items():
        usable = []
        for ev in events:
            if ev.paper_id in paper_thetas:
                usable.append(ev)
            else:
                skipped += 1
        vectors[user_id] = user_vector(usable, paper_thetas, K, now, config)
    return vectors, skipped
