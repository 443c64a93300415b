"""Deterministic serving simulation: tier fusion and two-stage ranking.

Click events live in three stores with different retention windows and
visibility latencies: a batch store (90 days back, events become visible
a day after they happen), a streaming store (2 days back, visible after
tens of seconds) and an edge store (3 hours back, visible after a couple
of seconds). A behavior sequence for a request is the chronological,
deduplicated union of whatever is visible across the three tiers at the
request time.

Serving is two-staged: stage I scores the channel candidates with the
position-0 model score and keeps only the top M, so content candidates
are fetched for at most M channels; stage II scores the contents of the
selected channels, orders them, and re-ranks the channels by their best
content score. Ties always break toward the smaller id.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_synth import DAY_SECONDS, HOUR_SECONDS, Event
from .data_synth import Sample
from .model import CoupaModel

TOP_M_CHANNELS = 5


@dataclass(frozen=True)
class TierPolicy:
    batch_window: float = 90 * DAY_SECONDS
    batch_latency: float = 1 * DAY_SECONDS
    stream_window: float = 2 * DAY_SECONDS
    stream_latency: float = 30.0
    edge_window: float = 3 * HOUR_SECONDS
    edge_latency: float = 2.0


@dataclass
class TierStore:
    """Per-tier click events for all users (an event may sit in several tiers)."""

    batch: list[Event] = field(default_factory=list)
    streaming: list[Event] = field(default_factory=list)
    edge: list[Event] = field(default_factory=list)
    policy: TierPolicy = field(default_factory=TierPolicy)

    @classmethod
    def from_events(cls, events: list[Event], now: float,
                    policy: TierPolicy | None = None) -> "TierStore":
        """Window the clicks of an event log into the three tiers as of ``now``."""
        policy = policy or TierPolicy()
        store = cls(policy=policy)
        for e in events:
            if not e.label:
                continue
            age = now - e.timestamp
            if age < 0:
                continue
            if age <= policy.batch_window:
                store.batch.append(e)
            if age <= policy.stream_window:
                store.streaming.append(e)
            if age <= policy.edge_window:
                store.edge.append(e)
        return store


def fuse_sequences(store: TierStore, user_id: int, now: float) -> list[Event]:
    """Chronological, deduplicated merge of the user's events visible at
    ``now`` under each tier's window and latency."""
    policy = store.policy
    tiers = ((store.batch, policy.batch_latency, policy.batch_window),
             (store.streaming, policy.stream_latency, policy.stream_window),
             (store.edge, policy.edge_latency, policy.edge_window))
    seen: dict[tuple[int, int, int], Event] = {}
    for events, latency, window in tiers:
        for e in events:
            if e.user_id != user_id:
                continue
            age = now - e.timestamp
            if latency <= age <= window:
                seen.setdefault((e.user_id, e.item_id, e.timestamp), e)
    return sorted(seen.values(), key=lambda e: (e.timestamp, e.item_id))


@dataclass
class ServeRequest:
    user_id: int
    timestamp: int
    channels: list[int]                       # channel candidate ids
    contents: dict[int, list[int]]            # channel id -> content candidate ids

    def __post_init__(self):
        if not self.channels:
            raise ValueError("a request needs at least one channel candidate")


@dataclass
class RankedChannel:
    channel_id: int
    score: float                              # final (content-aware) ranking key
    stage1_score: float
    contents: list[tuple[int, float]]         # ordered (content id, score)


@dataclass
class RankedResult:
    channels: list[RankedChannel]


class ServingSimulator:
    """Scores channels and contents with one model over fused histories."""

    def __init__(self, model: CoupaModel, store: TierStore,
                 item_categories: dict[int, int] | None = None,
                 top_m: int = TOP_M_CHANNELS):
        self.model = model
        self.store = store
        self.item_categories = item_categories or {}
        self.top_m = top_m

    def _score(self, user_id: int, item_ids: list[int], now: int,
               history: list[Event]) -> np.ndarray:
        samples = [Sample(user_id=user_id, item_id=v,
                          category_id=self.item_categories.get(v, -1),
                          position=0, timestamp=now, label=0,
                          history=tuple(e for e in history if e.timestamp < now))
                   for v in item_ids]
        # one candidate per batch: scores must not depend on what else was
        # scored alongside (BLAS blocking differs with batch layout, and a
        # last-ulp difference can flip the order of near-tied candidates)
        return self.model.predict_scores(samples, batch_size=1)

    def stage1_rank(self, request: ServeRequest) -> list[tuple[int, float]]:
        """Top-M channels by position-0 score; ties break on ascending id."""
        history = fuse_sequences(self.store, request.user_id, request.timestamp)
        scores = self._score(request.user_id, request.channels, request.timestamp, history)
        order = sorted(zip(request.channels, scores), key=lambda cs: (-cs[1], cs[0]))
        return [(c, float(s)) for c, s in order[:self.top_m]]

    def stage2_rank(self, request: ServeRequest,
                    stage1: list[tuple[int, float]],
                    fetch_contents=None) -> RankedResult:
        """Content ranking within the selected channels, then channel
        re-ranking by best content score. ``fetch_contents`` is only ever
        called for stage-1 winners; channels without contents keep their
        stage-1 score."""
        if fetch_contents is None:
            fetch_contents = lambda channel: request.contents.get(channel, [])
        history = fuse_sequences(self.store, request.user_id, request.timestamp)
        ranked: list[RankedChannel] = []
        for channel, s1 in stage1:
            content_ids = list(fetch_contents(channel))
            if content_ids:
                scores = self._score(request.user_id, content_ids, request.timestamp, history)
                ordered = sorted(zip(content_ids, scores), key=lambda cs: (-cs[1], cs[0]))
                contents = [(c, float(s)) for c, s in ordered]
                key = contents[0][1]
            else:
                contents = []
                key = s1
            ranked.append(RankedChannel(channel_id=channel, score=key,
                                        stage1_score=s1, contents=contents))
        ranked.sort(key=lambda ch: (-ch.score, ch.channel_id))
        return RankedResult(channels=ranked)

    def serve(self, request: ServeRequest) -> RankedResult:
        return self.stage2_rank(request, self.stage1_rank(request))


# ---------------------------------------------------------------------------
# request file format
# ---------------------------------------------------------------------------

def parse_request_line(line: str, lineno: int = 0) -> ServeRequest:
    """``user_id <TAB> timestamp <TAB> ch1,ch2 <TAB> ch1:c1|c2;ch2:c3``"""
    parts = line.rstrip("\n").split("\t")
    if len(parts) not in (3, 4):
        raise ValueError(f"line {lineno}: expected 3 or 4 tab-separated fields")
    try:
        user_id, timestamp = int(parts[0]), int(parts[1])
        channels = [int(c) for c in parts[2].split(",") if c]
        contents: dict[int, list[int]] = {}
        if len(parts) == 4 and parts[3]:
            for chunk in parts[3].split(";"):
                if not chunk:
                    continue
                channel, ids = chunk.split(":", 1)
                contents[int(channel)] = [int(c) for c in ids.split("|") if c]
    except ValueError as exc:
        raise ValueError(f"line {lineno}: {exc}") from None
    return ServeRequest(user_id=user_id, timestamp=timestamp, channels=channels,
                        contents=contents)


def read_requests(path: str) -> list[ServeRequest]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                out.append(parse_request_line(line, lineno))
    return out


def format_result(index: int, request: ServeRequest, result: RankedResult) -> list[str]:
    lines = []
    for rank, ch in enumerate(result.channels):
        contents = ",".join(f"{c}:{s!r}" for c, s in ch.contents)
        lines.append(f"{index}\t{request.user_id}\t{request.timestamp}\t{rank}\t"
                     f"{ch.channel_id}\t{ch.score!r}\t{contents}")
    return lines
