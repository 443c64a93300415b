"""Synthetic event log: schema, I/O, generator, and dataset assembly.

The generator simulates a feeds-style surface. Each user session exposes a
slate of items ordered by a "legacy ranker" score that is independent of
true relevance (the display-propensity confound), and clicks are drawn as

    P(click | user, item, position, t) =
        examine(user_type, position) * affinity(user, category) *
        quality(item) * g_category(time since the user's last click in
        that category) * scale

where g is a per-category temporal profile: bumps at 24h multiples with
extra weekly amplification, a monotone decay, or flat. Session times act
as the dominating process and the click draw thins it by the closed-form
rate, so the planted structure is exactly known and self-reported in a
:class:`GroundTruth` bundle.

Dataset assembly applies the behavior filter (keep users with more than
``min_clicks - 1`` clicks), attaches up to 50 most recent prior clicks as
history, subsamples negatives to a 1:6 ratio per user-day, and splits by
date boundary with a seeded validation carve-out from the training days.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

TIERS = ("batch", "streaming", "edge")
EVENT_FIELDS = ("user_id", "item_id", "category_id", "timestamp", "position", "label", "tier")

DAY_SECONDS = 86_400
HOUR_SECONDS = 3_600


@dataclass(frozen=True)
class Event:
    user_id: int
    item_id: int
    category_id: int
    timestamp: int          # epoch seconds
    position: int
    label: int              # 1 = click, 0 = exposure without click
    tier: str               # batch | streaming | edge (tier of origin)


def write_events(path: str, events: list[Event]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(EVENT_FIELDS) + "\n")
        for e in events:
            fh.write(f"{e.user_id}\t{e.item_id}\t{e.category_id}\t{e.timestamp}\t"
                     f"{e.position}\t{e.label}\t{e.tier}\n")


def read_events(path: str) -> list[Event]:
    events: list[Event] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != list(EVENT_FIELDS):
            raise ValueError(f"{path}:1: bad header {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(EVENT_FIELDS):
                raise ValueError(f"{path}:{lineno}: expected {len(EVENT_FIELDS)} fields, "
                                 f"got {len(parts)}")
            try:
                events.append(Event(user_id=int(parts[0]), item_id=int(parts[1]),
                                    category_id=int(parts[2]), timestamp=int(parts[3]),
                                    position=int(parts[4]), label=int(parts[5]),
                                    tier=parts[6]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if parts[6] not in TIERS:
                raise ValueError(f"{path}:{lineno}: unknown tier {parts[6]!r}")
    return events


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

@dataclass
class CategoryProfile:
    """Temporal appeal g(dt) as a function of hours since the user's last
    click in the category; ``cold`` applies when there is no such click."""

    kind: str = "flat"                 # periodic | decay | flat
    base: float = 1.0
    amplitude: float = 0.0
    daily_period_hours: float = 24.0
    weekly_period_hours: float = 168.0
    bump_width_hours: float = 3.0
    weekly_boost: float = 1.0
    decay_rate_per_hour: float = 1.0 / 30.0
    cold_factor: float = 0.5

    def appeal(self, hours_since_last: float | None) -> float:
        if hours_since_last is None:
            return self.base + self.cold_factor * self.amplitude
        if self.kind == "flat":
            return self.base
        if self.kind == "decay":
            return self.base + self.amplitude * math.exp(-hours_since_last * self.decay_rate_per_hour)
        if self.kind == "periodic":
            per_week = round(self.weekly_period_hours / self.daily_period_hours)
            total = self.base
            width2 = 2.0 * self.bump_width_hours ** 2
            n = 1
            while (center := n * self.daily_period_hours) <= hours_since_last + 4 * self.bump_width_hours:
                bump = math.exp(-((hours_since_last - center) ** 2) / width2)
                boost = self.weekly_boost if n % per_week == 0 else 0.0
                total += self.amplitude * (1.0 + boost) * bump
                n += 1
            return total
        raise ValueError(f"unknown category profile kind {self.kind!r}")


def default_category_profiles(n_categories: int) -> list[CategoryProfile]:
    """Cycle periodic / decay / flat so every kind is planted."""
    kinds = []
    for i in range(n_categories):
        if i % 5 in (0, 1, 2):
            kinds.append(CategoryProfile(kind="periodic", base=0.12, amplitude=4.0,
                                         bump_width_hours=3.0, weekly_boost=1.0,
                                         cold_factor=0.25))
        elif i % 5 == 3:
            kinds.append(CategoryProfile(kind="decay", base=0.12, amplitude=4.0,
                                         decay_rate_per_hour=1 / 18.0, cold_factor=0.25))
        else:
            kinds.append(CategoryProfile(kind="flat", base=0.6))
    return kinds


DEFAULT_POSITION_PROFILES = (
    (0.95, 0.80, 0.45, 0.30, 0.20, 0.15, 0.12, 0.10, 0.08, 0.07),   # type 1: top heavy
    (0.25, 0.40, 0.95, 0.85, 0.35, 0.20, 0.15, 0.10, 0.08, 0.07),   # type 2: mid slots
    (0.40,) * 10,                                                    # type 3: indifferent
)


@dataclass
class GeneratorSpec:
    n_users: int = 10_000
    n_items: int = 200
    n_categories: int = 10
    horizon_days: float = 7.0
    sessions_per_day: float = 0.25          # casual users
    heavy_user_fraction: float = 0.07
    heavy_sessions_per_day: float = 2.5
    slate_size: int = 10                    # positions 0..slate_size-1
    candidate_pool: int = 30
    click_scale: float = 1.2
    max_click_probability: float = 0.9
    position_type_fractions: tuple[float, ...] = (0.60, 0.25, 0.15)
    position_profiles: tuple[tuple[float, ...], ...] = DEFAULT_POSITION_PROFILES
    category_profiles: list[CategoryProfile] = field(default_factory=list)
    base_epoch: int = 1_700_000_000
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.position_type_fractions) - 1.0) > 1e-9:
            raise ValueError("position type fractions must sum to 1")
        if len(self.position_profiles) != len(self.position_type_fractions):
            raise ValueError("one click profile per user type is required")
        for prof in self.position_profiles:
            if len(prof) != self.slate_size:
                raise ValueError("each position profile must cover the slate")
        if not self.category_profiles:
            self.category_profiles = default_category_profiles(self.n_categories)
        if len(self.category_profiles) != self.n_categories:
            raise ValueError("one temporal profile per category is required")

    @property
    def horizon_seconds(self) -> int:
        return int(self.horizon_days * DAY_SECONDS)


@dataclass
class GroundTruth:
    """Planted structure, self-reported so tests can compare against it."""

    user_type: np.ndarray          # (n_users,) index into position_profiles
    affinity: np.ndarray           # (n_users, n_categories)
    quality: np.ndarray            # (n_items,)
    display_propensity: np.ndarray  # (n_items,) legacy-ranker score, relevance-free
    item_category: np.ndarray      # (n_items,)
    position_profiles: np.ndarray  # (n_types, slate_size)

    def relevance(self, user_id: int, item_id: int) -> float:
        """Time-free planted relevance of an item to a user."""
        return float(self.affinity[user_id, self.item_category[item_id]]
                     * self.quality[item_id])

    def save(self, path: str) -> None:
        np.savez(path, user_type=self.user_type, affinity=self.affinity,
                 quality=self.quality, display_propensity=self.display_propensity,
                 item_category=self.item_category, position_profiles=self.position_profiles)

    @classmethod
    def load(cls, path: str) -> "GroundTruth":
        z = np.load(path)
        return cls(user_type=z["user_type"], affinity=z["affinity"], quality=z["quality"],
                   display_propensity=z["display_propensity"], item_category=z["item_category"],
                   position_profiles=z["position_profiles"])


def assign_tier(timestamp: int, horizon_end: int) -> str:
    age = horizon_end - timestamp
    if age > 2 * DAY_SECONDS:
        return "batch"
    if age >= 3 * HOUR_SECONDS:
        return "streaming"
    return "edge"


def _plant_population(spec: GeneratorSpec, rng: np.random.Generator) -> GroundTruth:
    type_draw = rng.random(spec.n_users)
    bounds = np.cumsum(spec.position_type_fractions)
    user_type = np.searchsorted(bounds, type_draw, side="right").astype(np.int64)
    user_type = np.minimum(user_type, len(spec.position_profiles) - 1)

    # a few preferred categories per user on top of a low floor
    affinity = np.full((spec.n_users, spec.n_categories), 0.15)
    n_pref = 3
    for u in range(spec.n_users):
        prefs = rng.choice(spec.n_categories, size=min(n_pref, spec.n_categories), replace=False)
        affinity[u, prefs] += rng.uniform(0.5, 0.85, size=len(prefs))

    quality = rng.uniform(0.3, 1.0, size=spec.n_items)
    display_propensity = rng.uniform(0.0, 1.0, size=spec.n_items)
    item_category = (np.arange(spec.n_items) * spec.n_categories // spec.n_items).astype(np.int64)
    return GroundTruth(user_type=user_type, affinity=affinity, quality=quality,
                       display_propensity=display_propensity, item_category=item_category,
                       position_profiles=np.asarray(spec.position_profiles))


def generate_events(spec: GeneratorSpec) -> tuple[list[Event], GroundTruth]:
    """Draw the full exposure/click log. Deterministic per spec.seed."""
    rng = np.random.default_rng(spec.seed)
    truth = _plant_population(spec, rng)
    horizon_end = spec.base_epoch + spec.horizon_seconds
    n_heavy = int(round(spec.n_users * spec.heavy_user_fraction))

    events: list[Event] = []
    for u in range(spec.n_users):
        rate = spec.heavy_sessions_per_day if u < n_heavy else spec.sessions_per_day
        n_sessions = rng.poisson(rate * spec.horizon_days)
        if n_sessions == 0:
            continue
        starts = np.sort(rng.integers(0, max(spec.horizon_seconds - spec.slate_size, 1),
                                      size=n_sessions))
        # keep per-user session stamps collision free (positions add 0..slate-1 s)
        for i in range(1, len(starts)):
            starts[i] = max(starts[i], starts[i - 1] + spec.slate_size + 1)
        starts = starts[starts < spec.horizon_seconds - spec.slate_size]

        profile = spec.position_profiles[truth.user_type[u]]
        last_click_at: dict[int, int] = {}
        for start in starts:
            pool = rng.choice(spec.n_items, size=min(spec.candidate_pool, spec.n_items),
                              replace=False)
            legacy = truth.display_propensity[pool] + rng.normal(0.0, 0.1, size=len(pool))
            slate = pool[np.argsort(-legacy, kind="stable")][:spec.slate_size]
            for k, item in enumerate(slate):
                t = int(spec.base_epoch + start + k)
                cat = int(truth.item_category[item])
                since = last_click_at.get(cat)
                hours = None if since is None else (t - since) / HOUR_SECONDS
                appeal = spec.category_profiles[cat].appeal(hours)
                p = profile[k] * truth.affinity[u, cat] * truth.quality[item] \
                    * appeal * spec.click_scale
                p = min(p, spec.max_click_probability)
                clicked = int(rng.random() < p)
                if clicked:
                    last_click_at[cat] = t
                events.append(Event(user_id=u, item_id=int(item), category_id=cat,
                                    timestamp=t, position=k, label=clicked,
                                    tier=assign_tier(t, horizon_end)))
    return events, truth


# ---------------------------------------------------------------------------
# dataset assembly
# ---------------------------------------------------------------------------

@dataclass
class SampleProtocol:
    min_clicks: int = 11            # keep users with more than 10 click behaviors
    max_history: int = 50
    negatives_per_positive: int = 6
    train_days: int = 6             # days 0..train_days-1 train, the rest test
    validation_fraction: float = 0.05
    seed: int = 0


@dataclass
class Sample:
    user_id: int
    item_id: int
    category_id: int
    position: int
    timestamp: int
    label: int
    history: tuple[Event, ...]      # <= max_history most recent clicks before timestamp


@dataclass
class Vocabulary:
    user_ids: list[int]
    item_ids: list[int]
    category_ids: list[int]


@dataclass
class DatasetSplit:
    events: list[Event]
    train: list[Sample]
    validation: list[Sample]
    test: list[Sample]
    vocabulary: Vocabulary
    protocol: SampleProtocol


def build_samples(events: list[Event], protocol: SampleProtocol) -> DatasetSplit:
    if not events:
        raise ValueError("cannot build samples from an empty event list")
    events = sorted(events, key=lambda e: (e.user_id, e.timestamp, e.position, e.item_id))
    t0 = min(e.timestamp for e in events)

    by_user: dict[int, list[Event]] = {}
    for e in events:
        by_user.setdefault(e.user_id, []).append(e)

    kept_users = [u for u, evs in by_user.items()
                  if sum(e.label for e in evs) >= protocol.min_clicks]
    if not kept_users:
        raise ValueError("no user passes the behavior filter; nothing to train on")

    rng = np.random.default_rng(protocol.seed)
    train: list[Sample] = []
    test: list[Sample] = []
    for u in sorted(kept_users):
        clicks: list[Event] = []
        per_day: dict[int, tuple[list[Sample], list[Sample]]] = {}
        for e in by_user[u]:
            history = tuple(clicks[-protocol.max_history:])
            sample = Sample(user_id=e.user_id, item_id=e.item_id, category_id=e.category_id,
                            position=e.position, timestamp=e.timestamp, label=e.label,
                            history=history)
            day = (e.timestamp - t0) // DAY_SECONDS
            pos_list, neg_list = per_day.setdefault(day, ([], []))
            (pos_list if e.label else neg_list).append(sample)
            if e.label:
                clicks.append(e)
        for day in sorted(per_day):
            pos_list, neg_list = per_day[day]
            if not pos_list:
                continue
            want = protocol.negatives_per_positive * len(pos_list)
            if len(neg_list) > want:
                picked = rng.choice(len(neg_list), size=want, replace=False)
                neg_list = [neg_list[i] for i in sorted(picked)]
            bucket = train if day < protocol.train_days else test
            bucket.extend(pos_list)
            bucket.extend(neg_list)

    train.sort(key=lambda s: (s.timestamp, s.user_id, s.position, s.item_id))
    test.sort(key=lambda s: (s.timestamp, s.user_id, s.position, s.item_id))

    validation: list[Sample] = []
    if protocol.validation_fraction > 0 and train:
        n_val = int(round(len(train) * protocol.validation_fraction))
        if n_val:
            picked = set(rng.choice(len(train), size=n_val, replace=False).tolist())
            validation = [s for i, s in enumerate(train) if i in picked]
            train = [s for i, s in enumerate(train) if i not in picked]

    vocab = Vocabulary(user_ids=sorted({e.user_id for e in events}),
                       item_ids=sorted({e.item_id for e in events}),
                       category_ids=sorted({e.category_id for e in events}))
    return DatasetSplit(events=events, train=train, validation=validation, test=test,
                        vocabulary=vocab, protocol=protocol)


def write_dataset(split: DatasetSplit, path: str) -> None:
    """Event log plus a sidecar with the assembly protocol; reading the pair
    reproduces the split exactly."""
    write_events(path, split.events)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(split.protocol), fh, sort_keys=True)


def read_dataset(path: str) -> DatasetSplit:
    events = read_events(path)
    with open(path + ".meta.json", "r", encoding="utf-8") as fh:
        protocol = SampleProtocol(**json.load(fh))
    return build_samples(events, protocol)
