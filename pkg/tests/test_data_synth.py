import numpy as np
import pytest

from coupa import data_synth as ds


def small_spec(**overrides) -> ds.GeneratorSpec:
    defaults = dict(
        n_users=40, n_items=12, n_categories=3, horizon_days=3.0,
        sessions_per_day=1.5, heavy_user_fraction=0.25, heavy_sessions_per_day=5.0,
        slate_size=4, candidate_pool=8, click_scale=1.0,
        position_type_fractions=(0.5, 0.3, 0.2),
        position_profiles=((0.9, 0.6, 0.3, 0.2),
                           (0.3, 0.5, 0.9, 0.7),
                           (0.5, 0.5, 0.5, 0.5)),
        category_profiles=[ds.CategoryProfile(kind="periodic", base=0.3, amplitude=2.0),
                           ds.CategoryProfile(kind="decay", base=0.3, amplitude=2.0),
                           ds.CategoryProfile(kind="flat")],
        seed=11,
    )
    defaults.update(overrides)
    return ds.GeneratorSpec(**defaults)


def test_zero_exposure_rate_gives_empty_log():
    spec = small_spec(sessions_per_day=0.0, heavy_user_fraction=0.0)
    events, _ = ds.generate_events(spec)
    assert events == []


def test_generation_deterministic_per_seed():
    a, _ = ds.generate_events(small_spec())
    b, _ = ds.generate_events(small_spec())
    assert a == b
    c, _ = ds.generate_events(small_spec(seed=12))
    assert c != a


def test_event_invariants_and_tiers():
    spec = small_spec()
    events, _ = ds.generate_events(spec)
    assert events
    end = spec.base_epoch + spec.horizon_seconds
    for e in events:
        assert 0 <= e.position < spec.slate_size
        assert e.label in (0, 1)
        assert e.tier == ds.assign_tier(e.timestamp, end)
    ages = {t: [] for t in ds.TIERS}
    for e in events:
        ages[e.tier].append(end - e.timestamp)
    assert min(ages["batch"]) > 2 * ds.DAY_SECONDS
    assert max(ages["edge"]) < 3 * ds.HOUR_SECONDS
    if ages["streaming"]:
        assert 3 * ds.HOUR_SECONDS <= min(ages["streaming"])
        assert max(ages["streaming"]) <= 2 * ds.DAY_SECONDS


def test_user_timestamps_are_distinct():
    events, _ = ds.generate_events(small_spec())
    seen = set()
    for e in events:
        key = (e.user_id, e.timestamp)
        assert key not in seen
        seen.add(key)


def test_daily_category_replants_interval_peak():
    """One user, one pure-daily category, long horizon: the re-click interval
    histogram must peak in the 24h bucket."""
    spec = small_spec(
        n_users=1, n_items=4, n_categories=1, horizon_days=40.0,
        sessions_per_day=8.0, heavy_user_fraction=0.0, slate_size=4,
        candidate_pool=4, click_scale=2.0,
        position_type_fractions=(1.0,),
        position_profiles=((0.9, 0.9, 0.9, 0.9),),
        category_profiles=[ds.CategoryProfile(kind="periodic", base=0.02, amplitude=3.0,
                                              bump_width_hours=2.0, cold_factor=0.2)],
        seed=5,
    )
    events, _ = ds.generate_events(spec)
    clicks = sorted(e.timestamp for e in events if e.label)
    gaps_h = np.diff(clicks) / 3600.0
    gaps_h = gaps_h[gaps_h > 6.0]  # ignore within-session bursts
    assert len(gaps_h) > 30
    hist, edges = np.histogram(gaps_h, bins=np.arange(6, 80, 4))
    mode_center = 0.5 * (edges[np.argmax(hist)] + edges[np.argmax(hist) + 1])
    assert 20.0 <= mode_center <= 28.0


def test_decay_category_mode_within_first_day():
    spec = small_spec(
        n_users=1, n_items=4, n_categories=1, horizon_days=40.0,
        sessions_per_day=8.0, heavy_user_fraction=0.0, slate_size=4,
        candidate_pool=4, click_scale=0.6,
        position_type_fractions=(1.0,),
        position_profiles=((0.9, 0.9, 0.9, 0.9),),
        category_profiles=[ds.CategoryProfile(kind="decay", base=0.01, amplitude=3.0,
                                              decay_rate_per_hour=1 / 12.0, cold_factor=0.2)],
        seed=6,
    )
    events, _ = ds.generate_events(spec)
    clicks = sorted(e.timestamp for e in events if e.label)
    gaps_h = np.diff(clicks) / 3600.0
    gaps_h = gaps_h[gaps_h > 3.0]
    hist, _ = np.histogram(gaps_h, bins=np.arange(3, 100, 24))
    assert hist[0] > hist[1] >= hist[2]  # monotone decay after the first day


def test_type1_population_clicks_decrease_over_top_positions():
    spec = small_spec(n_users=200, position_type_fractions=(1.0,),
                      position_profiles=((0.9, 0.6, 0.3, 0.2),),
                      sessions_per_day=2.0, heavy_user_fraction=0.0, seed=7)
    events, _ = ds.generate_events(spec)
    share = np.zeros(4)
    for e in events:
        if e.label:
            share[e.position] += 1
    assert share[0] > share[1] > share[2] > share[3]


def test_ground_truth_shapes_and_relevance(tmp_path):
    spec = small_spec()
    _, truth = ds.generate_events(spec)
    assert truth.affinity.shape == (40, 3)
    assert truth.quality.shape == (12,)
    assert truth.user_type.max() < 3
    r = truth.relevance(0, 5)
    assert r == pytest.approx(truth.affinity[0, truth.item_category[5]] * truth.quality[5])
    path = str(tmp_path / "truth.npz")
    truth.save(path)
    loaded = ds.GroundTruth.load(path)
    assert np.array_equal(loaded.affinity, truth.affinity)
    assert np.array_equal(loaded.user_type, truth.user_type)


# ---------------------------------------------------------------------------
# dataset assembly
# ---------------------------------------------------------------------------

def _impressions(n_users=6, days=3, sessions_per_day=4, slate=4, click_positions=(0,)):
    """Deterministic toy log: clicks at fixed slate positions."""
    events = []
    t0 = 1_000_000_000
    for u in range(n_users):
        for d in range(days):
            for s in range(sessions_per_day):
                base = t0 + d * ds.DAY_SECONDS + s * 3000 + u * 11
                for k in range(slate):
                    events.append(ds.Event(
                        user_id=u, item_id=(u + k) % 9, category_id=k % 2,
                        timestamp=base + k, position=k,
                        label=int(k in click_positions), tier="batch"))
    return events


def test_filter_drops_sparse_users():
    # user 0 keeps only its first 5 clicks, others get 12
    events, kept0 = [], 0
    for e in _impressions():
        if e.user_id == 0 and e.label:
            kept0 += 1
            if kept0 > 5:
                continue
        events.append(e)
    clicks0 = sum(e.label for e in events if e.user_id == 0)
    assert clicks0 <= 10
    split = ds.build_samples(events, ds.SampleProtocol(min_clicks=11, train_days=2,
                                                       validation_fraction=0.0))
    users = {s.user_id for s in split.train + split.test}
    assert 0 not in users
    assert users == {1, 2, 3, 4, 5}


def test_negative_ratio_is_exact():
    events = _impressions(slate=10)  # 1 click + 9 non-clicks per session
    split = ds.build_samples(events, ds.SampleProtocol(min_clicks=1, train_days=2,
                                                       validation_fraction=0.0))
    for bucket in (split.train, split.test):
        by_user_day = {}
        for s in bucket:
            key = (s.user_id, (s.timestamp - 1_000_000_000) // ds.DAY_SECONDS)
            pos, neg = by_user_day.setdefault(key, [0, 0])
            by_user_day[key] = [pos + s.label, neg + (1 - s.label)]
        for pos, neg in by_user_day.values():
            assert neg == 6 * pos


def test_histories_strictly_precede_and_are_clicks():
    events = _impressions()
    split = ds.build_samples(events, ds.SampleProtocol(min_clicks=1, train_days=2,
                                                       validation_fraction=0.0))
    for s in split.train + split.test:
        for e in s.history:
            assert e.timestamp < s.timestamp
            assert e.label == 1
        assert len(s.history) <= 50


def test_history_caps_at_max():
    events = _impressions(n_users=1, days=1, sessions_per_day=80, slate=2,
                          click_positions=(0, 1))
    split = ds.build_samples(events, ds.SampleProtocol(min_clicks=1, train_days=2,
                                                       max_history=50,
                                                       validation_fraction=0.0))
    longest = max(len(s.history) for s in split.train)
    assert longest == 50


def test_split_day_boundary_and_validation_carve():
    events = _impressions(days=3)
    protocol = ds.SampleProtocol(min_clicks=1, train_days=2, validation_fraction=0.1, seed=4)
    split = ds.build_samples(events, protocol)
    t0 = min(e.timestamp for e in events)
    for s in split.train + split.validation:
        assert (s.timestamp - t0) // ds.DAY_SECONDS < 2
    for s in split.test:
        assert (s.timestamp - t0) // ds.DAY_SECONDS >= 2
    total_train = len(split.train) + len(split.validation)
    assert len(split.validation) == int(round(total_train * 0.1))


def test_build_requires_events_and_surviving_users():
    with pytest.raises(ValueError):
        ds.build_samples([], ds.SampleProtocol())
    sparse = _impressions(n_users=2, days=1, sessions_per_day=2)
    with pytest.raises(ValueError):
        ds.build_samples(sparse, ds.SampleProtocol(min_clicks=100))


def test_build_samples_deterministic():
    events = _impressions(slate=10)
    p = ds.SampleProtocol(min_clicks=1, train_days=2, seed=9)
    a = ds.build_samples(events, p)
    b = ds.build_samples(events, p)
    assert a.train == b.train and a.validation == b.validation and a.test == b.test


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def test_event_roundtrip_exact(tmp_path):
    events, _ = ds.generate_events(small_spec())
    path = str(tmp_path / "events.tsv")
    ds.write_events(path, events)
    assert ds.read_events(path) == events


def test_empty_log_roundtrip(tmp_path):
    path = str(tmp_path / "empty.tsv")
    ds.write_events(path, [])
    assert ds.read_events(path) == []
    with open(path) as fh:
        assert fh.readline().strip() == "\t".join(ds.EVENT_FIELDS)


def test_parse_errors_name_the_line(tmp_path):
    path = str(tmp_path / "bad.tsv")
    with open(path, "w") as fh:
        fh.write("\t".join(ds.EVENT_FIELDS) + "\n")
        fh.write("1\t2\t3\tnot_a_number\t0\t1\tbatch\n")
    with pytest.raises(ValueError, match=":2"):
        ds.read_events(path)

    with open(path, "w") as fh:
        fh.write("\t".join(ds.EVENT_FIELDS) + "\n")
        fh.write("1\t2\t3\t100\t0\t1\n")
    with pytest.raises(ValueError, match=":2"):
        ds.read_events(path)

    with open(path, "w") as fh:
        fh.write("wrong\theader\n")
    with pytest.raises(ValueError, match=":1"):
        ds.read_events(path)


def test_dataset_roundtrip_reproduces_split(tmp_path):
    events = _impressions(slate=10)
    split = ds.build_samples(events, ds.SampleProtocol(min_clicks=1, train_days=2, seed=3))
    path = str(tmp_path / "data.tsv")
    ds.write_dataset(split, path)
    again = ds.read_dataset(path)
    assert again.train == split.train
    assert again.validation == split.validation
    assert again.test == split.test
    assert again.vocabulary == split.vocabulary
