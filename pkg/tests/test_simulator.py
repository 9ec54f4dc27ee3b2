from collections import Counter
from datetime import date

import pytest

from querygate.errors import InvalidConfig, WindowOutOfRange
from querygate.simulator import (
    EventSpec,
    StreamConfig,
    day_weights,
    generate_stream,
    inject_event,
    read_stream,
    signature_label,
    write_stream,
)
from querygate.taxonomy import reference_distribution

SMALL = StreamConfig(days=10, peak_daily_volume=500, seed=1)


def test_determinism_byte_identical(tmp_path):
    for run in ("a", "b"):
        items = generate_stream(SMALL)
        write_stream(tmp_path / f"{run}.jsonl", tmp_path / f"{run}.labels", items)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert (tmp_path / "a.labels").read_bytes() == (tmp_path / "b.labels").read_bytes()


def test_day_1_to_3_carry_peak_volume():
    items = generate_stream(SMALL)
    by_day = Counter(item.record.received_at.date() for item in items)
    volumes = [by_day[d] for d in sorted(by_day)]
    assert volumes[0] == volumes[1] == volumes[2] == SMALL.peak_daily_volume
    peak = max(volumes)
    assert peak == SMALL.peak_daily_volume
    for v in volumes[3:]:
        assert 0.50 <= v / peak <= 0.85


def test_sensitive_rate_in_band():
    items = generate_stream(StreamConfig(days=8, peak_daily_volume=5000, seed=2))
    by_day: dict[date, list] = {}
    for item in items:
        by_day.setdefault(item.record.received_at.date(), []).append(item)
    for day_items in by_day.values():
        sensitive = sum(1 for i in day_items if not i.planted.is_safe)
        rate = sensitive / len(day_items) * 100
        assert 2.5 <= rate <= 4.5


def test_planted_distribution_matches_config():
    # >=100k sensitive samples; a high sensitive rate keeps the stream small
    # without changing the category draw being checked
    items = generate_stream(StreamConfig(
        days=30, peak_daily_volume=18_000, sensitive_rate_band=(0.30, 0.30), seed=3,
    ))
    sensitive = [i for i in items if not i.planted.is_safe]
    assert len(sensitive) > 100_000
    frac = sum(1 for i in sensitive if i.planted.id == "discrimination") / len(sensitive)
    expected = reference_distribution().avg["discrimination"] / sum(
        reference_distribution().avg.values()
    )
    assert frac == pytest.approx(expected, abs=0.01)


def test_oracle_recovers_planted_labels():
    items = generate_stream(SMALL)
    assert all(signature_label(i.record.text) == i.planted for i in items)


def test_stream_file_round_trip(tmp_path):
    items = generate_stream(SMALL)[:100]
    write_stream(tmp_path / "s.jsonl", tmp_path / "s.labels", items)
    loaded = read_stream(tmp_path / "s.jsonl", tmp_path / "s.labels")
    assert [i.record for i in loaded] == [i.record for i in items]
    assert [i.planted for i in loaded] == [i.planted for i in items]


# --- events -------------------------------------------------------------

def test_inject_event_appends():
    ev = EventSpec(start_day=4, duration=3, multipliers={"felony_crimes": 3.0})
    cfg = inject_event(SMALL, ev)
    assert cfg.events == (ev,)
    assert SMALL.events == ()  # original untouched


def test_event_window_out_of_range():
    with pytest.raises(WindowOutOfRange):
        inject_event(SMALL, EventSpec(start_day=9, duration=3, multipliers={}))
    with pytest.raises(WindowOutOfRange):
        inject_event(SMALL, EventSpec(start_day=0, duration=1, multipliers={}))


def test_event_raises_in_window_share():
    ev = EventSpec(start_day=4, duration=3, multipliers={"felony_crimes": 3.0})
    cfg = inject_event(StreamConfig(days=12, peak_daily_volume=20_000, seed=4), ev)
    items = generate_stream(cfg)
    window_days = {cfg.start_date.toordinal() + d for d in (3, 4, 5)}  # days 4..6

    def felony_share(in_window):
        pool = [
            i for i in items
            if not i.planted.is_safe
            and ((i.record.received_at.date().toordinal() in window_days) == in_window)
        ]
        return sum(1 for i in pool if i.planted.id == "felony_crimes") / len(pool)

    assert felony_share(True) > felony_share(False)


def test_neutral_multipliers_are_noop():
    ev = EventSpec(start_day=4, duration=3,
                   multipliers={"felony_crimes": 1.0, "privacy": 1.0})
    cfg = inject_event(SMALL, ev)
    assert day_weights(cfg, 5) == day_weights(SMALL, 5)


def test_overlapping_events_compose_multiplicatively():
    cfg = inject_event(SMALL, EventSpec(4, 3, {"privacy": 2.0}))
    cfg = inject_event(cfg, EventSpec(5, 3, {"privacy": 3.0}))
    # on day 5 both events apply: weight ratio vs base should reflect x6
    base = day_weights(SMALL, 5)
    adjusted = day_weights(cfg, 5)
    ratio = (adjusted["privacy"] / adjusted["profanity"]) / (
        base["privacy"] / base["profanity"]
    )
    assert ratio == pytest.approx(6.0)


def test_day_weights_renormalized():
    cfg = inject_event(SMALL, EventSpec(4, 3, {"discrimination": 5.0}))
    for day in (1, 4, 6, 8):
        assert sum(day_weights(cfg, day).values()) == pytest.approx(1.0)


# --- validation ---------------------------------------------------------

@pytest.mark.parametrize("kwargs,field", [
    ({"days": 0}, "days"),
    ({"peak_daily_volume": 0}, "peak_daily_volume"),
    ({"volume_ratio_band": (0.9, 0.5)}, "volume_ratio_band"),
    ({"sensitive_rate_band": (0.0, 0.04)}, "sensitive_rate_band"),
    ({"base_distribution": {"privacy": 10.0}}, "base_distribution"),
    ({"base_distribution": {"nope": 100.0}}, "base_distribution"),
    ({"text_variants": 0}, "text_variants"),
])
def test_invalid_config_names_field(kwargs, field):
    with pytest.raises(InvalidConfig) as exc:
        StreamConfig(**kwargs).validate()
    assert exc.value.field == field
