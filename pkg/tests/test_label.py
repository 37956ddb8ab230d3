import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drive_profiler.classes import BehaviorClass as B, WeatherType as W
from drive_profiler.label import (RULES, SteeringEvents, TripContext, detect_steering_events,
                                  effective_speed_limit, rules_document, speed_severity,
                                  steering_severity, window_label)

from conftest import make_window


@pytest.mark.parametrize("limit,weather,expected", [
    (100, W.SUNNY, 100.0),
    (100, W.FOGGY, 70.0),
    (120, W.STORMY, 72.0),
    (100, W.SOFT_RAIN, 85.0),
])
def test_effective_speed_limit(limit, weather, expected):
    assert effective_speed_limit(limit, weather) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("limit", [0, -10])
def test_effective_speed_limit_rejects_non_positive(limit):
    with pytest.raises(ValueError):
        effective_speed_limit(limit, W.SUNNY)


@given(st.floats(1, 300), st.floats(1, 300), st.sampled_from(list(W)))
def test_effective_limit_linear(a, b, w):
    assert effective_speed_limit(a + b, w) == pytest.approx(
        effective_speed_limit(a, w) + effective_speed_limit(b, w), rel=1e-12)


@pytest.mark.parametrize("speed,expected", [
    (90, B.NORMAL), (100, B.NORMAL), (110, B.NORMAL), (110.01, B.INTERMEDIATE),
    (133, B.INTERMEDIATE), (150, B.AGGRESSIVE), (166, B.AGGRESSIVE), (166.01, B.DANGEROUS),
])
def test_speed_severity(speed, expected):
    assert speed_severity(speed, 100) == expected


@pytest.mark.parametrize("weather,speed,expected", [
    (W.SOFT_RAIN, 93.5, B.NORMAL), (W.SOFT_RAIN, 113.05, B.INTERMEDIATE),
    (W.SOFT_RAIN, 141.1, B.AGGRESSIVE), (W.FOGGY, 77.0, B.NORMAL), (W.FOGGY, 93.1, B.INTERMEDIATE),
    (W.FOGGY, 116.2, B.AGGRESSIVE), (W.STORMY, 66.0, B.NORMAL), (W.STORMY, 99.6, B.AGGRESSIVE),
])
def test_speed_severity_band_edges_inclusive(weather, speed, expected):
    assert speed_severity(speed, effective_speed_limit(100, weather)) == expected


@given(st.floats(0, 400), st.floats(0, 400), st.floats(10, 200))
def test_speed_severity_monotone(v1, v2, limit):
    lo, hi = sorted((v1, v2))
    assert speed_severity(lo, limit) <= speed_severity(hi, limit)


def test_steering_events_constant_zero():
    assert detect_steering_events(np.zeros(240)) == SteeringEvents(0, 0.0)


def test_steering_events_square_wave():
    # six alternating excursions, each 20 frames long, no gap in between
    s = np.zeros(240)
    for k in range(6):
        s[20 + 20 * k: 40 + 20 * k] = 0.5 if k % 2 == 0 else -0.5
    assert detect_steering_events(s) == SteeringEvents(6, 0.5)


def test_steering_events_single_excursion():
    s = np.zeros(240)
    s[100:110] = [0.02, 0.06, 0.1, 0.15, 0.2, 0.15, 0.1, 0.06, 0.02, 0.0]
    assert detect_steering_events(s) == SteeringEvents(1, 0.2)


def test_steering_events_same_sign_merge():
    s = np.zeros(240)
    s[10:20] = 0.3
    s[50:60] = 0.4
    s[90:100] = -0.2
    assert detect_steering_events(s) == SteeringEvents(2, 0.4)


def test_steering_events_accepts_time_value_pairs():
    s = np.zeros(240)
    s[10:20] = -0.3
    pairs = np.column_stack([np.arange(240) * 0.25, s])
    assert detect_steering_events(pairs) == SteeringEvents(1, 0.3)


def test_steering_events_empty():
    with pytest.raises(ValueError):
        detect_steering_events([])


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=300), st.floats(0.0, 0.5))
def test_smaller_dead_band_more_weaves(values, db):
    # hypothesis shrinks to small counterexamples if the excursion logic is off
    assert detect_steering_events(values, 0.0).weave_count >= 0
    big = detect_steering_events(values, db)
    small = detect_steering_events(values, db / 2)
    zero = detect_steering_events(values, 0.0)
    assert big.weave_count <= small.weave_count <= zero.weave_count


@pytest.mark.parametrize("events,expected", [
    (SteeringEvents(0, 0.0), B.NORMAL),
    (SteeringEvents(7, 0.30), B.AGGRESSIVE),
    (SteeringEvents(3, 0.60), B.DANGEROUS),
    (SteeringEvents(2, 0.10), B.INTERMEDIATE),
    (SteeringEvents(11, 0.10), B.DANGEROUS),
    (SteeringEvents(1, 0.15), B.AGGRESSIVE),
    (SteeringEvents(1, 0.45), B.AGGRESSIVE),
])
def test_steering_severity(events, expected):
    assert steering_severity(events) == expected


@given(st.integers(1, 30), st.integers(1, 30), st.floats(0.01, 1), st.floats(0.01, 1))
def test_steering_severity_monotone(c1, c2, i1, i2):
    assert steering_severity(SteeringEvents(min(c1, c2), min(i1, i2))) <= \
        steering_severity(SteeringEvents(max(c1, c2), max(i1, i2)))


def test_steering_events_invariant():
    with pytest.raises(ValueError):
        SteeringEvents(0, 0.3)
    with pytest.raises(ValueError):
        SteeringEvents(2, 0.0)


def test_window_label_examples(sunny100):
    assert window_label(make_window(speed=80.0), sunny100) == B.NORMAL
    assert window_label(make_window(speed=170.0), sunny100) == B.DANGEROUS
    s = np.zeros(240)
    for k in range(12):
        s[5 + 19 * k: 15 + 19 * k] = 0.5 if k % 2 == 0 else -0.5
    assert window_label(make_window(speed=80.0, steering=s), sunny100) == B.DANGEROUS


def test_window_label_uses_sustained_speed(sunny100):
    # 5 spiking frames out of 240 stay below the 95th percentile
    v = np.full(240, 90.0)
    v[:5] = 250.0
    assert window_label(make_window(speed=v), sunny100) == B.NORMAL


def test_window_label_weather(sunny100):
    stormy = TripContext(100.0, W.STORMY)
    assert window_label(make_window(speed=75.0), stormy) == B.INTERMEDIATE  # 75 vs 60: +25 %
    assert window_label(make_window(speed=80.0), stormy) == B.AGGRESSIVE  # +33.3 %
    assert window_label(make_window(speed=80.0), sunny100) == B.NORMAL


@given(st.floats(0, 300), st.integers(0, 20))
def test_window_label_dominates_parts(speed, weaves):
    ctx = TripContext(100.0, W.SUNNY)
    s = np.zeros(240)
    for k in range(weaves):
        s[2 + 11 * k: 8 + 11 * k] = 0.3 if k % 2 == 0 else -0.3
    w = make_window(speed=speed, steering=s)
    lab = window_label(w, ctx)
    assert lab >= speed_severity(speed, 100.0)
    assert lab >= steering_severity(detect_steering_events(s))


def test_window_label_requires_context():
    with pytest.raises(ValueError):
        window_label(make_window(speed=50.0), None)


def test_rules_document_is_read_only_copy():
    doc = rules_document()
    assert doc["weather_reduction"] == {"Sunny": 0.0, "SoftRain": 0.15, "Foggy": 0.3, "Stormy": 0.4}
    doc["weather_reduction"]["Sunny"] = 0.9
    assert RULES["weather_reduction"]["Sunny"] == 0.0
    with pytest.raises(TypeError):
        RULES["weather_reduction"]["Sunny"] = 0.5
    json.dumps(rules_document())
