import io
import json

import numpy as np
import pytest

from drive_profiler.classes import BehaviorClass as B, WeatherType as W
from drive_profiler.label import DEAD_BAND
from drive_profiler.pipeline import process_trip
from drive_profiler.sim import (KMH_TO_MPS, LATERAL_GAIN, SimConfig, TripFormatError,
                                balanced_configs, generate_dataset, generate_trip,
                                intended_class_histogram, load_trip, save_trip, total_minutes,
                                write_trip)


def test_normal_sunny_stays_legal():
    trip = generate_trip(SimConfig(seed=7, duration_s=60, speed_limit=100, weather=W.SUNNY,
                                   segment_plan=[B.NORMAL]))
    assert trip.column("speed").max() <= 100
    assert np.abs(trip.column("steering")).max() < DEAD_BAND


def test_normal_stormy_respects_reduced_limit():
    trip = generate_trip(SimConfig(seed=7, duration_s=60, speed_limit=100, weather=W.STORMY,
                                   segment_plan=[B.NORMAL]))
    assert trip.column("speed").max() <= 60


def test_dangerous_segment_overspeeds():
    trip = generate_trip(SimConfig(seed=3, duration_s=120, speed_limit=100, weather=W.SUNNY,
                                   segment_plan=[B.NORMAL, B.DANGEROUS]))
    t, v = trip.t, trip.column("speed")
    assert v[t >= 60].max() > 166
    assert v[t < 60].max() <= 100 or np.mean(v[t < 60] > 100) < 0.2


@pytest.mark.parametrize("kw", [{"duration_s": 59}, {"segment_plan": []}, {"speed_limit": 0},
                                {"jitter": 0.9}])
def test_rejects_bad_config(kw):
    with pytest.raises(ValueError):
        generate_trip(SimConfig(seed=1, **kw))


@pytest.mark.parametrize("seed", range(5))
def test_timestamps_and_ranges(seed):
    trip = generate_trip(SimConfig(seed=seed, duration_s=240, weather=W.FOGGY,
                                   segment_plan=[B.DANGEROUS, B.NORMAL, B.AGGRESSIVE, B.INTERMEDIATE]))
    gaps = np.diff(trip.t)
    assert trip.t[0] == 0.0 and trip.t[-1] == 240.0
    assert gaps.min() >= 0.05 and gaps.max() <= 0.5
    assert np.all(np.abs(trip.column("steering")) <= 1)
    assert trip.column("speed").min() >= 0
    thr = trip.column("throttle")
    assert thr.min() >= 0 and thr.max() <= 1
    segs = trip.segments
    assert segs[0].start == 0 and segs[-1].end == 240
    assert all(a.end == b.start for a, b in zip(segs, segs[1:]))


def test_deterministic():
    cfg = SimConfig(seed=11, duration_s=180, segment_plan=[B.AGGRESSIVE, B.NORMAL])
    a, b = generate_trip(cfg), generate_trip(cfg)
    assert a.data.tobytes() == b.data.tobytes()
    assert generate_trip(SimConfig(seed=12, duration_s=180)).data.tobytes() != a.data.tobytes()


@pytest.mark.parametrize("seed", range(4))
def test_accel_x_consistent_with_speed(seed):
    cfg = SimConfig(seed=seed, duration_s=240, segment_plan=[B.NORMAL, B.DANGEROUS, B.INTERMEDIATE, B.AGGRESSIVE])
    trip = generate_trip(cfg)
    t, v, ax = trip.t, trip.column("speed") * KMH_TO_MPS, trip.column("ax")
    for start in np.arange(0, 235, 5.0):
        m = (t >= start) & (t <= start + 5)
        i, j = np.flatnonzero(m)[[0, -1]]
        slope = (v[j] - v[i]) / (t[j] - t[i])
        mean_ax = np.trapezoid(ax[m], t[m]) / (t[j] - t[i])
        assert abs(slope - mean_ax) <= 3 * cfg.accel_noise


def test_lateral_gain_calibration():
    # steering 0.5 at 100 km/h gives 6 m/s^2
    assert LATERAL_GAIN * 100 * KMH_TO_MPS * 0.5 == pytest.approx(6.0)


def test_dataset_minutes_and_balance():
    trips = generate_dataset(balanced_configs(125, 4, seed=5))
    assert total_minutes(trips) >= 500
    hist = intended_class_histogram(trips)
    share = hist / hist.sum()
    assert np.all(np.abs(share - 0.25) <= 0.10 * 0.25)


def test_dataset_one_class_each():
    cfgs = [SimConfig(seed=100 + c, duration_s=60, segment_plan=[B(c)]) for c in range(4)]
    assert intended_class_histogram(generate_dataset(cfgs)).tolist() == [1, 1, 1, 1]


def test_dataset_errors():
    with pytest.raises(ValueError):
        generate_dataset([])
    with pytest.raises(ValueError, match="config 1"):
        generate_dataset([SimConfig(seed=1), SimConfig(seed=2, duration_s=10)])


@pytest.mark.parametrize("seed", range(3))
def test_generator_labeler_closure(seed):
    trips = generate_dataset(balanced_configs(20, 4, seed=seed))
    hits = np.zeros((4, 2), dtype=int)
    for trip in trips:
        windows, _ = process_trip(trip)
        for w in windows:
            for seg in trip.segments:
                if seg.start <= w.start_t and w.start_t + 60 <= seg.end:
                    hits[seg.behavior, 1] += 1
                    hits[seg.behavior, 0] += w.label == seg.behavior
    rate = hits[:, 0] / hits[:, 1]
    assert rate[B.NORMAL] >= 0.95
    assert rate[B.DANGEROUS] >= 0.90


def test_jsonl_roundtrip(tmp_path):
    trip = generate_trip(SimConfig(seed=4, duration_s=60, weather=W.SOFT_RAIN, segment_plan=[B.AGGRESSIVE]))
    save_trip(trip, tmp_path / "a.jsonl")
    back = load_trip(tmp_path / "a.jsonl")
    assert back.data.tobytes() == trip.data.tobytes()
    assert back.weather == W.SOFT_RAIN and back.speed_limit == trip.speed_limit
    assert back.segments == trip.segments
    assert len(trip.samples) == len(trip)


def test_jsonl_sample_keys():
    trip = generate_trip(SimConfig(seed=4, duration_s=60))
    buf = io.StringIO()
    write_trip(trip, buf)
    lines = buf.getvalue().splitlines()
    header = json.loads(lines[0])
    assert {"weather", "speed_limit", "segments", "seed"} <= header.keys()
    assert set(json.loads(lines[1])) == {"t", "ax", "ay", "az", "gx", "gy", "gz", "lat", "lon",
                                         "speed", "steering", "throttle"}


def test_jsonl_corrupt_line(tmp_path):
    trip = generate_trip(SimConfig(seed=4, duration_s=60))
    p = tmp_path / "a.jsonl"
    save_trip(trip, p)
    lines = p.read_text().splitlines()
    lines[5] = '{"t": 1.0, "ax":'
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(TripFormatError, match="line 6"):
        load_trip(p)
