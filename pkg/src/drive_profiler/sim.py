"""Synthetic highway trips with scripted behavior segments.

Each trip is split into equal-length segments, one per entry of the
segment plan. A segment holds a speed level inside its class's overspeed
band and a train of alternating steering pulses (lane weaving) at a rate and
amplitude inside its class's steering band. The remaining channels are
derived from those two signals plus Gaussian sensor noise, and sampled at
jittered timestamps as a phone would.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from .classes import BehaviorClass, WeatherType
from .label import TripContext, effective_speed_limit

GRAVITY = 9.81
KMH_TO_MPS = 1.0 / 3.6
# accelY = LATERAL_GAIN * speed_mps * steering; steering 0.5 at 100 km/h gives 6 m/s^2
LATERAL_GAIN = 6.0 / (100.0 * KMH_TO_MPS * 0.5)
YAW_GAIN = 0.02
PITCH_GAIN = 0.01
ROLL_GAIN = 0.01
RAMP_ACCEL = 4.0  # m/s^2, mean acceleration of a speed transition
SPEED_WOBBLE = 0.02  # fraction of the effective limit
MIN_GAP, MAX_GAP = 0.05, 0.5
METERS_PER_DEG = 111_320.0

RAW_CHANNELS = ("t", "ax", "ay", "az", "gx", "gy", "gz",
                "lat", "lon", "speed", "steering", "throttle")

# Overspeed percent ranges for the speed level of a segment. Normal is a
# fraction of the effective limit instead. Ranges sit inside the rule bands
# with margin for the +/- SPEED_WOBBLE oscillation.
_NORMAL_LEVEL = (0.80, 0.90)
_OVERSPEED_LEVEL = {
    BehaviorClass.INTERMEDIATE: (15.0, 28.0),
    BehaviorClass.AGGRESSIVE: (40.0, 58.0),
    BehaviorClass.DANGEROUS: (72.0, 95.0),
}
# (weaves per minute, inclusive), (peak |steering| range)
_WEAVE_PLAN = {
    BehaviorClass.INTERMEDIATE: ((2, 3), (0.08, 0.12)),
    BehaviorClass.AGGRESSIVE: ((6, 9), (0.22, 0.38)),
    BehaviorClass.DANGEROUS: ((12, 16), (0.55, 0.80)),
}


class SensorSample(NamedTuple):
    t: float
    accel: tuple
    gyro: tuple
    lat: float
    lon: float
    speed: float
    steering: float
    throttle: float


class Segment(NamedTuple):
    start: float
    end: float
    behavior: BehaviorClass


@dataclass(frozen=True)
class SimConfig:
    seed: int
    duration_s: float = 240.0
    speed_limit: float = 100.0
    weather: WeatherType = WeatherType.SUNNY
    segment_plan: Sequence[BehaviorClass] = (BehaviorClass.NORMAL,)
    accel_noise: float = 0.3
    gyro_noise: float = 0.02
    speed_noise: float = 0.5
    steering_noise: float = 0.004
    sample_period: float = 0.2
    jitter: float = 0.5
    lat0: float = 45.0
    lon0: float = 7.0

    def validate(self) -> None:
        if self.duration_s < 60:
            raise ValueError(f"duration_s must be >= 60 s, got {self.duration_s}")
        if len(self.segment_plan) == 0:
            raise ValueError("segment_plan is empty")
        if self.speed_limit <= 0:
            raise ValueError("speed_limit must be positive")
        lo = self.sample_period * (1 - self.jitter)
        hi = self.sample_period * (1 + self.jitter)
        if not (0 <= self.jitter < 1 and lo >= MIN_GAP and hi <= MAX_GAP):
            raise ValueError(
                f"sample gaps [{lo:.3f}, {hi:.3f}] s fall outside [{MIN_GAP}, {MAX_GAP}] s")
        for name in ("accel_noise", "gyro_noise", "speed_noise", "steering_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class Trip:
    """Irregularly sampled telemetry. ``data`` columns follow ``RAW_CHANNELS``."""

    data: np.ndarray
    weather: WeatherType
    speed_limit: float
    segments: list = field(default_factory=list)
    seed: int | None = None
    trip_id: str = "trip"

    def __len__(self):
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, RAW_CHANNELS.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def context(self) -> TripContext:
        return TripContext(self.speed_limit, self.weather)

    @property
    def samples(self) -> list[SensorSample]:
        return [
            SensorSample(r[0], (r[1], r[2], r[3]), (r[4], r[5], r[6]),
                         r[7], r[8], r[9], r[10], r[11])
            for r in self.data.tolist()
        ]


def _sample_times(rng: np.random.Generator, cfg: SimConfig) -> np.ndarray:
    lo = cfg.sample_period * (1 - cfg.jitter)
    hi = cfg.sample_period * (1 + cfg.jitter)
    n = int(math.ceil(cfg.duration_s / lo)) + 2
    cum = np.concatenate(([0.0], np.cumsum(rng.uniform(lo, hi, n))))
    last = int(np.searchsorted(cum, cfg.duration_s))
    # stretch so the final sample lands exactly on the trip end
    t = cum[: last + 1] * (cfg.duration_s / cum[last])
    t[-1] = float(cfg.duration_s)
    return t


def _smoothstep(x):
    return 0.5 * (1.0 - np.cos(np.pi * x))


def _speed_profile(rng, cfg, segments, t):
    limit = effective_speed_limit(cfg.speed_limit, cfg.weather)
    levels = []
    for seg in segments:
        if seg.behavior == BehaviorClass.NORMAL:
            levels.append(limit * rng.uniform(*_NORMAL_LEVEL))
        else:
            levels.append(limit * (1.0 + rng.uniform(*_OVERSPEED_LEVEL[seg.behavior]) / 100.0))

    starts = np.array([s.start for s in segments])
    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(segments) - 1)
    v = np.asarray(levels)[idx]

    # transitions happen inside the faster of the two neighbouring segments
    for j in range(1, len(segments)):
        va, vb = levels[j - 1], levels[j]
        boundary = segments[j].start
        ramp = abs(vb - va) * KMH_TO_MPS / RAMP_ACCEL
        if ramp == 0:
            continue
        t0 = boundary if vb > va else boundary - ramp
        m = (t >= t0) & (t <= t0 + ramp)
        v[m] = va + (vb - va) * _smoothstep((t[m] - t0) / ramp)

    period = rng.uniform(20.0, 40.0)
    phase = rng.uniform(0, 2 * np.pi)
    v = v + SPEED_WOBBLE * limit * np.sin(2 * np.pi * t / period + phase)
    return v


def _steering_profile(rng, segments, t):
    steer = np.zeros_like(t)
    for seg in segments:
        if seg.behavior == BehaviorClass.NORMAL:
            continue
        (rate_lo, rate_hi), amp_range = _WEAVE_PLAN[seg.behavior]
        length = seg.end - seg.start
        rate = rng.integers(rate_lo, rate_hi + 1)
        count = max(1, int(round(rate * length / 60.0)))
        spacing = length / count
        sign = rng.choice((-1.0, 1.0))
        for k in range(count):
            center = seg.start + (k + 0.5) * spacing + rng.uniform(-0.1, 0.1) * spacing
            width = min(rng.uniform(1.2, 2.0), 0.6 * spacing)
            amp = rng.uniform(*amp_range)
            m = np.abs(t - center) < width / 2
            steer[m] += sign * amp * np.sin(np.pi * (t[m] - center + width / 2) / width)
            sign = -sign
    return steer


def generate_trip(config: SimConfig, trip_id: str = "trip") -> Trip:
    """Simulate one trip. The output is a pure function of ``config``."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    t = _sample_times(rng, config)
    n = t.size

    plan = [BehaviorClass(c) for c in config.segment_plan]
    seg_len = config.duration_s / len(plan)
    segments = [Segment(i * seg_len, (i + 1) * seg_len if i < len(plan) - 1 else float(config.duration_s), c)
                for i, c in enumerate(plan)]

    v_kmh = _speed_profile(rng, config, segments, t)
    steer = np.clip(_steering_profile(rng, segments, t), -1.0, 1.0)
    v = v_kmh * KMH_TO_MPS

    ax_true = np.gradient(v, t)
    ay_true = LATERAL_GAIN * v * steer
    yaw_true = YAW_GAIN * v * steer

    heading = rng.uniform(0, 2 * np.pi) + np.concatenate(
        ([0.0], np.cumsum(0.5 * (yaw_true[1:] + yaw_true[:-1]) * np.diff(t))))
    dist_n = np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] * np.cos(heading[1:]) + v[:-1] * np.cos(heading[:-1])) * np.diff(t))))
    dist_e = np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] * np.sin(heading[1:]) + v[:-1] * np.sin(heading[:-1])) * np.diff(t))))
    lat = config.lat0 + dist_n / METERS_PER_DEG
    lon = config.lon0 + dist_e / (METERS_PER_DEG * math.cos(math.radians(config.lat0)))

    sa, sg = config.accel_noise, config.gyro_noise
    data = np.column_stack([
        t,
        ax_true + rng.normal(0, sa, n),
        ay_true + rng.normal(0, sa, n),
        GRAVITY + rng.normal(0, sa, n),
        yaw_true + rng.normal(0, sg, n),
        -PITCH_GAIN * ax_true + rng.normal(0, sg, n),
        ROLL_GAIN * ay_true + rng.normal(0, sg, n),
        lat,
        lon,
        np.maximum(v_kmh + rng.normal(0, config.speed_noise, n), 0.0),
        np.clip(steer + rng.normal(0, config.steering_noise, n), -1.0, 1.0),
        np.clip(0.1 + v_kmh / 250.0 + 0.08 * ax_true, 0.0, 1.0),
    ])
    return Trip(data, WeatherType(config.weather), float(config.speed_limit),
                segments, config.seed, trip_id)


def generate_dataset(configs: Sequence[SimConfig]) -> list[Trip]:
    if len(configs) == 0:
        raise ValueError("no trip configurations given")
    trips = []
    for i, cfg in enumerate(configs):
        try:
            trips.append(generate_trip(cfg, trip_id=f"trip_{i:04d}"))
        except ValueError as exc:
            raise ValueError(f"config {i}: {exc}") from exc
    return trips


def balanced_configs(n_trips: int = 125, minutes: float = 4.0, seed: int = 0,
                     limits: Sequence[float] = (80, 90, 100, 110, 120, 130)) -> list[SimConfig]:
    """Trip configs whose segment plans are permutations of the four classes.

    Every class gets the same share of intended driving time, so the class
    balance is uniform by construction.
    """
    if n_trips < 1:
        raise ValueError("n_trips must be >= 1")
    rng = np.random.default_rng(seed)
    weathers = list(WeatherType)
    configs = []
    for i in range(n_trips):
        plan = tuple(BehaviorClass(int(c)) for c in rng.permutation(4))
        configs.append(SimConfig(
            seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]),
            duration_s=60.0 * minutes,
            speed_limit=float(rng.choice(limits)),
            weather=weathers[int(rng.integers(len(weathers)))],
            segment_plan=plan,
        ))
    return configs


def total_minutes(trips: Iterable[Trip]) -> float:
    return sum(trip.duration for trip in trips) / 60.0


def intended_class_histogram(trips: Iterable[Trip]) -> np.ndarray:
    """Number of planned segments per class."""
    hist = np.zeros(len(BehaviorClass), dtype=int)
    for trip in trips:
        for seg in trip.segments:
            hist[int(seg.behavior)] += 1
    return hist


# --- line-delimited JSON ---------------------------------------------------

class TripFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else ""
        where += f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def write_trip(trip: Trip, fp: IO[str]) -> None:
    header = {
        "trip_id": trip.trip_id,
        "weather": trip.weather.value,
        "speed_limit": trip.speed_limit,
        "seed": trip.seed,
        "segments": [{"start": s.start, "end": s.end, "behavior": BehaviorClass(s.behavior).label}
                     for s in trip.segments],
    }
    fp.write(json.dumps(header) + "\n")
    for row in trip.data.tolist():
        fp.write(json.dumps(dict(zip(RAW_CHANNELS, row))) + "\n")


def save_trip(trip: Trip, path) -> None:
    with open(path, "w") as fp:
        write_trip(trip, fp)


def load_trip(path) -> Trip:
    path = Path(path)
    with open(path) as fp:
        lines = fp.read().splitlines()
    if not lines:
        raise TripFormatError("empty trip file", None, path)
    try:
        header = json.loads(lines[0])
        weather = WeatherType(header["weather"])
        limit = float(header["speed_limit"])
        segments = [Segment(float(s["start"]), float(s["end"]), BehaviorClass.from_name(s["behavior"]))
                    for s in header.get("segments", [])]
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise TripFormatError(f"bad header ({exc})", 1, path) from None

    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rows.append([float(obj[k]) for k in RAW_CHANNELS])
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise TripFormatError(f"bad sample ({exc})", lineno, path) from None
    if not rows:
        raise TripFormatError("trip has no samples", None, path)
    data = np.asarray(rows, dtype=float)
    if np.any(np.diff(data[:, 0]) <= 0):
        raise TripFormatError("timestamps are not strictly increasing", None, path)
    return Trip(data, weather, limit, segments, header.get("seed"),
                header.get("trip_id", path.stem))
