"""Resampling, windowing, feature extraction and min-max scaling.

Raw trips arrive at irregular timestamps. They are linearly interpolated onto
a 0.25 s grid, cut into 240-frame (one minute) windows and summarised into a
fixed 44-value feature vector per window.
"""

from __future__ import annotations

import csv
import hashlib
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classes import BehaviorClass
from .label import (TripContext, detect_steering_events, sustained_overspeed_pct,
                    window_label)
from .sim import RAW_CHANNELS, Trip

FRAME_PERIOD = 0.25
WINDOW_FRAMES = 240
TRAIN_STRIDE = WINDOW_FRAMES // 2
MAX_RAW_GAP = 2.0

FRAME_CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz", "lat", "lon",
                  "speed", "steering", "throttle", "accel_mag")

_STAT_CHANNELS = ("speed", "ax", "ay", "az", "accel_mag", "gx", "gy", "gz",
                  "steering", "throttle")
_STATS = ("mean", "std", "min", "max")
DOMAIN_FEATURES = ("overspeed_p95_pct", "weave_count", "max_impulse", "mean_abs_jerk")

FEATURE_NAMES = tuple(f"{ch}_{st}" for ch in _STAT_CHANNELS for st in _STATS) + DOMAIN_FEATURES
N_FEATURES = len(FEATURE_NAMES)


def feature_hash(names: Sequence[str] = FEATURE_NAMES) -> str:
    return hashlib.sha256(",".join(names).encode()).hexdigest()[:16]


FEATURE_HASH = feature_hash()


class ResampleError(ValueError):
    pass


@dataclass
class Frames:
    """Telemetry on the uniform grid; ``data`` columns follow ``FRAME_CHANNELS``."""

    t: np.ndarray
    data: np.ndarray

    def __len__(self):
        return self.t.size

    def column(self, name: str) -> np.ndarray:
        return self.data[:, FRAME_CHANNELS.index(name)]

    @property
    def speed(self):
        return self.column("speed")

    @property
    def steering(self):
        return self.column("steering")

    def slice(self, start: int, stop: int) -> "Frames":
        return Frames(self.t[start:stop], self.data[start:stop])


@dataclass
class Window:
    frames: Frames
    start_t: float
    label: BehaviorClass
    trip_id: str = "trip"

    @property
    def speed(self):
        return self.frames.speed

    @property
    def steering(self):
        return self.frames.steering


def resample(trip: Trip) -> Frames:
    t_raw = trip.t
    if t_raw.size < 2:
        raise ResampleError("need at least 2 samples to resample")
    gap = np.diff(t_raw)
    if np.any(gap <= 0):
        raise ResampleError("raw timestamps must be strictly increasing")
    if gap.max() > MAX_RAW_GAP:
        at = float(t_raw[np.argmax(gap)])
        raise ResampleError(f"sensor dropout of {gap.max():.2f} s at t={at:.2f} s")

    k0 = int(np.ceil(t_raw[0] / FRAME_PERIOD))
    k1 = int(np.floor(t_raw[-1] / FRAME_PERIOD))
    t = np.arange(k0, k1 + 1) * FRAME_PERIOD

    out = np.empty((t.size, len(FRAME_CHANNELS)))
    for j, name in enumerate(FRAME_CHANNELS[:-1]):
        out[:, j] = np.interp(t, t_raw, trip.data[:, RAW_CHANNELS.index(name)])
    out[:, -1] = np.sqrt(out[:, 0] ** 2 + out[:, 1] ** 2 + out[:, 2] ** 2)
    return Frames(t, out)


def window_count(n_frames: int, stride: int = TRAIN_STRIDE) -> int:
    if n_frames < WINDOW_FRAMES:
        return 0
    return (n_frames - WINDOW_FRAMES) // stride + 1


def segment(frames: Frames, context: TripContext, trip_id: str = "trip",
            stride: int = TRAIN_STRIDE) -> list[Window]:
    """Cut frames into labeled one-minute windows.

    ``stride=120`` gives the 50 % overlap used for training,
    ``stride=240`` disjoint windows.
    """
    n = window_count(len(frames), stride)
    if n == 0:
        warnings.warn(f"{trip_id}: {len(frames)} frames is shorter than one window",
                      RuntimeWarning, stacklevel=2)
        return []
    windows = []
    for i in range(n):
        sub = frames.slice(i * stride, i * stride + WINDOW_FRAMES)
        windows.append(Window(sub, float(sub.t[0]), window_label(sub, context), trip_id))
    return windows


def extract_features(window: Window, context: TripContext) -> np.ndarray:
    f = window.frames
    stats = []
    for ch in _STAT_CHANNELS:
        x = f.column(ch)
        stats.extend((x.mean(), x.std(), x.min(), x.max()))
    events = detect_steering_events(f.steering)
    jerk = np.abs(np.diff(f.column("accel_mag")) / FRAME_PERIOD).mean()
    stats.extend((sustained_overspeed_pct(f.speed, context.effective_limit),
                  float(events.weave_count), events.max_impulse, jerk))
    return np.asarray(stats, dtype=float)


@dataclass
class FeatureTable:
    trip_ids: list
    start_t: np.ndarray
    labels: np.ndarray
    X: np.ndarray

    def __len__(self):
        return self.labels.size

    def take(self, idx) -> "FeatureTable":
        idx = np.asarray(idx)
        return FeatureTable([self.trip_ids[i] for i in idx], self.start_t[idx],
                            self.labels[idx], self.X[idx])


def process_trip(trip: Trip, stride: int = TRAIN_STRIDE) -> tuple[list[Window], FeatureTable]:
    frames = resample(trip)
    windows = segment(frames, trip.context, trip.trip_id, stride)
    X = np.array([extract_features(w, trip.context) for w in windows]).reshape(-1, N_FEATURES)
    table = FeatureTable([trip.trip_id] * len(windows),
                         np.array([w.start_t for w in windows], dtype=float),
                         np.array([int(w.label) for w in windows], dtype=int), X)
    return windows, table


def concat_tables(tables: Sequence[FeatureTable]) -> FeatureTable:
    if not tables:
        return FeatureTable([], np.empty(0), np.empty(0, dtype=int), np.empty((0, N_FEATURES)))
    return FeatureTable(
        [tid for tb in tables for tid in tb.trip_ids],
        np.concatenate([tb.start_t for tb in tables]),
        np.concatenate([tb.labels for tb in tables]).astype(int),
        np.vstack([tb.X for tb in tables]),
    )


# --- normalization -----------------------------------------------------------

@dataclass(frozen=True)
class NormalizationParams:
    mins: np.ndarray
    maxs: np.ndarray

    def to_dict(self) -> dict:
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationParams":
        return cls(np.asarray(doc["min"], dtype=float), np.asarray(doc["max"], dtype=float))


def fit_normalizer(features) -> NormalizationParams:
    X = np.asarray(features, dtype=float)
    if X.size == 0:
        raise ValueError("cannot fit a normalizer on an empty feature set")
    X = np.atleast_2d(X)
    return NormalizationParams(X.min(axis=0), X.max(axis=0))


def apply_normalizer(params: NormalizationParams, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.size == 0:
        raise ValueError("empty feature set")
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    Z = np.where(span > 0, (X - params.mins) / safe, 0.0)
    return np.clip(Z, -0.5, 1.5)


# --- splits ------------------------------------------------------------------

def stratified_split(labels, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split. Returns sorted (train_idx, test_idx)."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        k = int(round(test_fraction * idx.size))
        test.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def group_split(groups: Sequence[str], test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split whole groups (trips) so no group straddles train and test."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    names = sorted(set(groups))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(names))
    n_test = int(round(test_fraction * len(names)))
    test_groups = {names[i] for i in order[:n_test]}
    mask = np.array([g in test_groups for g in groups])
    return np.flatnonzero(~mask), np.flatnonzero(mask)


# --- CSV ---------------------------------------------------------------------

CSV_HEADER = ("trip_id", "start_t", "label") + FEATURE_NAMES


def write_features_csv(table: FeatureTable, fp) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for tid, t0, lab, row in zip(table.trip_ids, table.start_t.tolist(),
                                 table.labels.tolist(), table.X.tolist()):
        w.writerow([tid, repr(t0), lab] + [repr(v) for v in row])


def read_features_csv(fp) -> FeatureTable:
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None:
        raise ValueError("features file is empty")
    if tuple(header) != CSV_HEADER:
        raise ValueError("features header does not match the expected column ordering")
    trip_ids, starts, labels, rows = [], [], [], []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(CSV_HEADER):
            raise ValueError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(rec)}")
        try:
            starts.append(float(rec[1]))
            lab = int(rec[2])
            rows.append([float(v) for v in rec[3:]])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if lab not in range(len(BehaviorClass)):
            raise ValueError(f"line {lineno}: label {lab} outside 0-3")
        trip_ids.append(rec[0])
        labels.append(lab)
    return FeatureTable(trip_ids, np.asarray(starts), np.asarray(labels, dtype=int),
                        np.asarray(rows, dtype=float).reshape(-1, N_FEATURES))
