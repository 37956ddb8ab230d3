import numpy as np
import pytest

from drive_profiler.classes import BehaviorClass, WeatherType
from drive_profiler.label import TripContext
from drive_profiler.pipeline import FRAME_CHANNELS, FRAME_PERIOD, Frames, Window


def make_window(speed=None, steering=None, n=240, start=0.0, **channels):
    """Hand-built window; unspecified channels are zero (az = 9.81)."""
    t = start + np.arange(n) * FRAME_PERIOD
    data = np.zeros((n, len(FRAME_CHANNELS)))
    data[:, FRAME_CHANNELS.index("az")] = 9.81
    values = dict(channels)
    if speed is not None:
        values["speed"] = speed
    if steering is not None:
        values["steering"] = steering
    for name, v in values.items():
        data[:, FRAME_CHANNELS.index(name)] = np.broadcast_to(np.asarray(v, dtype=float), (n,))
    ax, ay, az = (data[:, FRAME_CHANNELS.index(c)] for c in ("ax", "ay", "az"))
    data[:, FRAME_CHANNELS.index("accel_mag")] = np.sqrt(ax ** 2 + ay ** 2 + az ** 2)
    return Window(Frames(t, data), float(t[0]), BehaviorClass.NORMAL)


@pytest.fixture
def sunny100():
    return TripContext(100.0, WeatherType.SUNNY)


@pytest.fixture(scope="session")
def default_dataset():
    """The 125 x 4-minute balanced dataset, already split 70/30 and scaled."""
    from drive_profiler.pipeline import (apply_normalizer, concat_tables, fit_normalizer,
                                         process_trip, stratified_split)
    from drive_profiler.sim import balanced_configs, generate_dataset

    trips = generate_dataset(balanced_configs(125, 4.0, seed=0))
    table = concat_tables([process_trip(t)[1] for t in trips])
    tr, te = stratified_split(table.labels, 0.3, seed=0)
    norm = fit_normalizer(table.X[tr])
    return {
        "trips": trips, "table": table, "train_idx": tr, "test_idx": te,
        "X_train": apply_normalizer(norm, table.X[tr]), "y_train": table.labels[tr],
        "X_test": apply_normalizer(norm, table.X[te]), "y_test": table.labels[te],
    }


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, text in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0][2:])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid}: {text}")
