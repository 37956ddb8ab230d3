"""
Simulated trip to feature vectors
=================================

Generate one ten-minute trip, resample it onto the 0.25 s grid, cut
overlapping and disjoint one-minute windows and look at the features.
"""

import numpy as np

from drive_profiler import BehaviorClass as B, WeatherType
from drive_profiler.pipeline import FEATURE_NAMES, process_trip, resample
from drive_profiler.sim import SimConfig, generate_trip

plan = [B.NORMAL, B.NORMAL, B.INTERMEDIATE, B.DANGEROUS, B.NORMAL,
        B.AGGRESSIVE, B.AGGRESSIVE, B.NORMAL, B.INTERMEDIATE, B.NORMAL]
trip = generate_trip(SimConfig(seed=1, duration_s=600, speed_limit=110,
                               weather=WeatherType.FOGGY, segment_plan=plan))
gaps = np.diff(trip.t)
print(f"{len(trip)} raw samples, gaps {gaps.min() * 1e3:.0f}-{gaps.max() * 1e3:.0f} ms")

frames = resample(trip)
print(f"{len(frames)} frames on the 0.25 s grid")

# %%
# Training view: 50 % overlap. Inference view: disjoint minutes.
overlapped, _ = process_trip(trip)
disjoint, table = process_trip(trip, stride=240)
print(f"{len(overlapped)} overlapping windows, {len(disjoint)} disjoint windows")
for j, w in enumerate(disjoint, start=1):
    print(f"W{j:<2} start {w.start_t:5.0f}s  planned {plan[j - 1].label:<12} labeled {w.label.label}")

# %%
# Domain features of each disjoint window.
cols = [FEATURE_NAMES.index(n) for n in ("overspeed_p95_pct", "weave_count", "max_impulse")]
print(np.round(table.X[:, cols], 2))
