"""
Labeling rules
==============

Walk through the weather-adjusted speed limit, the overspeed bands and the
steering bands, then label a few hand-made one-minute windows.
"""

import numpy as np

from drive_profiler import BehaviorClass, WeatherType
from drive_profiler.label import (SteeringEvents, TripContext, detect_steering_events,
                                  effective_speed_limit, speed_severity, steering_severity,
                                  window_label)
from drive_profiler.pipeline import FRAME_CHANNELS, Frames

# Bad weather lowers the limit the driver is judged against.
for w in WeatherType:
    print(f"{w.value:<9} posted 120 -> effective {effective_speed_limit(120, w):5.1f} km/h")

# Overspeed bands, relative to that effective limit.
for v in (95, 115, 140, 170):
    print(f"{v} km/h on a 100 km/h road: {speed_severity(v, 100).label}")

# Steering: count and peak of lane weaving, the worse of the two wins.
for events in (SteeringEvents(2, 0.1), SteeringEvents(7, 0.3), SteeringEvents(3, 0.6)):
    print(events, "->", steering_severity(events).label)

# %%
# A window is 240 frames at 4 Hz: 85 km/h with three gentle weaves.
# Steering alone says Intermediate; in a storm the speed takes over.
t = np.arange(240) * 0.25
data = np.zeros((240, len(FRAME_CHANNELS)))
data[:, FRAME_CHANNELS.index("speed")] = 85.0
steer = np.zeros(240)
for k in range(3):
    steer[30 + 60 * k: 40 + 60 * k] = 0.1 * (-1) ** k
data[:, FRAME_CHANNELS.index("steering")] = steer
frames = Frames(t, data)

print(detect_steering_events(steer))
for weather in (WeatherType.SUNNY, WeatherType.STORMY):
    ctx = TripContext(100.0, weather)
    print(weather.value, "->", BehaviorClass(window_label(frames, ctx)).label)
