"""Driver behavior profiling from simulated smartphone telemetry.

Synthetic trips are labeled by a speed/steering rule engine, resampled to a
4 Hz grid, cut into one-minute windows and classified with a multiclass
gradient-boosted tree ensemble.
"""

from .classes import N_CLASSES, BehaviorClass, WeatherType

__version__ = "0.1.0"

__all__ = ["BehaviorClass", "WeatherType", "N_CLASSES", "__version__"]
