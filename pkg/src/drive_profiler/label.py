"""Rule engine mapping one-minute telemetry windows to behavior classes.

Thresholds live in ``rules.json`` next to this module and are loaded once,
read-only. Speed severity is judged against the weather-adjusted limit;
steering severity from the count and peak of lane weaving excursions. A
window takes the more severe of the two.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from types import MappingProxyType
from typing import Any, Mapping, Optional

import numpy as np

from .classes import BehaviorClass, WeatherType


def _load_rules() -> Mapping[str, Any]:
    text = resources.files(__package__).joinpath("rules.json").read_text()
    doc = json.loads(text)
    return MappingProxyType({k: MappingProxyType(v) if isinstance(v, dict) else v
                             for k, v in doc.items()})


RULES = _load_rules()

WEATHER_REDUCTION: Mapping[WeatherType, float] = MappingProxyType(
    {WeatherType(name): float(f) for name, f in RULES["weather_reduction"].items()}
)
DEAD_BAND = float(RULES["steering_dead_band"])
SUSTAINED_PERCENTILE = float(RULES["sustained_percentile"])

_SPEED_UPPER = RULES["speed_overspeed_pct_upper"]
_COUNT_UPPER = RULES["steering_count_upper"]
_IMPULSE = RULES["steering_impulse"]


def rules_document() -> dict:
    """Return a fresh copy of the rule tables as plain JSON-able data."""
    return json.loads(resources.files(__package__).joinpath("rules.json").read_text())


@dataclass(frozen=True)
class TripContext:
    posted_limit: float
    weather: WeatherType

    @property
    def effective_limit(self) -> float:
        return effective_speed_limit(self.posted_limit, self.weather)


@dataclass(frozen=True)
class SteeringEvents:
    weave_count: int
    max_impulse: float

    def __post_init__(self):
        if self.weave_count < 0:
            raise ValueError("weave_count must be >= 0")
        if (self.weave_count == 0) != (self.max_impulse == 0):
            raise ValueError("max_impulse must be 0 exactly when weave_count is 0")


def effective_speed_limit(posted_limit: float, weather: WeatherType) -> float:
    if not posted_limit > 0:
        raise ValueError(f"posted speed limit must be positive, got {posted_limit}")
    return posted_limit * (1.0 - WEATHER_REDUCTION[WeatherType(weather)])


def overspeed_pct(speed, effective_limit: float):
    """Percent above the effective limit; negative when under it."""
    return 100.0 * (np.asarray(speed, dtype=float) - effective_limit) / effective_limit


def overspeed_band(pct: float) -> BehaviorClass:
    # band edges are inclusive; rounding keeps e.g. 93.5 vs 85 km/h at exactly 10 %
    pct = round(float(pct), 9)
    if pct <= _SPEED_UPPER["Normal"]:
        return BehaviorClass.NORMAL
    if pct <= _SPEED_UPPER["Intermediate"]:
        return BehaviorClass.INTERMEDIATE
    if pct <= _SPEED_UPPER["Aggressive"]:
        return BehaviorClass.AGGRESSIVE
    return BehaviorClass.DANGEROUS


def speed_severity(speed: float, effective_limit: float) -> BehaviorClass:
    if not effective_limit > 0:
        raise ValueError("effective limit must be positive")
    if speed < 0:
        raise ValueError("speed must be non-negative")
    return overspeed_band(float(overspeed_pct(speed, effective_limit)))


def detect_steering_events(steering, dead_band: float = DEAD_BAND) -> SteeringEvents:
    """Count weaving excursions in one window of steering values.

    An excursion is a maximal run of samples with ``steering > dead_band``
    or ``steering < -dead_band``. It counts as a weave when its sign differs
    from the previous excursion (the first excursion always counts);
    same-sign excursions in a row are merged into one weave.

    ``steering`` may be a 1-D array of values or an ``(n, 2)`` array of
    ``(t, value)`` pairs.
    """
    s = np.asarray(steering, dtype=float)
    if s.ndim == 2:
        s = s[:, 1]
    if s.size == 0:
        raise ValueError("empty steering series")

    sign = np.where(s > dead_band, 1, np.where(s < -dead_band, -1, 0))
    active = sign != 0
    if not active.any():
        return SteeringEvents(0, 0.0)

    # run starts: active sample whose predecessor is inactive or of other sign
    prev = np.concatenate(([0], sign[:-1]))
    run_starts = np.flatnonzero(active & (sign != prev))
    run_signs = sign[run_starts]
    weaves = 1 + int(np.count_nonzero(run_signs[1:] != run_signs[:-1]))
    return SteeringEvents(weaves, float(np.abs(s[active]).max()))


def steering_count_band(weave_count: int) -> BehaviorClass:
    if weave_count <= _COUNT_UPPER["Normal"]:
        return BehaviorClass.NORMAL
    if weave_count <= _COUNT_UPPER["Intermediate"]:
        return BehaviorClass.INTERMEDIATE
    if weave_count <= _COUNT_UPPER["Aggressive"]:
        return BehaviorClass.AGGRESSIVE
    return BehaviorClass.DANGEROUS


def steering_impulse_band(max_impulse: float) -> BehaviorClass:
    if max_impulse == 0:
        return BehaviorClass.NORMAL
    if max_impulse < _IMPULSE["intermediate_below"]:
        return BehaviorClass.INTERMEDIATE
    if max_impulse <= _IMPULSE["aggressive_upper"]:
        return BehaviorClass.AGGRESSIVE
    return BehaviorClass.DANGEROUS


def steering_severity(events: SteeringEvents) -> BehaviorClass:
    if events.weave_count == 0:
        return BehaviorClass.NORMAL
    return max(steering_count_band(events.weave_count),
               steering_impulse_band(events.max_impulse))


def sustained_overspeed_pct(speed, effective_limit: float) -> float:
    """95th percentile of per-frame overspeed, robust to single-frame spikes."""
    return float(np.percentile(overspeed_pct(speed, effective_limit), SUSTAINED_PERCENTILE))


def window_label(window, context: Optional[TripContext]) -> BehaviorClass:
    """Label a window exposing ``speed`` and ``steering`` arrays."""
    if context is None:
        raise ValueError("window_label needs the trip context (posted limit, weather)")
    pct = sustained_overspeed_pct(window.speed, context.effective_limit)
    by_speed = overspeed_band(pct)
    by_steering = steering_severity(detect_steering_events(window.steering))
    return max(by_speed, by_steering)
