"""Enumerations shared across the package."""

from enum import Enum, IntEnum


class WeatherType(str, Enum):
    SUNNY = "Sunny"
    SOFT_RAIN = "SoftRain"
    FOGGY = "Foggy"
    STORMY = "Stormy"


class BehaviorClass(IntEnum):
    """Driver behavior class. Integer codes are the ones printed as ``P.C``."""

    NORMAL = 0
    INTERMEDIATE = 1
    AGGRESSIVE = 2
    DANGEROUS = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_name(cls, name: str) -> "BehaviorClass":
        return cls[name.upper()]


N_CLASSES = len(BehaviorClass)
