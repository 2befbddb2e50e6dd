"""Logic threshold schemes and state classification."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .device import MemristorParams, resistance_of_s


class ConfigError(ValueError):
    pass


class Logic(str, Enum):
    ONE = "1"
    ZERO = "0"
    UNDEFINED = "X"

    @classmethod
    def of_bit(cls, bit: int) -> "Logic":
        return cls.ONE if bit else cls.ZERO


@dataclass(frozen=True)
class ThresholdScheme:
    s_OL: float
    s_IL: float
    s_IH: float
    s_OH: float
    name: str = "custom"
    # closed boundaries count as defined
    inclusive: bool = True

    def __post_init__(self):
        if not 0 <= self.s_OL <= self.s_IL <= self.s_IH <= self.s_OH <= 1:
            raise ConfigError(
                f"thresholds must satisfy 0 <= s_OL <= s_IL <= s_IH <= s_OH <= 1, got "
                f"({self.s_OL}, {self.s_IL}, {self.s_IH}, {self.s_OH})")

    def as_dict(self) -> dict:
        return {"name": self.name, "s_OL": self.s_OL, "s_IL": self.s_IL,
                "s_IH": self.s_IH, "s_OH": self.s_OH}


PRESETS = {
    "1/2": ThresholdScheme(0.5, 0.5, 0.5, 0.5, name="1/2"),
    "1/3": ThresholdScheme(0.333, 0.333, 0.667, 0.667, name="1/3"),
    "ttl": ThresholdScheme(0.08, 0.16, 0.40, 0.48, name="TTL"),
}


def preset(name: str) -> ThresholdScheme:
    try:
        return PRESETS[name.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown threshold scheme {name!r}; choose from 1/2, 1/3, TTL") from None


def resolve_scheme(spec) -> ThresholdScheme:
    """Scheme from a preset name, a ThresholdScheme, or four numbers (OL, IL, IH, OH)."""
    if isinstance(spec, ThresholdScheme):
        return spec
    if isinstance(spec, str):
        parts = [p for p in spec.replace(",", " ").split() if p]
        if len(parts) == 4:
            try:
                return ThresholdScheme(*map(float, parts))
            except ValueError:
                pass
        return preset(spec)
    values = list(spec)
    if len(values) != 4:
        raise ConfigError("explicit scheme needs four numbers: s_OL s_IL s_IH s_OH")
    return ThresholdScheme(*map(float, values))


def resistance_threshold(scheme: ThresholdScheme, which: str, params: MemristorParams) -> float:
    """Resistance image of a normalized threshold. High logic means low resistance."""
    key = "s_" + which.upper()
    if not hasattr(scheme, key):
        raise ConfigError(f"unknown threshold {which!r}; use IL, IH, OL or OH")
    return resistance_of_s(params, getattr(scheme, key))


def classify(s: float, scheme: ThresholdScheme, role: str = "output") -> Logic:
    if role == "input":
        low, high = scheme.s_IL, scheme.s_IH
    elif role == "output":
        low, high = scheme.s_OL, scheme.s_OH
    else:
        raise ConfigError(f"role must be 'input' or 'output', not {role!r}")
    if scheme.inclusive:
        if s >= high:
            return Logic.ONE
        if s <= low:
            return Logic.ZERO
    else:
        if s > high:
            return Logic.ONE
        if s < low:
            return Logic.ZERO
    return Logic.UNDEFINED
