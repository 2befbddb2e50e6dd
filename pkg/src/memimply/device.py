"""VTEAM memristor model with a linear I/V map.

Units: lengths in nm, times in s, voltages in V, resistances in ohm.
Positive dw/dt moves the device toward ``w_on`` (low resistance, set).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Callable, Protocol

import numpy as np

from .integrator import IntegratorSettings, integrate_small


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class MemristorParams:
    v_on: float = -0.7
    v_off: float = 0.01
    R_on: float = 10e3
    R_off: float = 1e6
    k_on: float = 1e7  # 1 cm/s in nm/s
    k_off: float = -0.5
    alpha_on: int = 3
    alpha_off: int = 3
    w_on: float = 3.0
    w_off: float = 0.0
    a_on: float = 3.0
    a_off: float = 0.0
    w_c: float = 0.1

    def __post_init__(self):
        problems = []
        if not self.v_on < 0 < self.v_off:
            problems.append("v_on < 0 < v_off")
        if not self.R_on < self.R_off:
            problems.append("R_on < R_off")
        if not self.w_on > self.w_off:
            problems.append("w_on > w_off")
        if not (self.k_on > 0 and self.k_off < 0 and self.w_c > 0):
            problems.append("k_on > 0, k_off < 0, w_c > 0")
        if int(self.alpha_on) != self.alpha_on or int(self.alpha_off) != self.alpha_off:
            problems.append("integer alpha_on/alpha_off")
        if problems:
            raise DomainError("invalid memristor parameters, violated: " + "; ".join(problems))

    def with_changes(self, **changes) -> "MemristorParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class MemristorState:
    w: float

    @classmethod
    def from_s(cls, params: MemristorParams, s: float) -> "MemristorState":
        return cls(params.w_off + s * (params.w_on - params.w_off))


def normalized_state(params: MemristorParams, state: MemristorState) -> float:
    return (state.w - params.w_off) / (params.w_on - params.w_off)


def resistance_of_s(params: MemristorParams, s):
    return params.R_off + (params.R_on - params.R_off) * s


def resistance_of_state(params: MemristorParams, state: MemristorState) -> float:
    return resistance_of_s(params, normalized_state(params, state))


def state_of_resistance(params: MemristorParams, R: float) -> float:
    """Normalized state of a device showing resistance ``R``.

    Raises DomainError outside [R_on, R_off].
    """
    if not params.R_on <= R <= params.R_off:
        raise DomainError(f"R = {R:g} ohm outside [{params.R_on:g}, {params.R_off:g}]")
    return (R - params.R_off) / (params.R_on - params.R_off)


def w_of_resistance(params: MemristorParams, R: float) -> float:
    """Unchecked inverse of the linear I/V map, in state length (nm)."""
    s = (R - params.R_off) / (params.R_on - params.R_off)
    return params.w_off + s * (params.w_on - params.w_off)


# -- window functions --------------------------------------------------------


class Window(Protocol):
    def on(self, params: MemristorParams, w): ...

    def off(self, params: MemristorParams, w): ...


class DoubleExponentialWindow:
    """Tunnel-barrier style windows.

    ``on`` is ~1 well below ``a_on`` and decays to 1/e at ``a_on``; ``off``
    mirrors it around ``a_off``. Works on floats and numpy arrays.
    """

    def on(self, params, w):
        if isinstance(w, float):
            return math.exp(-math.exp((w - params.a_on) / params.w_c))
        return np.exp(-np.exp((w - params.a_on) / params.w_c))

    def off(self, params, w):
        if isinstance(w, float):
            return math.exp(-math.exp(-(w - params.a_off) / params.w_c))
        return np.exp(-np.exp(-(w - params.a_off) / params.w_c))


class UnitWindow:
    def on(self, params, w):
        return np.ones_like(w, dtype=float) if isinstance(w, np.ndarray) else 1.0

    off = on


DEFAULT_WINDOW = DoubleExponentialWindow()


def window_on(params: MemristorParams, w: float, window: Window = DEFAULT_WINDOW) -> float:
    return float(window.on(params, w))


def window_off(params: MemristorParams, w: float, window: Window = DEFAULT_WINDOW) -> float:
    return float(window.off(params, w))


def _ipow(x: float, n: int) -> float:
    out = 1.0
    for _ in range(int(n)):
        out *= x
    return out


def state_derivative(params: MemristorParams, state: MemristorState, v: float,
                     window: Window = DEFAULT_WINDOW) -> float:
    """dw/dt in nm/s for device voltage ``v``."""
    w = state.w
    if v > params.v_off:
        return params.k_off * _ipow(v / params.v_off - 1.0, params.alpha_off) * window_off(params, w, window)
    if v < params.v_on:
        return params.k_on * _ipow(v / params.v_on - 1.0, params.alpha_on) * window_on(params, w, window)
    return 0.0


class DeviceArray:
    """Column view of several devices for rate evaluation on state vectors."""

    _SCALAR_LIMIT = 8

    def __init__(self, params_list, window: Window = DEFAULT_WINDOW):
        self.params_list = list(params_list)
        self.window = window
        for f in fields(MemristorParams):
            setattr(self, f.name, np.array([getattr(p, f.name) for p in self.params_list], dtype=float))

    def __len__(self):
        return len(self.params_list)

    def s(self, w):
        return (w - self.w_off) / (self.w_on - self.w_off)

    def resistance(self, w):
        return self.R_off + (self.R_on - self.R_off) * self.s(w)

    def rate(self, w, v):
        """dw/dt for every device, projected so saturated devices stay put."""
        if len(self.params_list) <= self._SCALAR_LIMIT:
            return np.array([projected_rate(p, wi, vi, self.window)
                             for p, wi, vi in zip(self.params_list, w.tolist(), v.tolist())])
        out = np.zeros_like(w)
        off = v > self.v_off
        on = v < self.v_on
        if off.any():
            sub = _Columns(self, off)
            out[off] = (self.k_off[off] * _apow(v[off] / self.v_off[off] - 1.0, self.alpha_off[off])
                        * self.window.off(sub, w[off]))
        if on.any():
            sub = _Columns(self, on)
            out[on] = (self.k_on[on] * _apow(v[on] / self.v_on[on] - 1.0, self.alpha_on[on])
                       * self.window.on(sub, w[on]))
        out[(w >= self.w_on) & (out > 0)] = 0.0
        out[(w <= self.w_off) & (out < 0)] = 0.0
        return out


def projected_rate(p: MemristorParams, w: float, v: float, window: Window = DEFAULT_WINDOW) -> float:
    """dw/dt with motion past a saturated bound suppressed (scalar)."""
    if v > p.v_off:
        if w <= p.w_off:
            return 0.0
        return p.k_off * _ipow(v / p.v_off - 1.0, p.alpha_off) * float(window.off(p, w))
    if v < p.v_on:
        if w >= p.w_on:
            return 0.0
        return p.k_on * _ipow(v / p.v_on - 1.0, p.alpha_on) * float(window.on(p, w))
    return 0.0


def _apow(base, exps):
    out = np.ones_like(base)
    for n in np.unique(exps):
        sel = exps == n
        acc = np.ones(int(sel.sum()))
        for _ in range(int(n)):
            acc = acc * base[sel]
        out[sel] = acc
    return out


class _Columns:
    """Subset of a DeviceArray's columns, shaped like MemristorParams for windows."""

    def __init__(self, arr, sel):
        for name in ("a_on", "a_off", "w_c", "w_on", "w_off"):
            setattr(self, name, getattr(arr, name)[sel])


# -- state integration -------------------------------------------------------


def integrate_state(params: MemristorParams, state: MemristorState,
                    v_of_t: Callable[[float], float] | float, duration: float,
                    settings: IntegratorSettings | None = None,
                    window: Window = DEFAULT_WINDOW) -> MemristorState:
    """Evolve one device under a prescribed voltage waveform.

    ``v_of_t`` is a constant or a callable of time. The state is clamped to
    [w_off, w_on] after every accepted step.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    vfun = v_of_t if callable(v_of_t) else (lambda t, _v=float(v_of_t): _v)
    autonomous = not callable(v_of_t)

    def rhs(t, y):
        return [projected_rate(params, y[0], vfun(t), window)]

    res = integrate_small(rhs, [state.w], duration, lower=[params.w_off], upper=[params.w_on],
                          settings=settings, autonomous=autonomous)
    return MemristorState(float(res.y[0]))


def switching_time(params: MemristorParams, v: float, s_start: float = 0.01, s_end: float = 0.99,
                   settings: IntegratorSettings | None = None, t_max: float = 1e-3,
                   window: Window = DEFAULT_WINDOW) -> float | None:
    """Time for a constant drive ``v`` to move s from ``s_start`` to ``s_end``.

    Returns None if the target is not reached within ``t_max``.
    """
    w_end = params.w_off + s_end * (params.w_on - params.w_off)
    rising = s_end > s_start

    def rhs(t, y):
        return [projected_rate(params, y[0], v, window)]

    def event(t, y):
        return y[0] - w_end if rising else w_end - y[0]

    w0 = params.w_off + s_start * (params.w_on - params.w_off)
    res = integrate_small(rhs, [w0], t_max, lower=[params.w_off], upper=[params.w_on],
                          settings=settings, event=event)
    return res.t_event
