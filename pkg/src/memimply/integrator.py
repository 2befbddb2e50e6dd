"""Dormand-Prince 5(4) integrator with box clamping.

Small and explicit on purpose: the memristor state equations are non-stiff
inside their bounds, but the state must be clamped after every accepted step,
which off-the-shelf solvers do not allow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-6
    atol: float = 1e-6  # nm
    max_step: float = 15e-9
    min_step: float = 1e-18
    max_steps: int = 2_000_000
    # "rms" over components, or "max" when a few moving states sit among many idle ones
    norm: str = "rms"


DEFAULT_SETTINGS = IntegratorSettings()

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
# 5th minus 4th order weights
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
_A_ROWS = tuple(tuple(float(x) for x in row[:i]) for i, row in enumerate(_A))
_E_ROW = tuple(float(x) for x in _E)


@dataclass
class IntegrationResult:
    y: np.ndarray
    t: float
    steps: int
    rejected: int
    t_event: Optional[float] = None
    settled: bool = False


def integrate(rhs: Callable[[float, np.ndarray], np.ndarray], y0, duration: float,
              lower=-np.inf, upper=np.inf, settings: IntegratorSettings | None = None,
              autonomous: bool = True, event: Callable | None = None,
              observer: Callable[[float, np.ndarray], None] | None = None) -> IntegrationResult:
    """Integrate ``y' = rhs(t, y)`` over ``[0, duration]``.

    The state is clipped to ``[lower, upper]`` after each accepted step. For an
    autonomous right-hand side that evaluates to exactly zero the state is a
    fixed point and integration stops early (``settled``). ``event(t, y)``
    crossing from negative to non-negative stops integration and records the
    (linearly interpolated) crossing time.
    """
    st = settings or DEFAULT_SETTINGS
    y = np.array(y0, dtype=float)
    n = y.size
    K = np.empty((7, n))
    t = 0.0
    K[0] = rhs(t, y)
    if observer is not None:
        observer(t, y)
    steps = rejected = 0
    g_prev = event(t, y) if event is not None else None
    if g_prev is not None and g_prev >= 0:
        return IntegrationResult(y, t, 0, 0, t_event=0.0)
    if autonomous and not K[0].any():
        return IntegrationResult(y, duration, 0, 0, settled=True)

    h = st.max_step
    while t < duration:
        if duration - t < 1e-12 * duration:
            break
        h = min(h, st.max_step, duration - t)
        if h < st.min_step:
            raise IntegrationError(f"step size underflow at t={t:.6g} s (h={h:.3g} s)")
        for s in range(1, 7):
            K[s] = rhs(t + _C[s] * h, y + h * (_A[s, :s] @ K[:s]))
        y_new = y + h * (_A[6, :6] @ K[:6])
        err = h * (_E @ K)
        scale = st.atol + st.rtol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = err / scale
        if st.norm == "max":
            err_norm = float(np.max(np.abs(ratio)))
        else:
            err_norm = math.sqrt(float(np.mean(ratio ** 2)))
        if not math.isfinite(err_norm):
            raise IntegrationError(f"non-finite error estimate at t={t:.6g} s")
        if err_norm <= 1.0:
            t_old = t
            t = t + h
            y = np.clip(y_new, lower, upper)
            steps += 1
            if steps > st.max_steps:
                raise IntegrationError(f"exceeded {st.max_steps} steps at t={t:.6g} s")
            if np.array_equal(y, y_new):
                K[0] = K[6]
            else:
                K[0] = rhs(t, y)
            if observer is not None:
                observer(t, y)
            if event is not None:
                g = event(t, y)
                if g >= 0:
                    frac = g_prev / (g_prev - g) if g != g_prev else 1.0
                    return IntegrationResult(y, t, steps, rejected, t_event=t_old + frac * (t - t_old))
                g_prev = g
            if autonomous and not K[0].any():
                return IntegrationResult(y, duration, steps, rejected, settled=True)
            factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
        else:
            rejected += 1
            factor = max(0.2, 0.9 * err_norm ** -0.2)
        h = h * factor
    return IntegrationResult(y, t, steps, rejected)


def integrate_small(rhs: Callable[[float, list], list], y0, duration: float,
                    lower, upper, settings: IntegratorSettings | None = None,
                    autonomous: bool = True, event: Callable | None = None,
                    observer: Callable[[float, list], None] | None = None) -> IntegrationResult:
    """Same method as :func:`integrate` on plain Python lists.

    For systems of a handful of states the numpy call overhead dominates, so
    the single gate and the single-device helpers use this version. ``rhs``
    takes and returns lists; ``lower``/``upper`` are per-component sequences.
    """
    st = settings or DEFAULT_SETTINGS
    y = [float(v) for v in y0]
    n = len(y)
    lo = [float(v) for v in lower]
    hi = [float(v) for v in upper]
    idx = range(n)
    K = [None] * 7
    t = 0.0
    K[0] = rhs(t, y)
    if observer is not None:
        observer(t, y)
    steps = rejected = 0
    g_prev = event(t, y) if event is not None else None
    if g_prev is not None and g_prev >= 0:
        return IntegrationResult(np.array(y), t, 0, 0, t_event=0.0)
    if autonomous and not any(K[0]):
        return IntegrationResult(np.array(y), duration, 0, 0, settled=True)

    atol, rtol = st.atol, st.rtol
    h = st.max_step
    while t < duration:
        if duration - t < 1e-12 * duration:
            break
        h = min(h, st.max_step, duration - t)
        if h < st.min_step:
            raise IntegrationError(f"step size underflow at t={t:.6g} s (h={h:.3g} s)")
        for s in range(1, 7):
            a = _A_ROWS[s]
            y_stage = [y[i] + h * sum(a[j] * K[j][i] for j in range(s)) for i in idx]
            K[s] = rhs(t + _C[s] * h, y_stage)
        y_new = y_stage  # the last stage is evaluated at the 5th-order solution
        ratios = [h * sum(_E_ROW[j] * K[j][i] for j in range(7))
                  / (atol + rtol * max(abs(y[i]), abs(y_new[i]))) for i in idx]
        if st.norm == "max":
            err_norm = max(abs(r) for r in ratios)
        else:
            err_norm = math.sqrt(sum(r * r for r in ratios) / n)
        if not math.isfinite(err_norm):
            raise IntegrationError(f"non-finite error estimate at t={t:.6g} s")
        if err_norm <= 1.0:
            t_old = t
            t = t + h
            clipped = [min(hi[i], max(lo[i], y_new[i])) for i in idx]
            y = clipped
            steps += 1
            if steps > st.max_steps:
                raise IntegrationError(f"exceeded {st.max_steps} steps at t={t:.6g} s")
            K[0] = K[6] if clipped == y_new else rhs(t, y)
            if observer is not None:
                observer(t, y)
            if event is not None:
                g = event(t, y)
                if g >= 0:
                    frac = g_prev / (g_prev - g) if g != g_prev else 1.0
                    return IntegrationResult(np.array(y), t, steps, rejected,
                                             t_event=t_old + frac * (t - t_old))
                g_prev = g
            if autonomous and not any(K[0]):
                return IntegrationResult(np.array(y), duration, steps, rejected, settled=True)
            factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
        else:
            rejected += 1
            factor = max(0.2, 0.9 * err_norm ** -0.2)
        h = h * factor
    return IntegrationResult(np.array(y), t, steps, rejected)
