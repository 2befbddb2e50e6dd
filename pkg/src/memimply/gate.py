"""Single IMPLY gate: two memristors P and Q over a shared resistor R_G.

Drivers are ideal sources behind series switches. A driver that is off still
connects its (idle, 0 V) source through the switch off-resistance. Device
voltages are reported top-minus-bottom (positive while a set pulse is
applied); the model voltage seen by the VTEAM equation is the negative of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .device import (
    DEFAULT_WINDOW,
    DeviceArray,
    MemristorParams,
    MemristorState,
    normalized_state,
    projected_rate,
    resistance_of_state,
)
from .integrator import DEFAULT_SETTINGS, IntegratorSettings, integrate_small
from .thresholds import ConfigError, Logic, ThresholdScheme, classify


class SingularityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GateConfig:
    V_set: float = 1.0
    V_cond: float = 0.9
    V_reset: float = -1.0
    V_read: float = 0.1
    R_G: float = 40e3
    timestep: float = 15e-6
    switch_on_resistance: float = 1e-9
    switch_off_resistance: float = 1e9
    # readout sensing: "driver" keeps R_G in the path, "short_rg" closes the R_G switch
    readout: str = "driver"
    init_short_rg: bool = True
    # state of a fresh device before it is written: "hrs" (s = 0) or "complement" of the bit
    initial_state: str = "hrs"
    integrator: IntegratorSettings = field(default=DEFAULT_SETTINGS)

    def __post_init__(self):
        if self.R_G <= 0 or self.timestep <= 0:
            raise ConfigError("R_G and timestep must be positive")
        if self.readout not in ("driver", "short_rg"):
            raise ConfigError(f"unknown readout variant {self.readout!r}")
        if self.initial_state not in ("hrs", "complement"):
            raise ConfigError(f"unknown initial state policy {self.initial_state!r}")

    def with_changes(self, **changes) -> "GateConfig":
        return replace(self, **changes)


def operating_voltage_violations(config: GateConfig, *devices: MemristorParams) -> list[str]:
    """Names of violated driver relations for the given devices (empty when valid)."""
    out = []
    for dev in devices:
        if not abs(config.V_set) > abs(dev.v_on):
            out.append(f"|V_set| > |v_on| (|{config.V_set:g}| <= |{dev.v_on:g}|)")
        if not abs(config.V_set - config.V_cond) < abs(dev.v_on):
            out.append(f"|V_set - V_cond| < |v_on| (|{config.V_set - config.V_cond:g}| >= |{dev.v_on:g}|)")
        if not abs(config.V_reset) > abs(dev.v_off):
            out.append(f"|V_reset| > |v_off| (|{config.V_reset:g}| <= |{dev.v_off:g}|)")
    return list(dict.fromkeys(out))


def check_operating_voltages(config: GateConfig, *devices: MemristorParams) -> None:
    bad = operating_voltage_violations(config, *devices)
    if bad:
        raise ConfigError("driver voltages violate: " + "; ".join(bad))


@dataclass(frozen=True)
class GateState:
    params_P: MemristorParams
    params_Q: MemristorParams
    P: MemristorState
    Q: MemristorState

    @classmethod
    def from_s(cls, params_P, params_Q, s_P: float, s_Q: float) -> "GateState":
        return cls(params_P, params_Q, MemristorState.from_s(params_P, s_P),
                   MemristorState.from_s(params_Q, s_Q))

    @property
    def s_P(self) -> float:
        return normalized_state(self.params_P, self.P)

    @property
    def s_Q(self) -> float:
        return normalized_state(self.params_Q, self.Q)

    @property
    def R_P(self) -> float:
        return resistance_of_state(self.params_P, self.P)

    @property
    def R_Q(self) -> float:
        return resistance_of_state(self.params_Q, self.Q)


# -- static solves -----------------------------------------------------------


def solve_gate_voltages(R_P: float, R_Q: float, config: GateConfig) -> tuple[float, float, float]:
    """Device and gate-resistor voltages (V_P, V_Q, V_G) during IMPLY with ideal drivers."""
    if R_P <= 0 or R_Q <= 0:
        raise ValueError("resistances must be positive")
    R_G, V_set, V_cond = config.R_G, config.V_set, config.V_cond
    V_Q = (R_Q * (R_P + R_G) * V_set - R_Q * R_G * V_cond) / (R_P * R_G + R_P * R_Q + R_Q * R_G)
    V_G = V_set - V_Q
    return V_cond - V_G, V_Q, V_G


def steady_state_r_min(params_Q: MemristorParams, config: GateConfig) -> float:
    """Lowest resistance Q can settle at in Case 1 when P does not drift."""
    R_G, R_off, v_on = config.R_G, params_Q.R_off, params_Q.v_on
    denom = (R_G + R_off) * (config.V_set + v_on) - R_G * config.V_cond
    if denom == 0:
        raise SingularityError("R_min denominator vanishes")
    return (-v_on * R_G * R_off) / denom


def star_voltages(R, sources, series, g_ground):
    """Solve a star of (source, series resistor, device) branches meeting at one node.

    Returns (device voltages top-minus-bottom, common node voltage, branch currents).
    """
    total = series + R
    cond = 1.0 / total
    V_G = float(np.dot(sources, cond) / (cond.sum() + g_ground))
    current = (sources - V_G) * cond
    return current * R, V_G, current


# -- transient pulses --------------------------------------------------------


@dataclass
class _Drive:
    """Driver state for one pulse: source voltage per device (None = off)."""

    V_P: float | None
    V_Q: float | None
    short_rg: bool


def _branch_setup(drive: _Drive, config: GateConfig):
    on, off = config.switch_on_resistance, config.switch_off_resistance
    sources = np.array([drive.V_P or 0.0, drive.V_Q or 0.0])
    series = np.array([on if drive.V_P is not None else off,
                       on if drive.V_Q is not None else off])
    g_ground = 1.0 / config.R_G + 1.0 / (on if drive.short_rg else off)
    return sources, series, g_ground


def _pulse(gate: GateState, drive: _Drive, config: GateConfig, frozen=(),
           observer: Callable | None = None, window=DEFAULT_WINDOW) -> GateState:
    pP, pQ = gate.params_P, gate.params_Q
    sources, series, g_ground = _branch_setup(drive, config)
    src_P, src_Q = float(sources[0]), float(sources[1])
    ser_P, ser_Q = float(series[0]), float(series[1])
    move_P, move_Q = "P" not in frozen, "Q" not in frozen
    slope_P = (pP.R_on - pP.R_off) / (pP.w_on - pP.w_off)
    slope_Q = (pQ.R_on - pQ.R_off) / (pQ.w_on - pQ.w_off)

    def solve(w):
        R_P = pP.R_off + slope_P * (w[0] - pP.w_off)
        R_Q = pQ.R_off + slope_Q * (w[1] - pQ.w_off)
        c_P = 1.0 / (ser_P + R_P)
        c_Q = 1.0 / (ser_Q + R_Q)
        V_G = (src_P * c_P + src_Q * c_Q) / (c_P + c_Q + g_ground)
        i_P = (src_P - V_G) * c_P
        i_Q = (src_Q - V_G) * c_Q
        return R_P, R_Q, V_G, i_P, i_Q

    def rhs(t, w):
        R_P, R_Q, _, i_P, i_Q = solve(w)
        return [projected_rate(pP, w[0], -i_P * R_P, window) if move_P else 0.0,
                projected_rate(pQ, w[1], -i_Q * R_Q, window) if move_Q else 0.0]

    def report(t, w):
        R_P, R_Q, V_G, i_P, i_Q = solve(w)
        observer(t, np.array(w), np.array([R_P, R_Q]), np.array([i_P * R_P, i_Q * R_Q]),
                 V_G, np.array([i_P, i_Q]))

    res = integrate_small(rhs, [gate.P.w, gate.Q.w], config.timestep,
                          lower=[pP.w_off, pQ.w_off], upper=[pP.w_on, pQ.w_on],
                          settings=config.integrator,
                          observer=report if observer is not None else None)
    return replace(gate, P=MemristorState(float(res.y[0])), Q=MemristorState(float(res.y[1])))


def write_bit(gate: GateState, which: str, bit: int, config: GateConfig) -> GateState:
    V = config.V_set if bit else config.V_reset
    drive = _Drive(V if which == "P" else None, V if which == "Q" else None, config.init_short_rg)
    return _pulse(gate, drive, config)


def initialize(gate: GateState, p: int, q: int, config: GateConfig) -> GateState:
    """Write p into P, then q into Q, one timestep each with the other device floating.

    Whatever state the dynamics reach is returned; a write that falls short is
    left for the caller to detect.
    """
    gate = write_bit(gate, "P", p, config)
    return write_bit(gate, "Q", q, config)


def run_imply(gate: GateState, config: GateConfig, freeze_p: bool = False,
              observer: Callable | None = None) -> GateState:
    """One IMPLY step: V_cond on P and V_set on Q for one timestep, both devices evolving.

    ``observer(t, w, R, v_dev, V_G, currents)`` sees every accepted step.
    """
    drive = _Drive(config.V_cond, config.V_set, short_rg=False)
    return _pulse(gate, drive, config, frozen=("P",) if freeze_p else (), observer=observer)


@dataclass(frozen=True)
class Readout:
    resistance: float
    gate: GateState


def readout(gate: GateState, which: str, config: GateConfig) -> Readout:
    """Apply V_read to one device (other floating) and infer its resistance.

    The sensed driver current is converted back to a device resistance by
    removing the known series path (driver switch and R_G or its short).
    """
    short = config.readout == "short_rg"
    drive = _Drive(config.V_read if which == "P" else None,
                   config.V_read if which == "Q" else None, short)
    after = _pulse(gate, drive, config)
    devices = DeviceArray([after.params_P, after.params_Q])
    sources, series, g_ground = _branch_setup(drive, config)
    _, _, current = star_voltages(devices.resistance(np.array([after.P.w, after.Q.w])),
                                  sources, series, g_ground)
    i = current[0 if which == "P" else 1]
    return_path = config.switch_on_resistance if short else config.R_G
    R = config.V_read / i - config.switch_on_resistance - return_path
    return Readout(float(R), after)


# -- truth table -------------------------------------------------------------


TRUTH_TABLE = ((1, 0, 0, 1), (2, 0, 1, 1), (3, 1, 0, 0), (4, 1, 1, 1))


@dataclass(frozen=True)
class CaseOutcome:
    case: int
    p: int
    q: int
    expected: int
    s_P_init: float
    s_Q_init: float
    R_P: float
    R_Q: float
    s_P: float
    s_Q: float
    p_input: Logic
    q_input: Logic
    p_after: Logic
    q_out: Logic
    passed: bool
    stage: str | None  # "initialization" / "operation" when failed

    def as_row(self) -> dict:
        return {"case": self.case, "p": self.p, "q": self.q, "expected": self.expected,
                "R_P": self.R_P, "R_Q": self.R_Q, "s_P": self.s_P, "s_Q": self.s_Q,
                "q_out": self.q_out.value, "p_after": self.p_after.value,
                "verdict": "correct" if self.passed else "failed", "stage": self.stage or ""}


def prior_state(bit: int, policy: str = "hrs") -> float:
    """Normalized state a device holds before it is written.

    "hrs": fresh devices rest in the high-resistance state. "complement":
    every write has to flip the device, the harshest starting point.
    """
    if policy == "hrs":
        return 0.0
    if policy == "complement":
        return 0.0 if bit else 1.0
    raise ConfigError(f"unknown initial state policy {policy!r}")


def s_reading(R: float, reference: MemristorParams) -> float:
    """Normalized state implied by a measured resistance on the reference scale, clipped to [0, 1]."""
    s = (R - reference.R_off) / (reference.R_on - reference.R_off)
    return min(1.0, max(0.0, s))


def judge_case(case, p, q, expected, s_P_init, s_Q_init, R_P, R_Q, s_P, s_Q,
               scheme: ThresholdScheme, reference: MemristorParams,
               require_p_retained: bool = False) -> CaseOutcome:
    """Verdict for one case from measured resistances.

    Inputs are checked after initialization (input thresholds); the output is
    Q's reading against the output thresholds. P's class after the operation
    is always recorded, and must still equal p only when
    ``require_p_retained`` is set.
    """
    p_in = classify(s_P_init, scheme, "input")
    q_in = classify(s_Q_init, scheme, "input")
    p_after = classify(s_reading(R_P, reference), scheme, "input")
    q_out = classify(s_reading(R_Q, reference), scheme, "output")
    init_ok = p_in == Logic.of_bit(p) and q_in == Logic.of_bit(q)
    op_ok = q_out == Logic.of_bit(expected) and (not require_p_retained or p_after == Logic.of_bit(p))
    passed = init_ok and op_ok
    stage = None if passed else ("initialization" if not init_ok else "operation")
    return CaseOutcome(case, p, q, expected, s_P_init, s_Q_init, R_P, R_Q, s_P, s_Q,
                       p_in, q_in, p_after, q_out, passed, stage)


def run_case(params_P: MemristorParams, params_Q: MemristorParams, p: int, q: int,
             config: GateConfig, scheme: ThresholdScheme,
             reference: MemristorParams | None = None,
             require_p_retained: bool = False) -> CaseOutcome:
    reference = reference or MemristorParams()
    expected = int((not p) or q)
    case = {(0, 0): 1, (0, 1): 2, (1, 0): 3, (1, 1): 4}[(p, q)]
    gate = GateState.from_s(params_P, params_Q, prior_state(p, config.initial_state),
                            prior_state(q, config.initial_state))
    gate = initialize(gate, p, q, config)
    s_P_init = s_reading(readout(gate, "P", config).resistance, reference)
    s_Q_init = s_reading(readout(gate, "Q", config).resistance, reference)
    gate = run_imply(gate, config)
    read_P = readout(gate, "P", config)
    read_Q = readout(read_P.gate, "Q", config)
    final = read_Q.gate
    return judge_case(case, p, q, expected, s_P_init, s_Q_init, read_P.resistance, read_Q.resistance,
                      final.s_P, final.s_Q, scheme, reference, require_p_retained)


def run_truth_table(params_P: MemristorParams, params_Q: MemristorParams, config: GateConfig,
                    scheme: ThresholdScheme, reference: MemristorParams | None = None,
                    require_p_retained: bool = False) -> list[CaseOutcome]:
    """All four IMPLY cases, each an independent experiment on fresh devices."""
    return [run_case(params_P, params_Q, p, q, config, scheme, reference, require_p_retained)
            for _, p, q, _ in TRUTH_TABLE]
