"""Analytical switching constraints for the two-memristor IMPLY gate.

Static constraints come from requiring the right switching condition on Q in
each truth-table case, with Q's resistance pinned to the relevant output
threshold. Dynamic constraints bound how far a device can move within one
operation timestep when its rate is frozen at the most favourable value.

Threshold resistances are taken on a fixed reference scale (nominal device
parameters by default), so a varied device is judged against the same
absolute resistance levels a reader circuit would use.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .device import DomainError, MemristorParams
from .gate import GateConfig, steady_state_r_min
from .thresholds import ConfigError, ThresholdScheme, resistance_threshold

UNITS = {"R": "ohm", "v": "V", "k": "nm/s"}

ESTIMATORS = ("RQ1", "RQ2", "RQ3")


@dataclass
class ConstraintRecord:
    id: str
    parameter: str  # e.g. "v_onQ"
    direction: str  # "lower" or "upper"
    bound: float  # nan when not finite / not applicable
    unit: str
    value: float  # current value of the constrained parameter
    satisfied: bool
    strict: bool = True
    status: str = "ok"  # ok | unbounded | degenerate | invalid
    inputs: dict = field(default_factory=dict)
    note: str = ""

    @property
    def margin(self) -> float:
        """Signed distance into the admissible side (positive = satisfied)."""
        if math.isnan(self.bound):
            return math.nan
        return self.value - self.bound if self.direction == "lower" else self.bound - self.value


@dataclass
class ConstraintReport:
    records: list

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def get(self, cid: str) -> ConstraintRecord:
        for r in self.records:
            if r.id == cid:
                return r
        raise KeyError(cid)

    @property
    def all_satisfied(self) -> bool:
        return all(r.satisfied for r in self.records)

    def rows(self) -> list[dict]:
        out = []
        for r in self.records:
            row = asdict(r)
            row["bound"] = _sig6(r.bound)
            row["value"] = _sig6(r.value)
            row["inputs"] = json.dumps({k: _sig6(v) for k, v in r.inputs.items()})
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["id"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()

    def to_json(self) -> str:
        recs = []
        for r in self.records:
            d = asdict(r)
            d["bound"] = _sig6(r.bound)
            d["value"] = _sig6(r.value)
            d["inputs"] = {k: _sig6(v) for k, v in r.inputs.items()}
            recs.append(d)
        return json.dumps({"records": recs}, indent=2, allow_nan=False, default=str)


def _sig6(x):
    """Six significant digits; non-finite values become None for JSON."""
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def _record(cid, parameter, direction, bound, value, strict=True, status="ok", inputs=None, note=""):
    if math.isnan(bound):
        sat = status in ("unbounded", "degenerate")
    elif direction == "lower":
        sat = value > bound if strict else value >= bound
    else:
        sat = value < bound if strict else value <= bound
    unit = UNITS[parameter[0]]
    return ConstraintRecord(cid, parameter, direction, float(bound), unit, float(value), bool(sat),
                            strict, status, dict(inputs or {}), note)


# -- static ------------------------------------------------------------------


def _vq_threshold_bound(R_Q: float, v: float, config: GateConfig):
    """a/b of the switching condition V_Q vs v with R_Q pinned (b > 0 branch)."""
    a = R_Q * config.R_G * (v + config.V_cond - config.V_set)
    b = R_Q * config.V_set - v * (config.R_G + R_Q)
    return a, b


def static_bounds(params_P: MemristorParams, params_Q: MemristorParams, config: GateConfig,
                  scheme: ThresholdScheme, reference: MemristorParams | None = None) -> ConstraintReport:
    """Static switching-condition bounds plus the input-threshold inequalities.

    Each truth-table case requires V_Q on the right side of Q's threshold;
    rearranged for R_P this gives R_P > a/b when b > 0. Only that branch is
    reported; when b <= 0 the R_P record is flagged and judged directly from
    the sign-aware inequality.
    """
    ref = reference or MemristorParams()
    R_OH = resistance_threshold(scheme, "OH", ref)
    R_OL = resistance_threshold(scheme, "OL", ref)
    R_IH = resistance_threshold(scheme, "IH", ref)
    R_IL = resistance_threshold(scheme, "IL", ref)
    V_set, R_G = config.V_set, config.R_G
    recs = []

    def vq_record(cid, R_Q, label, v_param, v_value):
        bound = -V_set * R_Q / (R_G + R_Q)
        return _record(cid, v_param, "lower", bound, v_value,
                       inputs={"R_Q": R_Q, "R_G": R_G, "V_set": V_set}, note=f"b > 0 with R_Q = {label}")

    def rp_record(cid, rp_param, rp_value, R_Q, label, v, direction):
        # switching condition on V_Q against -v (v is Q's on/off threshold)
        a, b = _vq_threshold_bound(R_Q, -v, config)
        inputs = {"R_Q": R_Q, "v": v, "R_G": R_G}
        if b == 0:
            return _record(cid, rp_param, direction, math.nan, rp_value, status="unbounded",
                           inputs=inputs, note=f"b = 0 with R_Q = {label}")
        if b < 0:
            # the b > 0 precondition is itself violated; judge R_P*b vs a directly
            ok = (rp_value * b > a) if direction == "lower" else (rp_value * b < a)
            rec = _record(cid, rp_param, direction, math.nan, rp_value, status="invalid",
                          inputs=inputs, note=f"b < 0 with R_Q = {label}")
            rec.satisfied = bool(ok)
            return rec
        return _record(cid, rp_param, direction, a / b, rp_value, inputs=inputs, note=f"R_Q = {label}")

    # Case 1: Q must set, V_Q > -v_onQ with R_Q at R_OH
    recs.append(vq_record("case1_vonQ", R_OH, "R_OH", "v_onQ", params_Q.v_on))
    recs.append(rp_record("case1_RoffP", "R_offP", params_P.R_off, R_OH, "R_OH", params_Q.v_on, "lower"))
    # Case 3: Q must hold, V_Q < -v_onQ with R_Q at R_OL
    recs.append(vq_record("case3_vonQ", R_OL, "R_OL", "v_onQ", params_Q.v_on))
    recs.append(rp_record("case3_RonP", "R_onP", params_P.R_on, R_OL, "R_OL", params_Q.v_on, "upper"))
    # Cases 2 and 4: Q must not reset, V_Q > -v_offQ with R_Q at R_OH
    recs.append(vq_record("case24_voffQ", R_OH, "R_OH", "v_offQ", params_Q.v_off))
    recs.append(rp_record("case24_RoffP", "R_offP", params_P.R_off, R_OH, "R_OH", params_Q.v_off, "lower"))
    recs.append(rp_record("case24_RonP", "R_onP", params_P.R_on, R_OH, "R_OH", params_Q.v_off, "lower"))
    # valid inputs at all
    recs.append(_record("thr_RoffP", "R_offP", "lower", R_IL, params_P.R_off, inputs={"R_IL": R_IL}))
    recs.append(_record("thr_RoffQ", "R_offQ", "lower", R_IL, params_Q.R_off, inputs={"R_IL": R_IL}))
    recs.append(_record("thr_RonP", "R_onP", "upper", R_IH, params_P.R_on, inputs={"R_IH": R_IH}))
    recs.append(_record("thr_RonQ", "R_onQ", "upper", R_IH, params_Q.R_on, inputs={"R_IH": R_IH}))
    return ConstraintReport(recs)


# -- dynamic -----------------------------------------------------------------


def _vq(R_P, R_Q, config):
    R_G = config.R_G
    return (R_Q * (R_P + R_G) * config.V_set - R_Q * R_G * config.V_cond) / (R_P * R_G + R_P * R_Q + R_Q * R_G)


def _vp(R_P, R_Q, config):
    R_G = config.R_G
    return (R_P * (R_Q + R_G) * config.V_cond - R_P * R_G * config.V_set) / (R_P * R_G + R_P * R_Q + R_Q * R_G)


def _state_length(params: MemristorParams, R: float) -> float:
    return (R - params.R_off) / (params.R_on - params.R_off) * (params.w_on - params.w_off) + params.w_off


def dynamic_vonq_record(params_P, params_Q, config, scheme, reference=None) -> ConstraintRecord:
    ref = reference or MemristorParams()
    R_OH = resistance_threshold(scheme, "OH", ref)
    V_Qi = _vq(params_P.R_off, params_Q.R_off, config)
    dw_min = _state_length(params_Q, R_OH)
    reach = params_Q.k_on * config.timestep
    inputs = {"V_Qi": V_Qi, "dw_min": dw_min, "k_onQ*dT": reach, "R_OH": R_OH}
    if dw_min <= 0:
        return _record("dyn_vonQ", "v_onQ", "lower", math.nan, params_Q.v_on, strict=False,
                       status="degenerate", inputs=inputs, note="R_OH not below R_offQ; vacuous")
    bound = -V_Qi / ((dw_min / reach) ** (1.0 / params_Q.alpha_on) + 1.0)
    return _record("dyn_vonQ", "v_onQ", "lower", bound, params_Q.v_on, strict=False, inputs=inputs)


def dynamic_vonq_bound(params_P: MemristorParams, params_Q: MemristorParams, config: GateConfig,
                       scheme: ThresholdScheme, reference: MemristorParams | None = None) -> float:
    """Lower bound on v_onQ from the largest state change Q can make in one timestep.

    Q's rate is frozen at its initial value (both devices fully off); within
    the timestep it must cover the distance to the output-'1' threshold.
    Returns nan when that distance is not positive (the bound is vacuous).
    """
    return dynamic_vonq_record(params_P, params_Q, config, scheme, reference).bound


def estimator_resistance(params_Q: MemristorParams, config: GateConfig, estimator: str) -> float:
    """Guess of Q's final resistance in Case 1: R_min, arithmetic or geometric mean with R_offQ."""
    r_min = steady_state_r_min(params_Q, config)
    if estimator == "RQ1":
        return r_min
    if estimator == "RQ2":
        return 0.5 * (params_Q.R_off + r_min)
    if estimator == "RQ3":
        return math.sqrt(params_Q.R_off * r_min)
    raise ConfigError(f"unknown estimator {estimator!r}; choose from {', '.join(ESTIMATORS)}")


def dynamic_vonp_record(params_P, params_Q, config, scheme, estimator="RQ3", reference=None) -> ConstraintRecord:
    ref = reference or MemristorParams()
    R_IL = resistance_threshold(scheme, "IL", ref)
    cid = f"dyn_vonP_{estimator}"
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}; choose from {', '.join(ESTIMATORS)}")
    r_min = steady_state_r_min(params_Q, config)
    if not 0 < r_min:
        return _record(cid, "v_onP", "upper", math.nan, params_P.v_on, strict=False, status="invalid",
                       inputs={"R_min": r_min}, note="Q cannot set at all (R_min not positive)")
    R_Qj = estimator_resistance(params_Q, config, estimator)
    V_Pf = _vp(params_P.R_off, R_Qj, config)
    dw_max = _state_length(params_P, R_IL) - params_P.w_off
    reach = params_P.k_on * config.timestep
    inputs = {"R_Q": R_Qj, "V_Pf": V_Pf, "dw_max": dw_max, "k_onP*dT": reach, "R_IL": R_IL}
    if dw_max <= 0:
        return _record(cid, "v_onP", "upper", math.nan, params_P.v_on, strict=False, status="invalid",
                       inputs=inputs, note="R_offP at or below R_IL; P is no valid '0' input")
    bound = -V_Pf / ((dw_max / reach) ** (1.0 / params_P.alpha_on) + 1.0)
    note = "recommended" if estimator == "RQ3" else ("optimistic floor" if estimator == "RQ1" else "")
    return _record(cid, "v_onP", "upper", bound, params_P.v_on, strict=False, inputs=inputs, note=note)


def dynamic_vonp_bound(params_P: MemristorParams, params_Q: MemristorParams, config: GateConfig,
                       scheme: ThresholdScheme, estimator: str = "RQ3",
                       reference: MemristorParams | None = None) -> float:
    """Upper bound on v_onP so that P drifts less than the distance to R_IL.

    P's voltage is evaluated at R_P = R_offP and an estimated final R_Q.
    Returns nan when R_offP is already at or below R_IL.
    """
    return dynamic_vonp_record(params_P, params_Q, config, scheme, estimator, reference).bound


def full_report(params_P, params_Q, config, scheme, reference=None, estimators=ESTIMATORS) -> ConstraintReport:
    recs = list(static_bounds(params_P, params_Q, config, scheme, reference).records)
    recs.append(dynamic_vonq_record(params_P, params_Q, config, scheme, reference))
    for est in estimators:
        recs.append(dynamic_vonp_record(params_P, params_Q, config, scheme, est, reference))
    return ConstraintReport(recs)


# -- gate resistor -------------------------------------------------------------


@dataclass(frozen=True)
class GateResistorBounds:
    lower: float
    upper: float
    lower_exact: float  # full nodal solve of Case 3 with R_P = R_on, R_Q = R_off
    upper_exact: float  # full nodal solve of Case 1 with R_P = R_Q = R_off

    @property
    def geometric_mean(self) -> float:
        return math.sqrt(self.lower * self.upper)

    def as_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "lower_exact": self.lower_exact,
                "upper_exact": self.upper_exact, "geometric_mean": self.geometric_mean}


def rg_bounds(params: MemristorParams, config: GateConfig) -> GateResistorBounds:
    """Admissible range of the gate resistor for nominal devices.

    The simple bounds neglect the loading of the lesser device; the exact
    variants solve the two-device node without that simplification.
    """
    v = abs(params.v_on)
    V_set, V_cond = config.V_set, config.V_cond
    den_lo = V_cond - (V_set - v)
    den_hi = 2 * v - V_set + V_cond
    if den_lo <= 0 or den_hi <= 0:
        raise ConfigError("R_G bounds undefined: need V_cond > V_set - |v_on| and 2|v_on| > V_set - V_cond")
    lower = params.R_on * (V_set - v) / den_lo
    upper = params.R_off * (V_set - v) / den_hi

    def exact(R_P, R_Q):
        # V_Q = v solved for R_G: R_G * (R_Q (V_set - V_cond) - v (R_P + R_Q)) = R_P R_Q (v - V_set)
        coef = R_Q * (V_set - V_cond) - v * (R_P + R_Q)
        return math.nan if coef == 0 else R_P * R_Q * (v - V_set) / coef

    return GateResistorBounds(lower, upper, exact(params.R_on, params.R_off), exact(params.R_off, params.R_off))


# -- operating area ------------------------------------------------------------

_FIELD_PREFIXES = ("R_on", "R_off", "v_on", "v_off", "k_on", "k_off")


def parse_parameter_id(pid: str) -> tuple[str, str]:
    """'R_offP' -> ('R_off', 'P')."""
    if len(pid) > 1 and pid[-1] in "PQ" and pid[:-1] in _FIELD_PREFIXES:
        return pid[:-1], pid[-1]
    raise ConfigError(f"unknown parameter id {pid!r}; expected one of "
                      + ", ".join(f + d for f in _FIELD_PREFIXES for d in "PQ"))


DEFAULT_SELECTION = ("static", "threshold", "dyn_vonQ", "dyn_vonP_RQ3")


def _selected(record_id: str, selection) -> bool:
    for item in selection:
        if item == record_id:
            return True
        if item == "static" and record_id.startswith("case"):
            return True
        if item == "threshold" and record_id.startswith("thr_"):
            return True
        if item == "dynamic" and record_id.startswith("dyn_"):
            return True
    return False


@dataclass
class OperatingArea:
    x_param: str
    y_param: str
    x: np.ndarray
    y: np.ndarray
    mask: np.ndarray  # shape (len(y), len(x)); True = admissible
    invalid: np.ndarray  # points without physical meaning
    constraint_masks: dict  # id -> bool array
    margins: dict  # id -> float array (nan where undefined)
    polylines: list  # (constraint id, (k, 2) array of x, y)
    scheme: str = ""
    x_nominal: float = math.nan
    y_nominal: float = math.nan
    thresholds: dict = field(default_factory=dict)  # R_IL, R_IH, R_OL, R_OH in ohm

    def to_json(self) -> str:
        return json.dumps({
            "x_param": self.x_param, "y_param": self.y_param, "scheme": self.scheme,
            "x": self.x.tolist(), "y": self.y.tolist(),
            "mask": self.mask.astype(int).tolist(), "invalid": self.invalid.astype(int).tolist(),
            "polylines": [{"constraint": cid, "points": pts.tolist()} for cid, pts in self.polylines],
            "x_nominal": self.x_nominal, "y_nominal": self.y_nominal, "thresholds": self.thresholds,
        })


def operating_area(x_param: str, x_range, y_param: str, y_range, params_P: MemristorParams,
                   params_Q: MemristorParams, config: GateConfig, scheme: ThresholdScheme,
                   selection=DEFAULT_SELECTION, n: int | tuple = 101,
                   reference: MemristorParams | None = None) -> OperatingArea:
    """Admissible region of two device parameters with everything else fixed.

    The admissibility mask is the conjunction of the selected constraint
    masks. Grid points where the parameter set has no physical meaning
    (e.g. R_on >= R_off) are flagged invalid and excluded.
    """
    fx, dx = parse_parameter_id(x_param)
    fy, dy = parse_parameter_id(y_param)
    if x_param == y_param:
        raise ConfigError("x and y parameters must differ")
    nx, ny = (n, n) if isinstance(n, int) else n
    if nx < 2 or ny < 2:
        raise ConfigError("grid needs at least 2x2 points")
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if x0 == x1 or y0 == y1:
        raise ConfigError("degenerate plotting range (min == max)")
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)

    known = [r.id for r in full_report(params_P, params_Q, config, scheme, reference)]
    for item in selection:
        if item not in ("static", "threshold", "dynamic") and item not in known:
            raise ConfigError(f"unknown constraint id {item!r}")
    ids = [cid for cid in known if _selected(cid, selection)]
    masks = {cid: np.zeros((ny, nx), dtype=bool) for cid in ids}
    margins = {cid: np.full((ny, nx), np.nan) for cid in ids}
    invalid = np.zeros((ny, nx), dtype=bool)

    for j, yv in enumerate(ys):
        for i, xv in enumerate(xs):
            changes = {"P": {}, "Q": {}}
            changes[dx][fx] = xv
            changes[dy][fy] = yv
            try:
                pP = params_P.with_changes(**changes["P"])
                pQ = params_Q.with_changes(**changes["Q"])
                report = full_report(pP, pQ, config, scheme, reference)
            except (DomainError, ArithmeticError):
                invalid[j, i] = True
                continue
            for rec in report:
                if rec.id in masks:
                    masks[rec.id][j, i] = rec.satisfied
                    margins[rec.id][j, i] = _scaled_margin(rec)
                    if rec.status == "invalid" and rec.id.startswith("dyn_"):
                        invalid[j, i] = True

    mask = ~invalid
    for m in masks.values():
        mask &= m
    polylines = []
    for cid in ids:
        polylines.extend((cid, line) for line in _zero_contours(xs, ys, margins[cid]))
    ref = reference or MemristorParams()
    base = {"P": params_P, "Q": params_Q}
    return OperatingArea(x_param, y_param, xs, ys, mask, invalid, masks, margins, polylines,
                         scheme=scheme.name,
                         x_nominal=float(getattr(base[dx], fx)), y_nominal=float(getattr(base[dy], fy)),
                         thresholds={k: resistance_threshold(scheme, k[2:], ref)
                                     for k in ("R_IL", "R_IH", "R_OL", "R_OH")})


def _scaled_margin(rec: ConstraintRecord) -> float:
    m = rec.margin
    if math.isnan(m):
        return math.nan
    return m / (abs(rec.bound) + abs(rec.value) or 1.0)


def _zero_contours(xs, ys, z):
    """Zero level set of a gridded margin as a list of (k, 2) polylines."""
    import contourpy

    if not np.isfinite(z).any():
        return []
    finite = z[np.isfinite(z)]
    if finite.min() > 0 or finite.max() < 0:
        return []
    gen = contourpy.contour_generator(xs, ys, np.ma.masked_invalid(z))
    return [np.asarray(line) for line in gen.lines(0.0) if len(line) >= 2]
