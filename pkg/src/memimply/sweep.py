"""Device-variation sweeps over the single gate.

A sweep varies one parameter family (resistances, threshold voltages or
switching speeds) on both devices at once. For every deviation magnitude
Δ each of the four parameters takes the levels -Δ, 0 and +Δ, giving 81
tuples per Δ; each tuple is judged by running the full truth table.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import multiprocessing as mp
import os
from dataclasses import dataclass, field

from .device import MemristorParams
from .gate import CaseOutcome, GateConfig, run_truth_table
from .thresholds import ConfigError, ThresholdScheme, resolve_scheme

FAMILIES = {
    "r": ("R_on", "R_off"),
    "v": ("v_on", "v_off"),
    "k": ("k_on", "k_off"),
}
FAMILY_ALIASES = {
    "r": "r", "resistances": "r", "resistance": "r",
    "v": "v", "threshold voltages": "v", "voltages": "v", "voltage": "v",
    "k": "k", "switching speeds": "k", "speeds": "k", "speed": "k",
}
DEFAULT_LEVELS = (-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
LEVEL_CODES = ("min", "nominal", "max")


def family_key(name: str) -> str:
    try:
        return FAMILY_ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown parameter family {name!r}; use r, v or k") from None


def family_parameters(family: str) -> tuple[str, ...]:
    """Parameter ids in display order: P's pair, then Q's pair."""
    a, b = FAMILIES[family_key(family)]
    return (a + "P", b + "P", a + "Q", b + "Q")


@dataclass(frozen=True)
class VariationSpec:
    family: str = "v"
    levels: tuple = DEFAULT_LEVELS
    scheme: str = "ttl"
    # optional explicit (low, high) per parameter id, replacing nominal*(1 -/+ Δ)
    absolute: dict = field(default_factory=dict)
    # stricter verdict: P must still read as its input value after the operation
    require_p_retained: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", family_key(self.family))
        levels = tuple(sorted(set(float(x) for x in self.levels) | {0.0}))
        object.__setattr__(self, "levels", levels)
        for pid, rng in self.absolute.items():
            if pid not in family_parameters(self.family):
                raise ConfigError(f"absolute range for {pid!r} is outside family {self.family!r}")
            if len(rng) != 2:
                raise ConfigError(f"absolute range for {pid!r} needs (low, high)")

    @property
    def magnitudes(self) -> tuple:
        """Distinct positive deviation magnitudes, ascending."""
        return tuple(sorted({abs(x) for x in self.levels if x != 0}))

    @property
    def threshold_scheme(self) -> ThresholdScheme:
        return resolve_scheme(self.scheme)


@dataclass(frozen=True)
class SweepTuple:
    index: int
    delta: float
    values: dict  # parameter id -> value
    codes: dict  # parameter id -> "min" | "nominal" | "max"
    params_P: MemristorParams
    params_Q: MemristorParams


def _level_value(nominal: float, code: str, delta: float, absolute=None) -> float:
    if code == "nominal":
        return nominal
    if absolute is not None:
        return float(absolute[0] if code == "min" else absolute[1])
    return nominal * (1.0 + (delta if code == "max" else -delta))


def generate_grid(spec: VariationSpec, nominal: MemristorParams | None = None) -> list[SweepTuple]:
    """All parameter tuples of a sweep, grouped by Δ in ascending order.

    Deviations are multiplicative: value = nominal * (1 + Δ). For negative
    parameters (v_on, k_off) +Δ therefore increases the magnitude.
    """
    nominal = nominal or MemristorParams()
    ids = family_parameters(spec.family)
    out = []
    for delta in spec.magnitudes or (0.0,):
        codes_iter = itertools.product(LEVEL_CODES, repeat=4) if delta else [("nominal",) * 4]
        for codes in codes_iter:
            changes = {"P": {}, "Q": {}}
            values = {}
            for pid, code in zip(ids, codes):
                name, dev = pid[:-1], pid[-1]
                v = _level_value(getattr(nominal, name), code, delta, spec.absolute.get(pid))
                changes[dev][name] = v
                values[pid] = v
            out.append(SweepTuple(len(out), delta, values, dict(zip(ids, codes)),
                                  nominal.with_changes(**changes["P"]),
                                  nominal.with_changes(**changes["Q"])))
    return out


@dataclass
class SweepOutcome:
    index: int
    delta: float
    values: dict
    codes: dict
    cases: list  # CaseOutcome per truth-table row (empty on numeric error)
    correct: bool
    stage: str | None = None  # "initialization" | "operation" | "numeric"
    error: str = ""
    extra: dict = field(default_factory=dict)  # diagnostics carried into the CSV row

    @property
    def verdict(self) -> str:
        return "correct" if self.correct else "failed"

    def as_row(self) -> dict:
        row = {"index": self.index, "delta": self.delta}
        for pid in self.values:
            row[pid] = self.values[pid]
            row[pid + "_level"] = self.codes[pid]
        row["verdict"] = self.verdict
        row["stage"] = self.stage or ""
        for c in self.cases:
            row[f"case{c.case}_q_out"] = c.q_out.value
            row[f"case{c.case}_R_Q"] = c.R_Q
        row.update(self.extra)
        row["error"] = self.error
        return row


def evaluate_tuple(t: SweepTuple, config: GateConfig, scheme: ThresholdScheme,
                   reference: MemristorParams | None = None,
                   require_p_retained: bool = False) -> SweepOutcome:
    """Run the truth table for one tuple. Numeric trouble becomes a failed outcome."""
    try:
        cases = run_truth_table(t.params_P, t.params_Q, config, scheme, reference, require_p_retained)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return SweepOutcome(t.index, t.delta, t.values, t.codes, [], False, "numeric",
                            f"{type(exc).__name__}: {exc}")
    return _outcome(t, cases)


def _outcome(t: SweepTuple, cases: list[CaseOutcome]) -> SweepOutcome:
    correct = all(c.passed for c in cases)
    stage = None
    if not correct:
        stages = {c.stage for c in cases if not c.passed}
        stage = "initialization" if "initialization" in stages else "operation"
    return SweepOutcome(t.index, t.delta, t.values, t.codes, cases, correct, stage)


def _work(args):
    return evaluate_tuple(*args)


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # not on every platform
        return os.cpu_count() or 1


def run_sweep(spec: VariationSpec, nominal: MemristorParams | None = None,
              config: GateConfig | None = None, jobs: int = 1,
              reference: MemristorParams | None = None, tuples=None) -> list[SweepOutcome]:
    """Judge every tuple of ``spec``; results come back sorted by tuple index.

    ``tuples`` restricts the run to a pre-generated subset of the grid.
    """
    nominal = nominal or MemristorParams()
    config = config or GateConfig()
    scheme = spec.threshold_scheme
    grid = generate_grid(spec, nominal) if tuples is None else list(tuples)
    work = [(t, config, scheme, reference, spec.require_p_retained) for t in grid]
    if jobs <= 1 or len(work) < 2:
        results = [_work(w) for w in work]
    else:
        with mp.get_context("spawn").Pool(jobs) as pool:
            results = pool.map(_work, work, chunksize=max(1, len(work) // (4 * jobs)))
    return sorted(results, key=lambda o: o.index)


# -- summaries -----------------------------------------------------------------


@dataclass
class FailureSummary:
    total: int
    failed: int
    entries: list  # dicts: delta, parameter, level, value, tuples, failed, fail_rate, share
    always_failing: list  # (delta, parameter, level)

    def parameter_share(self, parameter: str, delta: float | None = None) -> float:
        """Fraction of failed tuples in which ``parameter`` is off nominal."""
        return sum(e["share"] for e in self.entries
                   if e["parameter"] == parameter and e["level"] != "nominal"
                   and (delta is None or e["delta"] == delta))

    def to_dict(self) -> dict:
        return {"total": self.total, "failed": self.failed, "entries": self.entries,
                "always_failing": [list(x) for x in self.always_failing]}


def summarize_failures(outcomes: list[SweepOutcome]) -> FailureSummary:
    """Per (Δ, parameter, level): how often tuples containing it fail.

    ``fail_rate`` is failures among tuples with that level; ``share`` is the
    fraction of all failed tuples that contain it. Levels whose tuples all
    fail are listed in ``always_failing``.
    """
    counts: dict = {}
    values: dict = {}
    n_failed = sum(1 for o in outcomes if not o.correct)
    for o in outcomes:
        for pid, code in o.codes.items():
            key = (o.delta, pid, code)
            seen, bad = counts.get(key, (0, 0))
            counts[key] = (seen + 1, bad + (not o.correct))
            values[key] = o.values[pid]
    entries = []
    always = []
    for key in sorted(counts, key=lambda k: (k[0], k[1], LEVEL_CODES.index(k[2]))):
        seen, bad = counts[key]
        delta, pid, code = key
        entries.append({"delta": delta, "parameter": pid, "level": code, "value": values[key],
                        "tuples": seen, "failed": bad, "fail_rate": bad / seen,
                        "share": bad / n_failed if n_failed else 0.0})
        if seen and bad == seen:
            always.append(key)
    return FailureSummary(len(outcomes), n_failed, entries, always)


def outcomes_csv(outcomes: list[SweepOutcome]) -> str:
    buf = io.StringIO()
    rows = [o.as_row() for o in outcomes]
    names: list = []
    for r in rows:
        names.extend(k for k in r if k not in names)
    writer = csv.DictWriter(buf, fieldnames=names or ["index"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def summary_json(spec: VariationSpec, outcomes: list[SweepOutcome], extra: dict | None = None) -> str:
    summary = summarize_failures(outcomes)
    doc = {
        "family": spec.family,
        "parameters": list(family_parameters(spec.family)),
        "levels": list(spec.levels),
        "scheme": spec.threshold_scheme.as_dict(),
        "per_delta": {
            f"{d:g}": {"tuples": sum(1 for o in outcomes if o.delta == d),
                       "failed": sum(1 for o in outcomes if o.delta == d and not o.correct)}
            for d in sorted({o.delta for o in outcomes})
        },
        "summary": summary.to_dict(),
    }
    doc.update(extra or {})
    return json.dumps(doc, indent=2)
