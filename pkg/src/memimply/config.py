"""Human-editable configuration documents.

Each document is an INI file whose sections cover one concern::

    [device]            nominal device parameters (both P and Q)
    [device.P]          overrides for P only (likewise [device.Q])
    [gate]              driver voltages, R_G, timestep, switches
    [integrator]        rtol, atol, max_step
    [thresholds]        scheme = ttl | 1/2 | 1/3 | "s_OL s_IL s_IH s_OH"
    [sweep]             family, levels, require_p_retained, absolute.<id> = "low high"
    [crossbar]          size/rows/cols, line_resistance, placements, sigma, seed, ...

Values may carry units with SI prefixes (``40 kOhm``, ``15 us``, ``1 cm/s``,
``-0.7 V``, ``10 %``). Internally lengths are nm and speeds nm/s.
Several documents are merged in order, then command-line overrides win.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field

from .crossbar import CrossbarConfig
from .device import MemristorParams
from .gate import GateConfig
from .integrator import IntegratorSettings
from .sweep import VariationSpec, family_parameters
from .thresholds import ConfigError, resolve_scheme

PREFIX = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3, "c": 1e-2,
          "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9}
# base unit -> (kind, scale to internal unit)
BASE = {"V": ("voltage", 1.0), "Ohm": ("resistance", 1.0), "ohm": ("resistance", 1.0),
        "Ω": ("resistance", 1.0), "s": ("time", 1.0), "m": ("length", 1e9),
        "m/s": ("speed", 1e9)}
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def _scaled(value: float, factor: float) -> float:
    # divide by the reciprocal for small factors: 15 / 1e6 is exact where 15 * 1e-6 is not
    factor = float(f"{factor:.15g}")
    if factor < 1:
        return value / float(f"{1 / factor:.15g}")
    return value * factor


def parse_quantity(text: str, kind: str | None = None) -> float:
    """Number with optional unit. ``kind`` (voltage, resistance, time, length, speed) checks the unit."""
    m = _NUMBER.match(str(text))
    if not m:
        raise ConfigError(f"not a number: {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit:
        return value
    if unit == "%":
        return value / 100.0
    for base in sorted(BASE, key=len, reverse=True):
        if unit.endswith(base) and unit[: -len(base)] in PREFIX:
            got, scale = BASE[base]
            if kind is not None and got != kind:
                raise ConfigError(f"{text!r} is a {got}, expected a {kind}")
            return _scaled(value, PREFIX[unit[: -len(base)]] * scale)
    if unit in PREFIX:  # bare prefix such as "40k"
        return _scaled(value, PREFIX[unit])
    raise ConfigError(f"unknown unit {unit!r} in {text!r}")


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_levels(text) -> tuple:
    """Comma/space separated deviations; each may be a fraction or a percentage."""
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    if not parts:
        raise ConfigError("empty level list")
    out = []
    for p in parts:
        v = parse_quantity(p)
        out.extend([v, -v] if v > 0 and not p.startswith("+") else [v])
    return tuple(sorted(set(out)))


def parse_cell(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    if len(parts) != 2:
        raise ConfigError(f"cell position needs 'bit,word', got {text!r}")
    return int(parts[0]), int(parts[1])


_DEVICE_KINDS = {"v_on": "voltage", "v_off": "voltage", "R_on": "resistance", "R_off": "resistance",
                 "k_on": "speed", "k_off": "speed", "alpha_on": int, "alpha_off": int,
                 "w_on": "length", "w_off": "length", "a_on": "length", "a_off": "length",
                 "w_c": "length"}
_GATE_KINDS = {"V_set": "voltage", "V_cond": "voltage", "V_reset": "voltage", "V_read": "voltage",
               "R_G": "resistance", "timestep": "time", "switch_on_resistance": "resistance",
               "switch_off_resistance": "resistance", "readout": str, "init_short_rg": bool,
               "initial_state": str}
_INTEGRATOR_KINDS = {"rtol": None, "atol": "length", "max_step": "time", "min_step": "time",
                     "max_steps": int, "norm": str}
_CROSSBAR_KINDS = {"rows": int, "cols": int, "line_resistance": "resistance",
                   "switch_on": "resistance", "switch_off": "resistance",
                   "placement_P": parse_cell, "placement_Q": parse_cell, "sigma": None,
                   "unselected": str, "gate_prior": str, "read_short_rg": bool,
                   "read_unselected": str}


def _convert(kind, text):
    if kind is int:
        return int(parse_quantity(text))
    if kind is bool:
        return parse_bool(text)
    if kind is str:
        return str(text).strip()
    if callable(kind):
        return kind(text)
    return parse_quantity(text, kind)


def _apply(obj, values: dict, kinds: dict, section: str):
    changes = {}
    for key, text in values.items():
        if key not in kinds:
            raise ConfigError(f"unknown key {key!r} in [{section}]; known: {', '.join(kinds)}")
        changes[key] = _convert(kinds[key], text)
    try:
        return dataclasses.replace(obj, **changes) if changes else obj
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


@dataclass
class RunConfig:
    """Everything a command needs, resolved from defaults, documents and overrides."""

    nominal: MemristorParams = field(default_factory=MemristorParams)
    params_P: MemristorParams = field(default_factory=MemristorParams)
    params_Q: MemristorParams = field(default_factory=MemristorParams)
    gate: GateConfig = field(default_factory=GateConfig)
    scheme: str = "ttl"
    sweep: VariationSpec = field(default_factory=VariationSpec)
    crossbar: CrossbarConfig = field(default_factory=CrossbarConfig)
    seed: int = 0

    def snapshot(self) -> dict:
        """Plain-data view suitable for a manifest; load_snapshot inverts it."""
        cb = dataclasses.asdict(self.crossbar)
        cb.pop("gate")
        cb.pop("nominal")
        return {
            "device": self.nominal.as_dict(),
            "device.P": self.params_P.as_dict(),
            "device.Q": self.params_Q.as_dict(),
            "gate": {k: v for k, v in dataclasses.asdict(self.gate).items() if k != "integrator"},
            "integrator": dataclasses.asdict(self.gate.integrator),
            "thresholds": {"scheme": self.scheme},
            "sweep": {"family": self.sweep.family, "levels": list(self.sweep.levels),
                      "require_p_retained": self.sweep.require_p_retained,
                      "absolute": {k: list(v) for k, v in self.sweep.absolute.items()}},
            "crossbar": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cb.items()},
            "seed": self.seed,
        }


def read_documents(paths) -> dict:
    """Merge INI documents in order; later documents override earlier ones."""
    merged: dict = {}
    for path in paths or ():
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keys are case sensitive (R_on vs r_on)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            merged.setdefault(section, {}).update(parser[section])
    return merged


_SECTIONS = ("device", "device.P", "device.Q", "gate", "integrator", "thresholds", "sweep", "crossbar")


def resolve(documents: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig: defaults, then ``documents`` (section -> key -> text), then ``overrides``.

    ``overrides`` uses the same section/key layout, e.g. {"sweep": {"family": "r"}}.
    """
    docs: dict = {}
    for source in (documents or {}, overrides or {}):
        for section, values in source.items():
            if section not in _SECTIONS and section != "seed":
                raise ConfigError(f"unknown section [{section}]; known: {', '.join(_SECTIONS)}")
            if section == "seed":
                docs["seed"] = values
                continue
            docs.setdefault(section, {}).update({k: v for k, v in values.items() if v is not None})

    nominal = _apply(MemristorParams(), docs.get("device", {}), _DEVICE_KINDS, "device")
    params_P = _apply(nominal, docs.get("device.P", {}), _DEVICE_KINDS, "device.P")
    params_Q = _apply(nominal, docs.get("device.Q", {}), _DEVICE_KINDS, "device.Q")
    integ = _apply(IntegratorSettings(), docs.get("integrator", {}), _INTEGRATOR_KINDS, "integrator")
    gate = _apply(GateConfig(integrator=integ), docs.get("gate", {}), _GATE_KINDS, "gate")

    th = dict(docs.get("thresholds", {}))
    scheme = str(th.pop("scheme", "ttl")).strip()
    if th:
        raise ConfigError(f"unknown key(s) in [thresholds]: {', '.join(th)}")
    resolve_scheme(scheme)  # validate early

    sw = dict(docs.get("sweep", {}))
    absolute = {}
    for key in [k for k in sw if k.startswith("absolute.")]:
        pid = key.split(".", 1)[1]
        lo_hi = [p for p in re.split(r"[,\s]+(?=[-+\d.])", str(sw.pop(key)).strip()) if p]
        if len(lo_hi) != 2:
            raise ConfigError(f"{key} needs 'low high'")
        kind = _DEVICE_KINDS.get(pid[:-1])
        absolute[pid] = tuple(parse_quantity(v, kind) for v in lo_hi)
    family = sw.pop("family", "v")
    levels = parse_levels(sw.pop("levels", "0.1 0.2 0.3 0.4 0.5"))
    retained = parse_bool(sw.pop("require_p_retained", False))
    if sw:
        raise ConfigError(f"unknown key(s) in [sweep]: {', '.join(sw)}")
    sweep = VariationSpec(family=family, levels=levels, scheme=scheme, absolute=absolute,
                          require_p_retained=retained)
    for pid in absolute:
        if pid not in family_parameters(sweep.family):
            raise ConfigError(f"absolute range {pid} does not belong to family {sweep.family}")

    cb = dict(docs.get("crossbar", {}))
    seed = int(cb.pop("seed", docs.get("seed", 0)))
    size = cb.pop("size", None)
    if size is not None:
        n = int(size)
        cb.setdefault("rows", n)
        cb.setdefault("cols", n)
        cb.setdefault("placement_P", (0, 0))
        cb.setdefault("placement_Q", (n - 1, n - 1))
    crossbar = _apply(CrossbarConfig(gate=gate, nominal=nominal), cb, _CROSSBAR_KINDS, "crossbar")
    if "seed" in docs:
        seed = int(docs["seed"])
    return RunConfig(nominal, params_P, params_Q, gate, scheme, sweep, crossbar, seed)


def load_snapshot(snapshot: dict) -> RunConfig:
    """Inverse of RunConfig.snapshot (used to replay a manifest)."""
    docs = {}
    for section in _SECTIONS:
        values = dict(snapshot.get(section, {}))
        if section == "sweep":
            absolute = values.pop("absolute", {})
            values["levels"] = " ".join(f"{x:+g}" for x in values.get("levels", []))
            for pid, (lo, hi) in absolute.items():
                values[f"absolute.{pid}"] = f"{lo!r} {hi!r}"
        docs[section] = {k: (v if not isinstance(v, (list, float)) else
                             (",".join(str(x) for x in v) if isinstance(v, list) else repr(v)))
                         for k, v in values.items()}
    docs["seed"] = snapshot.get("seed", 0)
    return resolve(docs)
