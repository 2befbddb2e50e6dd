"""Command-line front end.

Every command writes its outputs under ``--out`` together with a
``manifest.json`` holding the resolved configuration and a sha256 digest per
output file; ``memimply replay manifest.json`` re-runs the command from it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field

from . import __version__
from .config import RunConfig, load_snapshot, parse_cell, read_documents, resolve
from .constraints import full_report, operating_area, parse_parameter_id, rg_bounds
from .crossbar import (
    histogram_csv,
    init_states,
    run_crossbar_sweep,
    standard_placements,
    state_histogram,
)
from .device import MemristorParams, switching_time
from .gate import check_operating_voltages
from .integrator import IntegrationError
from .plotting import render_four_square, render_histogram, render_operating_area
from .sweep import SweepOutcome, default_jobs, family_parameters, outcomes_csv, run_sweep, summary_json
from .thresholds import ConfigError, resolve_scheme

LONG_RUN_SIZE = 32  # arrays larger than this need --long-run


@dataclass
class RunManifest:
    command: str
    options: dict
    config: dict
    seed: int
    version: str = __version__
    outputs: dict = field(default_factory=dict)  # file name -> sha256

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class _Writer:
    """Writes outputs into one directory and remembers their digests."""

    def __init__(self, out: str):
        self.out = out
        os.makedirs(out, exist_ok=True)
        self.digests: dict = {}

    def text(self, name: str, content: str):
        data = content.encode("utf-8")
        with open(os.path.join(self.out, name), "wb") as fh:
            fh.write(data)
        self.digests[name] = hashlib.sha256(data).hexdigest()

    def manifest(self, command: str, options: dict, cfg: RunConfig):
        m = RunManifest(command, options, cfg.snapshot(), cfg.seed, outputs=dict(sorted(self.digests.items())))
        with open(os.path.join(self.out, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(m.to_json())
        return m


def _delta_tag(d: float) -> str:
    return f"{d:g}"


def _parse_area(text: str) -> tuple[str, str]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"--area expects X:Y, got {text!r}")
    for p in parts:
        parse_parameter_id(p)
    return parts[0], parts[1]


def _axis_range(pid: str, params_P: MemristorParams, params_Q: MemristorParams, span: float):
    name, dev = parse_parameter_id(pid)
    nominal = getattr(params_P if dev == "P" else params_Q, name)
    lo, hi = sorted((nominal * (1 - span), nominal * (1 + span)))
    return lo, hi


def _area_svg(cfg: RunConfig, spec: str, span: float, grid: int, outcomes=None):
    x, y = _parse_area(spec)
    area = operating_area(x, _axis_range(x, cfg.params_P, cfg.params_Q, span),
                          y, _axis_range(y, cfg.params_P, cfg.params_Q, span),
                          cfg.params_P, cfg.params_Q, cfg.gate, resolve_scheme(cfg.scheme),
                          n=grid, reference=cfg.nominal)
    return f"area_{x}_{y}", area, render_operating_area(area, outcomes)


# -- commands -----------------------------------------------------------------------


def cmd_constraints(cfg: RunConfig, opts: dict, w: _Writer):
    check_operating_voltages(cfg.gate, cfg.params_P, cfg.params_Q)
    scheme = resolve_scheme(cfg.scheme)
    report = full_report(cfg.params_P, cfg.params_Q, cfg.gate, scheme, cfg.nominal)
    w.text("constraints.csv", report.to_csv())
    doc = json.loads(report.to_json())
    doc = {"scheme": scheme.as_dict(), "constraints": doc, "rg_bounds": rg_bounds(cfg.nominal, cfg.gate).as_dict()}
    w.text("constraints.json", json.dumps(doc, indent=2))
    for spec in opts.get("area") or []:
        name, area, svg = _area_svg(cfg, spec, opts["span"], opts["grid"])
        w.text(name + ".svg", svg)
        w.text(name + ".json", area.to_json())
    dyn = report.get("dyn_vonQ")
    print(f"{len(report)} constraints, all satisfied: {report.all_satisfied}; "
          f"dynamic v_onQ bound {dyn.bound:.6g} V")


def _emit_four_squares(w: _Writer, family: str, outcomes):
    for d in sorted({o.delta for o in outcomes}):
        w.text(f"four_square_{family}_{_delta_tag(d)}.svg",
               render_four_square(outcomes, d, family_parameters(family)))


def cmd_sweep_gate(cfg: RunConfig, opts: dict, w: _Writer):
    check_operating_voltages(cfg.gate, cfg.nominal)
    spec = cfg.sweep
    outcomes = run_sweep(spec, cfg.nominal, cfg.gate, jobs=opts["jobs"], reference=cfg.nominal)
    w.text("outcomes.csv", outcomes_csv(outcomes))
    w.text("summary.json", summary_json(spec, outcomes))
    _emit_four_squares(w, spec.family, outcomes)
    for area in opts.get("area") or []:
        name, _, svg = _area_svg(cfg, area, opts["span"], opts["grid"], outcomes)
        w.text(name + ".svg", svg)
    failed = sum(not o.correct for o in outcomes)
    print(f"{len(outcomes)} tuples, {failed} failed")


def _placements(text: str | None, n: int):
    if not text or text == "standard":
        return standard_placements(n)
    out = []
    for item in text.split(";"):
        P, Q = item.split(":")
        out.append((parse_cell(P), parse_cell(Q)))
    return out


def cmd_sweep_crossbar(cfg: RunConfig, opts: dict, w: _Writer):
    xb = cfg.crossbar
    if max(xb.rows, xb.cols) > LONG_RUN_SIZE and not opts.get("long_run"):
        raise ConfigError(f"arrays above {LONG_RUN_SIZE}x{LONG_RUN_SIZE} take hours; pass --long-run")
    check_operating_voltages(cfg.gate, cfg.nominal)
    spec = cfg.sweep
    placements = _placements(opts.get("placements"), xb.rows)
    result = run_crossbar_sweep(spec, xb, placements, seed=cfg.seed, jobs=opts["jobs"], reference=cfg.nominal)
    per = {}
    for label in result.placements:
        outs = result.per_placement[label]
        w.text(f"outcomes_{label}.csv", outcomes_csv(outs))
        per[label] = {"tuples": len(outs), "failed": sum(not o.correct for o in outs),
                      "max_unselected_ds": max((o.extra.get("max_unselected_ds", 0.0) for o in outs), default=0.0),
                      "max_kcl_residual": max((o.extra.get("max_kcl_residual", 0.0) for o in outs), default=0.0)}
    w.text("outcomes_combined.csv", outcomes_csv(result.combined))
    w.text("summary.json", summary_json(spec, result.combined, {"placements": per,
                                                                "size": [xb.cols, xb.rows], "seed": cfg.seed}))
    _emit_four_squares(w, spec.family, result.combined)
    s0 = init_states(xb, cfg.seed)
    w.text("initial_states_histogram.csv", histogram_csv(s0))
    counts, edges = state_histogram(s0)
    w.text("initial_states_histogram.svg", render_histogram(counts, edges))
    failed = sum(not o.correct for o in result.combined)
    print(f"{len(result.combined)} tuples x {len(placements)} placements, {failed} failed in the worst case")


def read_outcomes_csv(path: str) -> list[SweepOutcome]:
    """Rebuild outcomes (without per-case detail) from an outcomes CSV."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pids = [k[: -len("_level")] for k in row if k.endswith("_level")]
            out.append(SweepOutcome(int(row["index"]), float(row["delta"]),
                                    {p: float(row[p]) for p in pids}, {p: row[p + "_level"] for p in pids},
                                    [], row["verdict"] == "correct", row.get("stage") or None))
    return out


def cmd_plot(cfg: RunConfig, opts: dict, w: _Writer):
    outcomes = read_outcomes_csv(opts["outcomes"])
    if not outcomes:
        raise ConfigError(f"{opts['outcomes']} holds no outcomes")
    pids = list(outcomes[0].codes)
    family = {"R": "r", "v": "v", "k": "k"}[pids[0][0]]
    _emit_four_squares(w, family, outcomes)
    for area in opts.get("area") or []:
        name, _, svg = _area_svg(cfg, area, opts["span"], opts["grid"], outcomes)
        w.text(name + ".svg", svg)
    print(f"rendered {len(w.digests)} figure(s) from {len(outcomes)} outcomes")


def cmd_calibrate(cfg: RunConfig, opts: dict, w: _Writer):
    drive = opts.get("drive")
    device_v = cfg.gate.V_set if drive is None else drive
    model_v = -device_v  # positive device voltage sets; the model sees the opposite sign
    p = cfg.nominal
    rising = model_v < 0
    start, end = (0.01, 0.99) if rising else (0.99, 0.01)
    if p.v_on <= model_v <= p.v_off:
        t, status = None, "no switching"
    else:
        t = switching_time(p, model_v, start, end, settings=cfg.gate.integrator, t_max=opts["t_max"])
        status = "switches" if t is not None else "no switching"
    doc = {"device_voltage_V": device_v, "direction": "set" if rising else "reset",
           "from_s": start, "to_s": end, "switching_time_s": t, "timestep_s": cfg.gate.timestep,
           "ratio_to_timestep": (t / cfg.gate.timestep) if t is not None else None, "status": status}
    w.text("calibration.json", json.dumps(doc, indent=2))
    if t is None:
        print(f"{device_v:g} V: no switching within {opts['t_max']:g} s")
    else:
        print(f"{device_v:g} V: s {start:g} -> {end:g} in {t * 1e6:.4g} us "
              f"({t / cfg.gate.timestep:.3g} x the {cfg.gate.timestep * 1e6:g} us timestep)")


COMMANDS = {"constraints": cmd_constraints, "sweep-gate": cmd_sweep_gate,
            "sweep-crossbar": cmd_sweep_crossbar, "plot": cmd_plot, "calibrate": cmd_calibrate}


# -- argument handling ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memimply", description="Memristive IMPLY gate variability analysis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, sweep=False, area=False):
        p.add_argument("--config", action="append", default=[], metavar="FILE",
                       help="INI document; repeat to merge several (later wins)")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--scheme", help="threshold scheme: ttl, 1/2, 1/3 or four numbers")
        if sweep:
            p.add_argument("--family", help="parameter family: r, v or k")
            p.add_argument("--levels", help="deviations, e.g. '10%%,20%%' (each mirrored to +/-)")
            p.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes")
            p.add_argument("--require-p-retained", action="store_true", default=None,
                           help="also require P to keep its input value after the operation")
        if area:
            p.add_argument("--area", action="append", metavar="X:Y",
                           help="operating area for two parameter ids, e.g. R_offP:v_onQ")
            p.add_argument("--span", type=float, default=0.6, help="area axis span around nominal (fraction)")
            p.add_argument("--grid", type=int, default=81, help="area grid points per axis")

    common(sub.add_parser("constraints", help="static and dynamic constraint report"), area=True)
    common(sub.add_parser("sweep-gate", help="single-gate variation sweep"), sweep=True, area=True)
    p = sub.add_parser("sweep-crossbar", help="crossbar variation sweep over gate placements")
    common(p, sweep=True)
    p.add_argument("--size", type=int, help="array size N (N x N)")
    p.add_argument("--placements", help="'standard' or 'b,w:b,w;...' (P:Q pairs)")
    p.add_argument("--seed", type=int, help="seed of the initial state field")
    p.add_argument("--sigma", type=float, help="spread of the half-Gaussian initial states")
    p.add_argument("--unselected", choices=["floating", "grounded"], help="policy for unselected lines")
    p.add_argument("--line-resistance", help="line resistance per cell segment, e.g. '10 Ohm'")
    p.add_argument("--long-run", action="store_true", help=f"allow arrays above {LONG_RUN_SIZE}x{LONG_RUN_SIZE}")
    p = sub.add_parser("plot", help="re-render figures from an outcomes CSV")
    common(p, area=True)
    p.add_argument("outcomes", help="outcomes CSV written by a sweep")
    p = sub.add_parser("calibrate", help="switching time under constant drive")
    common(p)
    p.add_argument("--drive", type=float, help="device voltage in V (default: V_set)")
    p.add_argument("--t-max", type=float, default=1e-3, help="give up after this many seconds")
    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output directory (default: next to the manifest)")
    return ap


def _overrides(args) -> dict:
    ov: dict = {"thresholds": {}, "sweep": {}, "crossbar": {}}
    if getattr(args, "scheme", None):
        ov["thresholds"]["scheme"] = args.scheme
    for key in ("family", "levels"):
        if getattr(args, key, None):
            ov["sweep"][key] = getattr(args, key)
    if getattr(args, "require_p_retained", None):
        ov["sweep"]["require_p_retained"] = "true"
    if getattr(args, "size", None):
        ov["crossbar"]["size"] = args.size
    for key in ("sigma", "unselected", "line_resistance"):
        if getattr(args, key, None) is not None:
            ov["crossbar"][key] = getattr(args, key)
    if getattr(args, "seed", None) is not None:
        ov["seed"] = args.seed
    return ov


def _options(args) -> dict:
    skip = {"config", "out", "command", "scheme", "family", "levels", "require_p_retained", "size",
            "sigma", "unselected", "line_resistance", "seed"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def run(command: str, cfg: RunConfig, opts: dict, out: str) -> RunManifest:
    w = _Writer(out)
    COMMANDS[command](cfg, opts, w)
    return w.manifest(command, opts, cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            with open(args.manifest, encoding="utf-8") as fh:
                m = json.load(fh)
            out = args.out or os.path.dirname(os.path.abspath(args.manifest))
            cfg = load_snapshot(m["config"])
            manifest = run(m["command"], cfg, m["options"], out)
            same = manifest.outputs == m["outputs"]
            print("digests match the manifest" if same else "digests differ from the manifest")
            return 0
        cfg = resolve(read_documents(args.config), _overrides(args))
        run(args.command, cfg, _options(args), args.out)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

