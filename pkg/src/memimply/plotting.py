"""SVG rendering of sweep outcomes and operating areas.

All figures are rendered with the SVG backend and fixed metadata
so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .thresholds import ConfigError  # noqa: E402

GREEN = "#2e9e44"
RED = "#d62728"
ORANGE = "#ff9f1c"
GRAY = "#555555"

_FILL = {"min": 0.0, "nominal": 0.5, "max": 1.0}
_PER_ROW = 9


def _to_svg(fig) -> str:
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "memimply", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _draw_tuple(ax, x0, y0, codes, correct, size=1.0, gap=0.15):
    """Four squares (P pair left, Q pair right) with level-dependent fill."""
    colour = GREEN if correct else RED
    for k, code in enumerate(codes):
        x = x0 + k * (size + gap) + (gap if k >= 2 else 0.0)
        frac = _FILL.get(code, 0.0)
        if frac:
            ax.add_patch(Rectangle((x, y0), size, size * frac, facecolor="#333333", edgecolor="none"))
        ax.add_patch(Rectangle((x, y0), size, size, facecolor="none", edgecolor=colour, linewidth=1.2))


def render_four_square(outcomes, delta: float | None = None, parameters=None) -> str:
    """Grid of four-square glyphs, one per tuple, grouped in blocks by Δ.

    Fill encodes the level (empty = min, half = nominal, full = max); the
    outline is green for a correct tuple and red for a failed one.
    """
    chosen = [o for o in outcomes if delta is None or math.isclose(o.delta, delta)]
    fig = plt.figure(figsize=(8, 1.0 + 0.9 * max(1, len(chosen) // _PER_ROW + 1)))
    ax = fig.add_axes([0.02, 0.02, 0.96, 0.96])
    ax.set_axis_off()
    ax.set_aspect("equal")
    if not chosen:
        ax.text(0.5, 0.5, "no outcomes", ha="center", va="center", transform=ax.transAxes)
        return _to_svg(fig)

    parameters = list(parameters or chosen[0].codes)
    cell_w, cell_h = 5.6, 1.6
    y = 0.0
    for d in sorted({o.delta for o in chosen}):
        group = [o for o in chosen if o.delta == d]
        ax.text(-0.4, y + 0.5, f"Δ = {d:.0%}", ha="right", va="center", fontsize=8)
        for i, o in enumerate(group):
            row, col = divmod(i, _PER_ROW)
            _draw_tuple(ax, col * cell_w, y - row * cell_h, [o.codes[p] for p in parameters], o.correct)
        rows = (len(group) - 1) // _PER_ROW + 1
        y -= rows * cell_h + 1.0
    ax.text(0, 1.6, "squares: " + ", ".join(parameters) + "   fill: empty=min, half=nominal, full=max",
            fontsize=7, va="bottom")
    ax.set_xlim(-3.5, _PER_ROW * cell_w)
    ax.set_ylim(y + 0.5, 2.4)
    return _to_svg(fig)


# -- operating areas -----------------------------------------------------------


def result_bar(outcomes, parameter: str):
    """Verdicts along one parameter with every other varied parameter nominal.

    Returns (values, colours, segments) where segments are (lo, hi, colour):
    adjacent simulated values with equal verdicts are joined in that colour,
    differing neighbours leave an orange (not simulated) gap.
    """
    pts = {}
    for o in outcomes:
        if parameter not in o.codes:
            continue
        if any(code != "nominal" for pid, code in o.codes.items() if pid != parameter):
            continue
        v = o.values[parameter]
        pts[v] = pts.get(v, True) and o.correct
    values = sorted(pts)
    colours = [GREEN if pts[v] else RED for v in values]
    segments = []
    for (a, ca), (b, cb) in zip(zip(values, colours), zip(values[1:], colours[1:])):
        segments.append((a, b, ca if ca == cb else ORANGE))
    return values, colours, segments


_LABELS = {"R": ("Ω", 1.0), "v": ("V", 1.0), "k": ("nm/s", 1.0)}


def render_operating_area(area, outcomes=None) -> str:
    """Constraint curves, admissible shading and optional simulation bars."""
    if outcomes:
        known = set()
        for o in outcomes:
            known.update(o.codes)
        if area.x_param not in known and area.y_param not in known:
            raise ConfigError(f"overlay outcomes vary none of the area axes "
                              f"({area.x_param}, {area.y_param})")

    fig, ax = plt.subplots(figsize=(7, 5.5))
    ax.contourf(area.x, area.y, area.mask.astype(float), levels=[0.5, 1.5], colors=["#9ecae1"], alpha=0.6)
    if area.invalid.any():
        ax.contourf(area.x, area.y, area.invalid.astype(float), levels=[0.5, 1.5], colors=["#dddddd"],
                    hatches=["//"], alpha=0.5)
    cmap = plt.get_cmap("tab10")
    ids = sorted({cid for cid, _ in area.polylines})
    for cid, line in area.polylines:
        ax.plot(line[:, 0], line[:, 1], color=cmap(ids.index(cid) % 10), linewidth=1.4,
                label=cid if cid not in ax.get_legend_handles_labels()[1] else None)
    if math.isfinite(area.x_nominal):
        ax.axvline(area.x_nominal, color=GRAY, linestyle="--", linewidth=0.9)
    if math.isfinite(area.y_nominal):
        ax.axhline(area.y_nominal, color=GRAY, linestyle="--", linewidth=0.9)
    for axis, pid in (("y", area.y_param), ("x", area.x_param)):
        if pid.startswith("R_") and area.thresholds:
            for name in ("R_IL", "R_IH"):
                val = area.thresholds[name]
                line = ax.axhline if axis == "y" else ax.axvline
                line(val, color="black", linestyle=":", linewidth=0.8)
    if outcomes:
        _draw_bars(ax, area, outcomes)
    ax.set_xlabel(f"{area.x_param} [{_LABELS[area.x_param[0]][0]}]")
    ax.set_ylabel(f"{area.y_param} [{_LABELS[area.y_param[0]][0]}]")
    ax.set_xlim(area.x[0], area.x[-1])
    ax.set_ylim(area.y[0], area.y[-1])
    ax.set_title(f"operating area, {area.scheme} thresholds", fontsize=10)
    if ids:
        ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    return _to_svg(fig)


def _draw_bars(ax, area, outcomes):
    for axis, pid in (("x", area.x_param), ("y", area.y_param)):
        values, colours, segments = result_bar(outcomes, pid)
        if not values:
            continue
        if axis == "x":
            pos = area.y[0] + 0.02 * (area.y[-1] - area.y[0])
            for a, b, c in segments:
                ax.plot([a, b], [pos, pos], color=c, linewidth=5, solid_capstyle="butt")
            ax.scatter(values, [pos] * len(values), c=colours, s=18, zorder=3)
        else:
            pos = area.x[0] + 0.02 * (area.x[-1] - area.x[0])
            for a, b, c in segments:
                ax.plot([pos, pos], [a, b], color=c, linewidth=5, solid_capstyle="butt")
            ax.scatter([pos] * len(values), values, c=colours, s=18, zorder=3)


def render_histogram(counts, edges, title: str = "initial states") -> str:
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(edges[:-1], counts, width=edges[1] - edges[0], align="edge", color="#4c72b0")
    ax.set_xlabel("s")
    ax.set_ylabel("n per bin")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return _to_svg(fig)
