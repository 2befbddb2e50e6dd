"""1T1R crossbar: transient simulation of an IMPLY gate mapped onto an N x N array.

Every cell is a memristor in series with an access switch. The memristor's
top terminal sits on the cell's bit-line junction, the switch connects the
internal node to the cell's word-line junction. Each cell owns one line
segment per direction, connecting its junction to the previous one (or to
the line's terminal node for the first cell). Bit lines are driven from both
ends; word lines return to a common node G at both ends, and G reaches
ground through R_G (with a switch that can short it).

The quasi-static network is solved by modified nodal analysis: ordinary
branches are stamped as conductances, branches below ``SMALL_R`` (closed
switches, ideal wires) get an explicit current unknown so that a 1 µΩ switch
next to a 100 MΩ one does not wreck the conditioning. Within one pulse the
topology is fixed and only memristor conductances change, so the matrix is
factorized once and the few moving cells are folded in with a low-rank
(Woodbury) update.
"""

from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .device import DeviceArray, MemristorParams
from .gate import CaseOutcome, GateConfig, TRUTH_TABLE, judge_case, prior_state, s_reading
from .integrator import integrate
from .sweep import SweepOutcome, VariationSpec, _outcome, generate_grid
from .thresholds import ConfigError, ThresholdScheme

SMALL_R = 1e-3  # ohms; below this a branch gets its own current unknown
MAX_RANK = 32  # moving cells folded in by low-rank update before refactorizing


class TopologyError(RuntimeError):
    """The nodal system is singular; ``node`` names a node without a path to a fixed potential."""

    def __init__(self, message: str, node: str | None = None):
        super().__init__(message)
        self.node = node


@dataclass(frozen=True)
class CrossbarConfig:
    rows: int = 16  # word lines
    cols: int = 16  # bit lines
    line_resistance: float = 10.0
    switch_on: float = 1e-6
    switch_off: float = 1e8
    placement_P: tuple = (0, 0)  # (bit index, word index)
    placement_Q: tuple = (15, 15)
    sigma: float = 0.15  # half-Gaussian spread of initial states
    unselected: str = "floating"  # or "grounded"
    # pre-write state of the gate cells: "hrs", "complement" or "drawn" from the initial field
    gate_prior: str = "hrs"
    # close the R_G switch while reading so sneak current through R_G cannot shift G
    read_short_rg: bool = True
    # unselected-line policy while reading; floating lines let sneak current reach the sense line
    read_unselected: str = "grounded"
    gate: GateConfig = field(default_factory=GateConfig)
    nominal: MemristorParams = field(default_factory=MemristorParams)

    def __post_init__(self):
        object.__setattr__(self, "placement_P", tuple(int(v) for v in self.placement_P))
        object.__setattr__(self, "placement_Q", tuple(int(v) for v in self.placement_Q))
        if self.rows < 1 or self.cols < 2:
            raise ConfigError("crossbar needs at least one word line and two bit lines")
        for name in ("placement_P", "placement_Q"):
            b, w = getattr(self, name)
            if not (0 <= b < self.cols and 0 <= w < self.rows):
                raise ConfigError(f"{name} {(b, w)} outside a {self.cols}x{self.rows} array")
        if self.placement_P == self.placement_Q:
            raise ConfigError("P and Q must occupy distinct cells")
        if self.placement_P[0] == self.placement_Q[0]:
            raise ConfigError("P and Q must sit on distinct bit lines (they are driven with different voltages)")
        if self.line_resistance < 0:
            raise ConfigError("line_resistance must be >= 0")
        if self.switch_on <= 0 or self.switch_off <= 0:
            # a zero-ohm switch closes a loop of ideal branches with an undetermined current
            raise ConfigError("switch resistances must be positive")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        for name in ("unselected", "read_unselected"):
            if getattr(self, name) not in ("floating", "grounded"):
                raise ConfigError(f"{name} must be 'floating' or 'grounded', not {getattr(self, name)!r}")
        if self.gate_prior not in ("hrs", "complement", "drawn"):
            raise ConfigError(f"unknown gate prior {self.gate_prior!r}")

    @classmethod
    def square(cls, n: int, **kw) -> "CrossbarConfig":
        """n x n array with P in the top-left and Q in the bottom-right corner by default."""
        kw.setdefault("placement_P", (0, 0))
        kw.setdefault("placement_Q", (n - 1, n - 1))
        return cls(rows=n, cols=n, **kw)

    def with_changes(self, **changes) -> "CrossbarConfig":
        return replace(self, **changes)

    def cell_index(self, cell) -> int:
        b, w = cell
        return b * self.rows + w


def standard_placements(n: int) -> list[tuple[tuple, tuple]]:
    """Corner-to-corner and corner-to-centre placements, each with P and Q swapped.

    Arrays too small to have a centre distinct from the corner get only the
    corner-to-corner pair.
    """
    c = (n - 1) // 2
    out = [((0, 0), (n - 1, n - 1)), ((n - 1, n - 1), (0, 0))]
    if c > 0:
        out += [((0, 0), (c, c)), ((c, c), (0, 0))]
    return out


def placement_label(P, Q) -> str:
    return f"P{P[0]}-{P[1]}_Q{Q[0]}-{Q[1]}"


# -- network -------------------------------------------------------------------


@dataclass(frozen=True)
class Network:
    rows: int
    cols: int
    bl: np.ndarray  # (cols, rows) bit-line junction node ids
    wl: np.ndarray  # (cols, rows) word-line junction node ids
    x: np.ndarray  # (cols, rows) internal node ids (memristor/switch)
    bt: np.ndarray  # (cols,) bit-line top terminals
    wt: np.ndarray  # (rows,) word-line left terminals
    g: int  # common return node above R_G
    bit_segments: np.ndarray  # (cells, 2) node pairs, one per cell
    word_segments: np.ndarray  # (cells, 2)

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    @property
    def n_nodes(self) -> int:
        return self.g + 1

    def counts(self) -> dict:
        return {"cells": self.n_cells, "internal_nodes": self.x.size,
                "junction_nodes": self.bl.size + self.wl.size,
                "terminal_nodes": self.bt.size + self.wt.size,
                "bit_line_resistors": len(self.bit_segments),
                "word_line_resistors": len(self.word_segments),
                "nodes": self.n_nodes}

    def node_name(self, i: int) -> str:
        n = self.n_cells
        if i < n:
            return f"BL[{i // self.rows},{i % self.rows}]"
        if i < 2 * n:
            j = i - n
            return f"WL[{j % self.cols},{j // self.cols}]"
        if i < 3 * n:
            j = i - 2 * n
            return f"X[{j // self.rows},{j % self.rows}]"
        j = i - 3 * n
        if j < self.cols:
            return f"BT[{j}]"
        if j < self.cols + self.rows:
            return f"WT[{j - self.cols}]"
        return "G"


def build_network(config: CrossbarConfig) -> Network:
    R, C = config.rows, config.cols
    n = R * C
    b_idx, w_idx = np.meshgrid(np.arange(C), np.arange(R), indexing="ij")
    bl = b_idx * R + w_idx
    wl = n + w_idx * C + b_idx
    x = 2 * n + b_idx * R + w_idx
    bt = 3 * n + np.arange(C)
    wt = 3 * n + C + np.arange(R)
    g = 3 * n + C + R
    prev_bl = np.where(w_idx == 0, bt[:, None], np.roll(bl, 1, axis=1))
    prev_wl = np.where(b_idx == 0, wt[None, :], np.roll(wl, 1, axis=0))
    bit_segments = np.stack([prev_bl.ravel(), bl.ravel()], axis=1)
    word_segments = np.stack([prev_wl.ravel(), wl.ravel()], axis=1)
    return Network(R, C, bl, wl, x, bt, wt, g, bit_segments, word_segments)


@dataclass(frozen=True)
class CrossbarDrive:
    """Switch and driver settings for one pulse."""

    selected: tuple  # cells (bit, word) whose access switch is on
    bit_voltages: tuple  # ((bit line, V), ...) driven from both ends
    word_returns: tuple  # word lines tied to G at both ends
    short_rg: bool = False
    unselected: str | None = None  # overrides the config policy for this pulse


@dataclass
class CellState:
    w: float
    switch_on: bool


def imply_drive(config: CrossbarConfig) -> CrossbarDrive:
    P, Q = config.placement_P, config.placement_Q
    returns = tuple(sorted({P[1], Q[1]}))
    return CrossbarDrive((P, Q), ((P[0], config.gate.V_cond), (Q[0], config.gate.V_set)), returns, False)


def single_cell_drive(cell, V: float, short_rg: bool, unselected: str | None = None) -> CrossbarDrive:
    return CrossbarDrive((tuple(cell),), ((cell[0], V),), (cell[1],), short_rg, unselected)


def _elements(net: Network, drive: CrossbarDrive, config: CrossbarConfig):
    """Static branches as arrays (a, b, r, V); b = -1 means a fixed potential V."""
    on, off = config.switch_on, config.switch_off
    grounded = (drive.unselected or config.unselected) == "grounded"
    a_l, b_l, r_l, v_l = [], [], [], []

    def add(a, b, r, v=0.0):
        a = np.atleast_1d(a)
        a_l.append(a)
        b_l.append(np.broadcast_to(np.asarray(b), a.shape))
        r_l.append(np.broadcast_to(np.asarray(r, dtype=float), a.shape))
        v_l.append(np.broadcast_to(np.asarray(v, dtype=float), a.shape))

    sw = np.full((net.cols, net.rows), off)
    for b, w in drive.selected:
        sw[b, w] = on
    add(net.x.ravel(), net.wl.ravel(), sw.ravel())
    add(net.bit_segments[:, 0], net.bit_segments[:, 1], config.line_resistance)
    add(net.word_segments[:, 0], net.word_segments[:, 1], config.line_resistance)

    driven = dict(drive.bit_voltages)
    for b in range(net.cols):
        ends = [net.bt[b], net.bl[b, net.rows - 1]]
        if b in driven:
            add(ends, -1, on, driven[b])
        else:
            add(ends, -1, on if grounded else off, 0.0)
    returns = set(drive.word_returns)
    for w in range(net.rows):
        ends = [net.wt[w], net.wl[net.cols - 1, w]]
        if w in returns:
            add(ends, net.g, on)
        elif grounded:
            add(ends, -1, on, 0.0)
        else:
            add(ends, net.g, off)
    add(net.g, -1, config.gate.R_G)
    add(net.g, -1, on if drive.short_rg else off)
    return (np.concatenate(a_l).astype(int), np.concatenate(b_l).astype(int),
            np.concatenate(r_l), np.concatenate(v_l))


class NetworkSolver:
    """Nodal solve for one drive topology with changing memristor conductances."""

    def __init__(self, net: Network, drive: CrossbarDrive, config: CrossbarConfig, g_mem):
        self.net = net
        self.drive = drive
        a, b, r, v = _elements(net, drive, config)
        self.elements = (a, b, r, v)
        n = net.n_nodes
        small = r < SMALL_R
        k = np.flatnonzero(small)
        self.n_nodes = n
        self.n_unknowns = n + k.size
        self._small = small

        rows, cols, vals = [], [], []
        rhs = np.zeros(self.n_unknowns)
        # conductances
        big = ~small
        ga, gb, gg, gv = a[big], b[big], 1.0 / r[big], v[big]
        inner = gb >= 0
        rows += [ga, gb[inner], ga[inner], gb[inner]]
        cols += [ga, gb[inner], gb[inner], ga[inner]]
        vals += [gg, gg[inner], -gg[inner], -gg[inner]]
        np.add.at(rhs, ga[~inner], gg[~inner] * gv[~inner])
        # explicit branch currents, flowing a -> b
        br = n + np.arange(k.size)
        sa, sb, sr, sv = a[k], b[k], r[k], v[k]
        inner = sb >= 0
        rows += [sa, br, sb[inner], br[inner], br]
        cols += [br, sa, br[inner], sb[inner], br]
        vals += [np.ones(k.size), np.ones(k.size), -np.ones(inner.sum()), -np.ones(inner.sum()), -sr]
        rhs[br[~inner]] = sv[~inner]
        self._static = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                     shape=(self.n_unknowns,) * 2).tocsr()
        self.rhs = rhs
        self._mem_a = net.bl.ravel()
        self._mem_b = net.x.ravel()
        self._src_branch = br[~inner]
        self._src_cond = (ga[gb < 0], gg[gb < 0], gv[gb < 0])
        self.refactor(g_mem)

    def _matrix(self, g_mem):
        a, b = self._mem_a, self._mem_b
        mem = sp.coo_matrix((np.concatenate([g_mem, g_mem, -g_mem, -g_mem]),
                             (np.concatenate([a, b, a, b]), np.concatenate([a, b, b, a]))),
                            shape=(self.n_unknowns,) * 2)
        return (self._static + mem).tocsc()

    def refactor(self, g_mem):
        g_mem = np.asarray(g_mem, dtype=float)
        try:
            self._lu = splu(self._matrix(g_mem), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            node = self.floating_node(g_mem)
            raise TopologyError(f"singular nodal system ({exc}); floating node: {node}", node) from None
        self._g0 = g_mem.copy()
        self._x0 = self._lu.solve(self.rhs)
        self._z: dict = {}
        self.factorizations = getattr(self, "factorizations", 0) + 1

    def floating_node(self, g_mem) -> str | None:
        """First node with no conductive path to a fixed potential."""
        a, b, r, _ = self.elements
        ground = self.n_nodes
        conductive = np.isfinite(r)
        ea = np.concatenate([a[conductive], self._mem_a[g_mem > 0]])
        eb = np.concatenate([np.where(b[conductive] < 0, ground, b[conductive]), self._mem_b[g_mem > 0]])
        graph = sp.coo_matrix((np.ones(ea.size), (ea, eb)), shape=(ground + 1, ground + 1))
        _, labels = connected_components(graph, directed=False)
        loose = np.flatnonzero(labels[:ground] != labels[ground])
        return self.net.node_name(int(loose[0])) if loose.size else None

    def _column(self, i: int):
        col = self._z.get(i)
        if col is None:
            u = np.zeros(self.n_unknowns)
            u[self._mem_a[i]] = 1.0
            u[self._mem_b[i]] = -1.0
            col = self._z[i] = self._lu.solve(u)
        return col

    def solve(self, g_mem) -> np.ndarray:
        """Unknown vector (node voltages, then branch currents) for memristor conductances g_mem."""
        d = g_mem - self._g0
        moved = np.flatnonzero(d)
        if moved.size == 0:
            return self._x0
        if moved.size > MAX_RANK:
            self.refactor(g_mem)
            return self._x0
        Z = np.column_stack([self._column(i) for i in moved])
        a, b = self._mem_a[moved], self._mem_b[moved]
        dm = d[moved]
        M = np.eye(moved.size) + dm[:, None] * (Z[a] - Z[b])
        y = np.linalg.solve(M, dm * (self._x0[a] - self._x0[b]))
        return self._x0 - Z @ y

    def device_voltages(self, x) -> np.ndarray:
        """Memristor voltages top-minus-bottom, one per cell."""
        return x[self._mem_a] - x[self._mem_b]

    def driven_current(self, x) -> float:
        """Total current magnitude delivered by all fixed-potential connections."""
        ga, gg, gv = self._src_cond
        return float(np.abs(x[self._src_branch]).sum() + np.abs(gg * (gv - x[ga])).sum())

    def kcl_residual(self, x, g_mem) -> float:
        """Largest node-equation residual relative to the total driven current."""
        res = self._matrix(g_mem) @ x - self.rhs
        scale = self.driven_current(x)
        worst = float(np.abs(res[: self.n_nodes]).max())
        return worst / scale if scale > 0 else worst


def solve_network(net: Network, resistances, drive: CrossbarDrive, config: CrossbarConfig):
    """Node voltages (one per network node) for given cell resistances."""
    solver = NetworkSolver(net, drive, config, 1.0 / np.asarray(resistances, dtype=float).ravel())
    return solver.solve(solver._g0)[: net.n_nodes]


# -- initial states -------------------------------------------------------------


def init_states(config: CrossbarConfig, seed: int) -> np.ndarray:
    """Normalized state per cell, shape (cols, rows): |N(0, sigma)| clamped to [0, 1]."""
    rng = np.random.default_rng(seed)
    s = np.abs(rng.normal(0.0, config.sigma, size=(config.cols, config.rows)))
    return np.clip(s, 0.0, 1.0)


def state_histogram(s, bins: int = 100):
    counts, edges = np.histogram(np.ravel(s), bins=bins, range=(0.0, 1.0))
    return counts, edges


def histogram_csv(s, bins: int = 100) -> str:
    counts, edges = state_histogram(s, bins)
    lines = ["bin_low,bin_high,count"]
    lines += [f"{lo:.2f},{hi:.2f},{c}" for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return "\n".join(lines) + "\n"


# -- transient simulation -----------------------------------------------------------


class CrossbarSim:
    """State field plus the pulses that act on it."""

    def __init__(self, config: CrossbarConfig, params_P=None, params_Q=None, s0=None):
        self.config = config
        self.net = build_network(config)
        params = [config.nominal] * self.net.n_cells
        self.iP = config.cell_index(config.placement_P)
        self.iQ = config.cell_index(config.placement_Q)
        params[self.iP] = params_P or config.nominal
        params[self.iQ] = params_Q or config.nominal
        self.devices = DeviceArray(params)
        s0 = np.zeros(self.net.n_cells) if s0 is None else np.asarray(s0, dtype=float).ravel()
        self.w = self.devices.w_off + s0 * (self.devices.w_on - self.devices.w_off)
        self.settings = replace(config.gate.integrator, norm="max")
        self.max_residual = 0.0
        self.switch_on = np.zeros(self.net.n_cells, dtype=bool)

    @property
    def s(self) -> np.ndarray:
        return self.devices.s(self.w)

    def cell_states(self) -> list[CellState]:
        return [CellState(float(w), bool(on)) for w, on in zip(self.w, self.switch_on)]

    def _track(self, solver, w):
        g = 1.0 / self.devices.resistance(w)
        x = solver.solve(g)
        self.max_residual = max(self.max_residual, solver.kcl_residual(x, g))
        return x

    def pulse(self, drive: CrossbarDrive, duration: float | None = None) -> NetworkSolver:
        duration = self.config.gate.timestep if duration is None else duration
        self.switch_on[:] = False
        for cell in drive.selected:
            self.switch_on[self.config.cell_index(cell)] = True
        solver = NetworkSolver(self.net, drive, self.config, 1.0 / self.devices.resistance(self.w))
        self._track(solver, self.w)
        devices = self.devices

        def rhs(t, w):
            v = solver.device_voltages(solver.solve(1.0 / devices.resistance(w)))
            return devices.rate(w, -v)

        res = integrate(rhs, self.w, duration, lower=devices.w_off, upper=devices.w_on, settings=self.settings)
        self.w = np.asarray(res.y, dtype=float)
        self._track(solver, self.w)
        self.switch_on[:] = False
        return solver

    def write(self, which: str, bit: int):
        cfg = self.config
        cell = cfg.placement_P if which == "P" else cfg.placement_Q
        V = cfg.gate.V_set if bit else cfg.gate.V_reset
        self.pulse(single_cell_drive(cell, V, cfg.gate.init_short_rg))

    def imply(self):
        self.pulse(imply_drive(self.config))

    def series_resistance(self, cell, short_rg: bool) -> float:
        """Known path resistance between the read source and ground, excluding the memristor."""
        cfg = self.config
        b, w = cell
        r, on = cfg.line_resistance, cfg.switch_on

        def par(x, y):
            return x * y / (x + y) if x + y > 0 else 0.0

        bit_path = par(on + (w + 1) * r, on + (cfg.rows - 1 - w) * r)
        word_path = par(on + (b + 1) * r, on + (cfg.cols - 1 - b) * r)
        return bit_path + on + word_path + (on if short_rg else cfg.gate.R_G)

    def read(self, which: str) -> float:
        """Single-cell readout; returns the line-compensated resistance.

        The sensed current is the one flowing through the selected word
        line's own return switches, so sneak current that reaches G through
        unselected word lines is not mistaken for cell current.
        """
        cfg = self.config
        cell = cfg.placement_P if which == "P" else cfg.placement_Q
        short = cfg.read_short_rg
        solver = self.pulse(single_cell_drive(cell, cfg.gate.V_read, short, cfg.read_unselected))
        x = self._track(solver, self.w)
        ends = (self.net.wt[cell[1]], self.net.wl[cfg.cols - 1, cell[1]])
        a, b, r, _ = solver.elements
        branch = self.net.n_nodes + np.cumsum(solver._small) - 1
        i_sense = 0.0
        for e in np.flatnonzero(np.isin(a, ends) & (b == self.net.g)):
            i_sense += x[branch[e]] if solver._small[e] else (x[a[e]] - x[self.net.g]) / r[e]
        return float(cfg.gate.V_read / i_sense - self.series_resistance(cell, short))


@dataclass(frozen=True)
class CrossbarCase:
    outcome: CaseOutcome
    max_unselected_ds: float  # largest |Δs| over non-gate cells
    max_residual: float  # worst relative KCL residual seen


def _gate_prior(config: CrossbarConfig, s0, which: str, bit: int) -> float:
    if config.gate_prior == "drawn":
        b, w = config.placement_P if which == "P" else config.placement_Q
        return float(s0[b, w])
    return prior_state(bit, config.gate_prior)


def run_crossbar_imply(config: CrossbarConfig, p: int, q: int, seed: int = 0,
                       params_P: MemristorParams | None = None, params_Q: MemristorParams | None = None,
                       scheme: ThresholdScheme | str = "ttl", reference: MemristorParams | None = None,
                       require_p_retained: bool = False) -> CrossbarCase:
    """Initialize the gate cells, run IMPLY, read both back and judge the case."""
    from .thresholds import resolve_scheme

    scheme = resolve_scheme(scheme)
    reference = reference or config.nominal
    s0 = init_states(config, seed)
    s0[config.placement_P] = _gate_prior(config, s0, "P", p)
    s0[config.placement_Q] = _gate_prior(config, s0, "Q", q)
    sim = CrossbarSim(config, params_P, params_Q, s0)
    start = sim.s.copy()

    sim.write("P", p)
    sim.write("Q", q)
    s_P_init = s_reading(sim.read("P"), reference)
    s_Q_init = s_reading(sim.read("Q"), reference)
    sim.imply()
    R_P = sim.read("P")
    R_Q = sim.read("Q")

    s = sim.s
    expected = int((not p) or q)
    case = {(0, 0): 1, (0, 1): 2, (1, 0): 3, (1, 1): 4}[(p, q)]
    outcome = judge_case(case, p, q, expected, s_P_init, s_Q_init, R_P, R_Q,
                         float(s[sim.iP]), float(s[sim.iQ]), scheme, reference, require_p_retained)
    others = np.ones(s.size, dtype=bool)
    others[[sim.iP, sim.iQ]] = False
    ds = float(np.abs(s - start)[others].max()) if others.any() else 0.0
    return CrossbarCase(outcome, ds, sim.max_residual)


def run_crossbar_truth_table(config: CrossbarConfig, params_P=None, params_Q=None, seed: int = 0,
                             scheme="ttl", reference=None, require_p_retained=False) -> list[CrossbarCase]:
    return [run_crossbar_imply(config, p, q, seed, params_P, params_Q, scheme, reference, require_p_retained)
            for _, p, q, _ in TRUTH_TABLE]


# -- sweeps -----------------------------------------------------------------------


def evaluate_crossbar_tuple(t, config: CrossbarConfig, spec: VariationSpec, seed: int,
                            reference=None) -> SweepOutcome:
    try:
        runs = run_crossbar_truth_table(config, t.params_P, t.params_Q, seed, spec.threshold_scheme,
                                        reference, spec.require_p_retained)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return SweepOutcome(t.index, t.delta, t.values, t.codes, [], False, "numeric",
                            f"{type(exc).__name__}: {exc}")
    out = _outcome(t, [r.outcome for r in runs])
    out.extra = {"max_unselected_ds": max(r.max_unselected_ds for r in runs),
                 "max_kcl_residual": max(r.max_residual for r in runs)}
    return out


def _work(args):
    label, t, config, spec, seed, reference = args
    return label, evaluate_crossbar_tuple(t, config, spec, seed, reference)


@dataclass
class CrossbarSweepResult:
    placements: list  # labels in run order
    per_placement: dict  # label -> list[SweepOutcome]
    combined: list  # worst case over placements


def combine_worst_case(per_placement: dict) -> list[SweepOutcome]:
    """A tuple is correct only if it is correct in every placement."""
    labels = list(per_placement)
    combined = []
    for group in zip(*(per_placement[k] for k in labels)):
        first = group[0]
        bad = [(k, o) for k, o in zip(labels, group) if not o.correct]
        stage = None
        if bad:
            stages = {o.stage for _, o in bad}
            stage = "initialization" if "initialization" in stages else ("operation" if "operation" in stages
                                                                         else "numeric")
        out = SweepOutcome(first.index, first.delta, first.values, first.codes, [], not bad, stage,
                           "; ".join(f"{k}: {o.stage}" for k, o in bad))
        out.extra = {"failed_placements": len(bad)}
        combined.append(out)
    return combined


def run_crossbar_sweep(spec: VariationSpec, config: CrossbarConfig, placements=None, seed: int = 0,
                       jobs: int = 1, reference=None, tuples=None) -> CrossbarSweepResult:
    """Run the tuple grid at every placement and fold the results to a worst case."""
    placements = placements or standard_placements(config.rows)
    grid = generate_grid(spec, config.nominal) if tuples is None else list(tuples)
    work = []
    labels = []
    for P, Q in placements:
        cfg = config.with_changes(placement_P=tuple(P), placement_Q=tuple(Q))
        label = placement_label(cfg.placement_P, cfg.placement_Q)
        labels.append(label)
        work += [(label, t, cfg, spec, seed, reference) for t in grid]
    if jobs <= 1 or len(work) < 2:
        results = [_work(w) for w in work]
    else:
        with mp.get_context("spawn").Pool(jobs) as pool:
            results = pool.map(_work, work, chunksize=1)
    per = {k: [] for k in labels}
    for label, out in results:
        per[label].append(out)
    for k in per:
        per[k].sort(key=lambda o: o.index)
    return CrossbarSweepResult(labels, per, combine_worst_case(per))

