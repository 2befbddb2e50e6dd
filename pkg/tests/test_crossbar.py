import numpy as np
import pytest

from memimply.crossbar import (
    CrossbarConfig,
    CrossbarDrive,
    CrossbarSim,
    NetworkSolver,
    TopologyError,
    build_network,
    histogram_csv,
    imply_drive,
    init_states,
    placement_label,
    run_crossbar_imply,
    solve_network,
    standard_placements,
    state_histogram,
)
from memimply.device import MemristorParams, resistance_of_s
from memimply.gate import GateConfig, run_case, solve_gate_voltages
from memimply.thresholds import ConfigError, preset

NOM = MemristorParams()


def test_two_by_two_counts():
    c = build_network(CrossbarConfig.square(2)).counts()
    assert c == {"cells": 4, "internal_nodes": 4, "junction_nodes": 8, "terminal_nodes": 4,
                 "bit_line_resistors": 4, "word_line_resistors": 4, "nodes": 17}


def test_node_names_are_unique():
    net = build_network(CrossbarConfig(rows=3, cols=4, placement_Q=(3, 2)))
    names = [net.node_name(i) for i in range(net.n_nodes)]
    assert len(set(names)) == net.n_nodes and names[-1] == "G"


def dense_oracle(cfg, R, drive):
    """Hand-built nodal matrix for a small array with all branches as conductances."""
    rows, cols, r, on, off = cfg.rows, cfg.cols, cfg.line_resistance, cfg.switch_on, cfg.switch_off
    names = {}

    def node(name):
        return names.setdefault(name, len(names))

    branches = []  # (a, b or None for a source, resistance, source voltage)
    for b in range(cols):
        for w in range(rows):
            branches.append((node(("BL", b, w)), node(("X", b, w)), R[b, w], 0.0))
            sw = on if (b, w) in drive.selected else off
            branches.append((node(("X", b, w)), node(("WL", b, w)), sw, 0.0))
            prev = ("BT", b) if w == 0 else ("BL", b, w - 1)
            branches.append((node(prev), node(("BL", b, w)), r, 0.0))
            prev = ("WT", w) if b == 0 else ("WL", b - 1, w)
            branches.append((node(prev), node(("WL", b, w)), r, 0.0))
    driven = dict(drive.bit_voltages)
    for b in range(cols):
        for end in (("BT", b), ("BL", b, rows - 1)):
            branches.append((node(end), None, on if b in driven else off, driven.get(b, 0.0)))
    for w in range(rows):
        for end in (("WT", w), ("WL", cols - 1, w)):
            branches.append((node(end), node("G"), on if w in drive.word_returns else off, 0.0))
    branches.append((node("G"), None, cfg.gate.R_G, 0.0))
    branches.append((node("G"), None, on if drive.short_rg else off, 0.0))
    n = len(names)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    for a, b, res, v in branches:
        g = 1.0 / res
        A[a, a] += g
        if b is None:
            rhs[a] += g * v
        else:
            A[b, b] += g
            A[a, b] -= g
            A[b, a] -= g
    x = np.linalg.solve(A, rhs)
    return {k: x[i] for k, i in names.items()}


@pytest.mark.parametrize("short_rg", [False, True])
def test_nodal_solve_matches_dense_oracle(short_rg):
    cfg = CrossbarConfig(rows=3, cols=2, placement_P=(0, 0), placement_Q=(1, 2), line_resistance=10.0,
                         switch_on=1.0, switch_off=1e6)
    rng = np.random.default_rng(5)
    R = rng.uniform(1e4, 1e6, size=(2, 3))
    drive = imply_drive(cfg)
    drive = CrossbarDrive(drive.selected, drive.bit_voltages, drive.word_returns, short_rg)
    net = build_network(cfg)
    x = solve_network(net, R, drive, cfg)
    ref = dense_oracle(cfg, R, drive)
    for b in range(2):
        for w in range(3):
            assert x[net.bl[b, w]] == pytest.approx(ref[("BL", b, w)], abs=1e-10)
            assert x[net.x[b, w]] == pytest.approx(ref[("X", b, w)], abs=1e-10)
            assert x[net.wl[b, w]] == pytest.approx(ref[("WL", b, w)], abs=1e-10)
    assert x[net.g] == pytest.approx(ref["G"], abs=1e-10)


def test_all_switches_off_gives_zero_voltages():
    cfg = CrossbarConfig.square(4)
    net = build_network(cfg)
    x = solve_network(net, np.full(16, 1e5), CrossbarDrive((), (), ()), cfg)
    assert np.all(np.abs(x) < 1e-12)


def _gate_cells(cfg, R_P, R_Q, rest=1e6):
    R = np.full((cfg.cols, cfg.rows), rest)
    R[cfg.placement_P] = R_P
    R[cfg.placement_Q] = R_Q
    return R


@pytest.mark.parametrize("R_P, R_Q", [(1e6, 1e6), (1e4, 1e6), (1e4, 1e4), (3e5, 7e4)])
def test_ideal_crossbar_reduces_to_gate(R_P, R_Q):
    cfg = CrossbarConfig.square(8, line_resistance=0.0, switch_on=1e-9, switch_off=1e15)
    net = build_network(cfg)
    solver = NetworkSolver(net, imply_drive(cfg), cfg, 1.0 / _gate_cells(cfg, R_P, R_Q).ravel())
    v = solver.device_voltages(solver.solve(solver._g0))
    V_P, V_Q, _ = solve_gate_voltages(R_P, R_Q, cfg.gate)
    assert v[cfg.cell_index(cfg.placement_P)] == pytest.approx(V_P, abs=1e-6)
    assert v[cfg.cell_index(cfg.placement_Q)] == pytest.approx(V_Q, abs=1e-6)


def test_line_resistance_drops_voltage_along_lines():
    base = CrossbarConfig.square(16, switch_off=1e15)
    ideal = base.with_changes(line_resistance=0.0)
    R = _gate_cells(base, 1e4, 1e4).ravel()
    net = build_network(base)
    x = {}
    for cfg in (base, ideal):
        s = NetworkSolver(net, imply_drive(cfg), cfg, 1.0 / R)
        x[cfg.line_resistance] = s.solve(s._g0)
    for (b, w), V in ((base.placement_P, base.gate.V_cond), (base.placement_Q, base.gate.V_set)):
        assert x[0.0][net.bl[b, w]] == pytest.approx(V, abs=1e-9)
        assert 0 < x[10.0][net.bl[b, w]] < V
        assert x[10.0][net.wl[b, w]] > x[10.0][net.g]
    # less total current reaches R_G
    assert 0 < x[10.0][net.g] < x[0.0][net.g]


@pytest.mark.parametrize("n", [16, 32, pytest.param(128, marks=pytest.mark.longrun)])
def test_kcl_residual(n):
    cfg = CrossbarConfig.square(n)
    s0 = init_states(cfg, 0).ravel()
    g = 1.0 / resistance_of_s(NOM, s0)
    solver = NetworkSolver(build_network(cfg), imply_drive(cfg), cfg, g)
    assert solver.kcl_residual(solver.solve(g), g) < 1e-9


def test_low_rank_update_matches_refactorization():
    cfg = CrossbarConfig.square(8)
    net = build_network(cfg)
    g = 1.0 / resistance_of_s(NOM, init_states(cfg, 1).ravel())
    solver = NetworkSolver(net, imply_drive(cfg), cfg, g)
    g2 = g.copy()
    g2[[0, 9, 63]] *= [3.0, 0.5, 10.0]
    updated = solver.solve(g2)
    fresh = NetworkSolver(net, imply_drive(cfg), cfg, g2)
    np.testing.assert_allclose(updated, fresh.solve(g2), rtol=1e-9, atol=1e-12)
    assert solver.factorizations == 1


def test_floating_node_is_named():
    cfg = CrossbarConfig.square(3, switch_off=np.inf)
    with pytest.raises(TopologyError) as err:
        NetworkSolver(build_network(cfg), imply_drive(cfg), cfg, np.full(9, 1e-5))
    assert err.value.node and err.value.node.startswith(("BL", "X", "BT", "WL", "WT"))


@pytest.mark.parametrize("changes", [
    {"placement_Q": (0, 0)}, {"placement_Q": (0, 5)}, {"placement_P": (16, 0)},
    {"line_resistance": -1.0}, {"sigma": 0.0}, {"switch_on": 0.0}, {"unselected": "biased"}, {"gate_prior": "lrs"},
])
def test_config_validation(changes):
    with pytest.raises(ConfigError):
        CrossbarConfig(**changes)


def test_init_states_seeded():
    cfg = CrossbarConfig.square(32)
    a, b = init_states(cfg, 3), init_states(cfg, 3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, init_states(cfg, 4))
    assert a.shape == (32, 32) and a.min() >= 0 and a.max() <= 1
    # half-normal mean is sigma * sqrt(2 / pi)
    assert a.mean() == pytest.approx(0.15 * np.sqrt(2 / np.pi), rel=0.05)


def test_histogram_outputs():
    s = init_states(CrossbarConfig.square(16), 0)
    counts, edges = state_histogram(s)
    assert counts.shape == (100,) and edges.shape == (101,) and counts.sum() == 256
    lines = histogram_csv(s).splitlines()
    assert lines[0] == "bin_low,bin_high,count" and len(lines) == 101


def test_standard_placements_are_mirrored():
    pl = standard_placements(16)
    assert pl[0] == ((0, 0), (15, 15)) and pl[1] == ((15, 15), (0, 0))
    assert pl[2] == ((0, 0), (7, 7)) and pl[3] == ((7, 7), (0, 0))
    assert placement_label(*pl[2]) == "P0-0_Q7-7"


def test_read_compensates_lines():
    cfg = CrossbarConfig.square(16)
    s0 = init_states(cfg, 0)
    s0[cfg.placement_P] = 0.3
    sim = CrossbarSim(cfg, s0=s0)
    R = sim.read("P")
    assert R == pytest.approx(resistance_of_s(NOM, 0.3), rel=1e-3)


def test_ideal_crossbar_tracks_gate_transient():
    cfg = CrossbarConfig.square(4, line_resistance=0.0, switch_on=1e-9, switch_off=1e15)
    gate = run_case(NOM, NOM, 0, 0, GateConfig(), preset("ttl"))
    xb = run_crossbar_imply(cfg, 0, 0).outcome
    assert abs(xb.s_Q - gate.s_Q) < 1e-4
    assert abs(xb.s_P - gate.s_P) < 1e-4


def test_unselected_cells_keep_their_state():
    run = run_crossbar_imply(CrossbarConfig.square(8), 0, 0, seed=2)
    assert run.max_unselected_ds == 0.0
    assert run.max_residual < 1e-9
    assert run.outcome.passed


def test_small_arrays_get_corner_placements_only():
    assert standard_placements(2) == [((0, 0), (1, 1)), ((1, 1), (0, 0))]
