import csv
import json
import os

import pytest

from memimply.cli import main, read_outcomes_csv


def _files(path):
    return sorted(os.listdir(path))


def test_constraints_outputs(tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["constraints", "--out", str(out), "--area", "v_onP:v_onQ", "--grid", "11"]) == 0
    assert {"constraints.csv", "constraints.json", "area_v_onP_v_onQ.svg", "area_v_onP_v_onQ.json",
            "manifest.json"} <= set(_files(out))
    doc = json.loads((out / "constraints.json").read_text())
    assert doc["rg_bounds"]["lower"] == pytest.approx(5000)
    assert "all satisfied: True" in capsys.readouterr().out


def test_replay_reproduces_digests(tmp_path, capsys):
    out = tmp_path / "c"
    main(["constraints", "--out", str(out), "--scheme", "1/3"])
    capsys.readouterr()
    assert main(["replay", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    assert "digests match" in capsys.readouterr().out
    first = json.loads((out / "manifest.json").read_text())
    second = json.loads((tmp_path / "again" / "manifest.json").read_text())
    assert first["outputs"] == second["outputs"]


def test_bad_driver_voltage_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[gate]\nV_cond = 0.2 V\n")
    assert main(["constraints", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "V_set - V_cond" in capsys.readouterr().err


def test_unknown_scheme_exits_2(tmp_path):
    assert main(["constraints", "--scheme", "ecl", "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file_exits_1(tmp_path):
    assert main(["constraints", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")]) == 1


def test_sweep_gate_and_plot(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[sweep]\nfamily = v\nabsolute.v_onP = -0.75 V -0.65 V\n")
    out = tmp_path / "s"
    # only the nominal level plus one absolute pair keeps the run short
    assert main(["sweep-gate", "--config", str(cfg), "--levels", "1%", "--jobs", "1", "--out", str(out),
                 "--area", "v_onP:v_onQ", "--grid", "9"]) == 0
    assert {"outcomes.csv", "summary.json", "four_square_v_0.01.svg", "area_v_onP_v_onQ.svg"} <= set(_files(out))
    rows = list(csv.DictReader(open(out / "outcomes.csv")))
    assert len(rows) == 81
    assert {r["v_onP"] for r in rows} == {"-0.75", "-0.7", "-0.65"}
    outcomes = read_outcomes_csv(str(out / "outcomes.csv"))
    assert [o.correct for o in outcomes] == [r["verdict"] == "correct" for r in rows]
    assert main(["plot", str(out / "outcomes.csv"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "four_square_v_0.01.svg").read_text() == (out / "four_square_v_0.01.svg").read_text()


def test_sweep_crossbar_small(tmp_path):
    out = tmp_path / "x"
    assert main(["sweep-crossbar", "--size", "2", "--levels", "0", "--jobs", "1", "--seed", "4",
                 "--out", str(out)]) == 0
    names = set(_files(out))
    assert {"outcomes_P0-0_Q1-1.csv", "outcomes_P1-1_Q0-0.csv", "outcomes_combined.csv", "summary.json",
            "initial_states_histogram.csv", "initial_states_histogram.svg"} <= names
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 4 and summary["size"] == [2, 2]
    assert summary["summary"]["failed"] == 0
    for info in summary["placements"].values():
        assert info["max_kcl_residual"] < 1e-9


def test_sweep_crossbar_needs_long_run_flag(tmp_path, capsys):
    assert main(["sweep-crossbar", "--size", "64", "--out", str(tmp_path / "x")]) == 2
    assert "--long-run" in capsys.readouterr().err


def test_calibrate(tmp_path, capsys):
    out = tmp_path / "k"
    assert main(["calibrate", "--out", str(out)]) == 0
    doc = json.loads((out / "calibration.json").read_text())
    assert doc["switching_time_s"] == pytest.approx(3.85e-6, rel=1e-3)
    assert "3.85 us" in capsys.readouterr().out
    assert main(["calibrate", "--drive", "0.5", "--out", str(out)]) == 0
    assert json.loads((out / "calibration.json").read_text())["status"] == "no switching"
