import pytest

from memimply.config import (
    load_snapshot,
    parse_bool,
    parse_cell,
    parse_levels,
    parse_quantity,
    read_documents,
    resolve,
)
from memimply.thresholds import ConfigError


@pytest.mark.parametrize("text, kind, value", [
    ("40 kOhm", "resistance", 40e3), ("40k", None, 40e3), ("15 us", "time", 1.5e-05),
    ("3 nm", "length", 3.0), ("1 cm/s", "speed", 1e7), ("-0.7 V", "voltage", -0.7),
    ("10 %", None, 0.1), ("1e6", None, 1e6), ("1 MΩ", "resistance", 1e6),
])
def test_parse_quantity(text, kind, value):
    assert parse_quantity(text, kind) == value


@pytest.mark.parametrize("text, kind", [("1 V", "resistance"), ("3 parsecs", None), ("abc", None)])
def test_parse_quantity_rejects(text, kind):
    with pytest.raises(ConfigError):
        parse_quantity(text, kind)


def test_parse_levels_mirrors_unsigned_values():
    assert parse_levels("10%,20%") == (-0.2, -0.1, 0.1, 0.2)
    assert parse_levels("+0.1 -0.3") == (-0.3, 0.1)


def test_parse_bool_and_cell():
    assert parse_bool("yes") and not parse_bool("off")
    assert parse_cell("3, 4") == (3, 4)
    with pytest.raises(ConfigError):
        parse_bool("maybe")
    with pytest.raises(ConfigError):
        parse_cell("1")


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_documents_merge_and_cli_wins(tmp_path):
    a = _write(tmp_path, "a.ini", "[device]\nv_on = -0.6 V\n[gate]\nR_G = 30 kOhm\n[sweep]\nfamily = r\n")
    b = _write(tmp_path, "b.ini", "[gate]\nR_G = 35k\n[device.Q]\nR_off = 900 kOhm\n")
    cfg = resolve(read_documents([a, b]), {"sweep": {"family": "k"}})
    assert cfg.nominal.v_on == -0.6 and cfg.params_P.v_on == -0.6
    assert cfg.gate.R_G == 35e3
    assert cfg.params_Q.R_off == 900e3 and cfg.params_P.R_off == 1e6
    assert cfg.sweep.family == "k"


def test_crossbar_size_sets_corners():
    cfg = resolve({"crossbar": {"size": "8", "line_resistance": "5 Ohm"}, "seed": 3})
    cb = cfg.crossbar
    assert (cb.rows, cb.cols, cb.placement_Q, cb.line_resistance) == (8, 8, (7, 7), 5.0)
    assert cfg.seed == 3


def test_absolute_sweep_ranges():
    cfg = resolve({"sweep": {"family": "v", "absolute.v_onP": "-0.8 V -0.6 V"}})
    assert cfg.sweep.absolute == {"v_onP": (-0.8, -0.6)}
    with pytest.raises(ConfigError):
        resolve({"sweep": {"family": "v", "absolute.R_onP": "1k 2k"}})


@pytest.mark.parametrize("docs", [
    {"bogus": {}}, {"device": {"colour": "red"}}, {"thresholds": {"scheme": "ecl"}},
    {"gate": {"R_G": "-5"}}, {"device": {"R_on": "2 MOhm"}}, {"crossbar": {"placement_Q": "0,0"}},
])
def test_bad_documents_raise_config_error(docs):
    with pytest.raises(ConfigError):
        resolve(docs)


def test_snapshot_round_trip():
    cfg = resolve({"device.P": {"k_on": "2e7"}, "sweep": {"family": "r", "levels": "5%"},
                   "crossbar": {"size": "4", "sigma": "0.2"}, "integrator": {"norm": "max"}, "seed": 9})
    again = load_snapshot(cfg.snapshot())
    assert again == cfg
    assert again.snapshot() == cfg.snapshot()


def test_malformed_ini(tmp_path):
    p = _write(tmp_path, "x.ini", "device]\nv_on=1\n")
    with pytest.raises(ConfigError):
        read_documents([p])
