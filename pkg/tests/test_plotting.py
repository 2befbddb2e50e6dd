import numpy as np
import pytest

from memimply.constraints import operating_area
from memimply.device import MemristorParams
from memimply.gate import GateConfig
from memimply.plotting import GREEN, ORANGE, RED, render_four_square, render_histogram, \
    render_operating_area, result_bar
from memimply.sweep import SweepOutcome
from memimply.thresholds import ConfigError, preset

NOM = MemristorParams()


def _outcome(i, v, code, correct, pid="v_onP"):
    codes = {"v_onP": "nominal", "v_offP": "nominal", "v_onQ": "nominal", "v_offQ": "nominal"}
    values = {"v_onP": -0.7, "v_offP": 0.01, "v_onQ": -0.7, "v_offQ": 0.01}
    codes[pid] = code
    values[pid] = v
    return SweepOutcome(i, 0.1, values, codes, [], correct)


OUTCOMES = [_outcome(0, -0.63, "min", True), _outcome(1, -0.7, "nominal", True),
            _outcome(2, -0.77, "max", False)]


def test_four_square_is_deterministic_svg():
    a = render_four_square(OUTCOMES)
    b = render_four_square(OUTCOMES)
    assert a == b
    assert a.lstrip().startswith("<?xml") and "<svg" in a
    assert GREEN in a and RED in a


def test_four_square_empty():
    svg = render_four_square(OUTCOMES, delta=0.3)
    assert "no outcomes" in svg


def test_result_bar_segments():
    values, colours, segments = result_bar(OUTCOMES, "v_onP")
    assert values == [-0.77, -0.7, -0.63]
    assert colours == [RED, GREEN, GREEN]
    assert segments == [(-0.77, -0.7, ORANGE), (-0.7, -0.63, GREEN)]


def test_operating_area_svg_and_axis_mismatch():
    area = operating_area("v_onP", (-0.9, -0.5), "v_onQ", (-1.0, -0.5), NOM, NOM, GateConfig(),
                          preset("ttl"), n=11)
    svg = render_operating_area(area, OUTCOMES)
    assert svg == render_operating_area(area, OUTCOMES)
    bad = [_outcome(0, 1e4, "min", True, pid="v_offQ")]
    for o in bad:
        o.codes = {"R_onP": "min"}
    with pytest.raises(ConfigError):
        render_operating_area(area, bad)


def test_histogram_svg():
    counts, edges = np.histogram([0.1, 0.2, 0.2], bins=4, range=(0, 1))
    svg = render_histogram(counts, edges)
    assert "<svg" in svg and svg == render_histogram(counts, edges)
