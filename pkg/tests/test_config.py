import numpy as np
import pytest

from mimogfm import config
from mimogfm.config import ConfigError, fixture, format_gain_set, load, parse_text
from mimogfm.hinf import DEFAULT_CHANNELS
from mimogfm.presets import hinf_gains, table1_params, table1_references, traditional_gains
from mimogfm.sim import STEP_SCENARIOS

ALL = [fixture("table1.cfg"), fixture("table2_traditional.cfg"), fixture("table2_hinf.cfg")]


def test_fixtures_match_presets():
    cfg = load(ALL)
    assert cfg.params == table1_params()
    assert cfg.refs == table1_references()
    assert cfg.gains["traditional"] == traditional_gains()
    assert cfg.gains["hinf"] == hinf_gains()
    for name, scn in STEP_SCENARIOS.items():
        assert cfg.scenarios[name] == scn


def test_fixture_weights_match_default_channels():
    cfg = load(ALL)
    got = cfg.channels()
    assert [(i, j) for i, j, _ in got] == [(i, j) for i, j, _ in DEFAULT_CHANNELS]
    for (_, _, a), (_, _, b) in zip(got, DEFAULT_CHANNELS):
        for w in (0.0, 1.0, 1e3):
            assert a(1j * w) == pytest.approx(b(1j * w), rel=1e-12)


def test_synthesis_problem_defaults():
    base, prob = load(ALL).synthesis_problem()
    assert base == traditional_gains()
    assert prob.frozen == ("k_12", "k_14", "k_15")
    assert np.array_equal(prob.theta0, traditional_gains().theta())
    assert load(ALL).synthesis_problem(seed=9)[1].seed == 9


def test_parse_comments_and_overrides():
    raw = parse_text("a = 1  # note\n# full line\n\nb=2\na = 3\n")
    assert raw == {"a": "3", "b": "2"}


@pytest.mark.parametrize("text", ["novalue =", "= 3", "justtext"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_include_relative(tmp_path):
    (tmp_path / "base.cfg").write_text("x = 1\ny = 2\n")
    (tmp_path / "top.cfg").write_text("include = base.cfg\ny = 5\n")
    assert config.load_raw(tmp_path / "top.cfg") == {"x": "1", "y": "5"}


def test_include_cycle(tmp_path):
    (tmp_path / "a.cfg").write_text("include = b.cfg\n")
    (tmp_path / "b.cfg").write_text("include = a.cfg\n")
    with pytest.raises(ConfigError):
        config.load_raw(tmp_path / "a.cfg")


def test_missing_file():
    with pytest.raises(ConfigError):
        load("/nonexistent/x.cfg")


def test_bad_values(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text(f"include = {ALL[0]}\nplant.L_f_mH = abc\n")
    with pytest.raises(ConfigError):
        load(p)
    p.write_text(f"include = {ALL[0]}\ninclude = {ALL[1]}\ngains.traditional.k_99 = 1\n")
    with pytest.raises(ConfigError):
        load(p)


def test_per_unit_plant_section(tmp_path):
    pr = table1_params()
    p = tmp_path / "pu.cfg"
    p.write_text(f"include = {ALL[0]}\nplant.units = pu\n"
                 f"plant.L_f = {pr.L_f!r}\nplant.C_f = {pr.C_f!r}\nplant.L_g = {pr.L_g!r}\n"
                 f"plant.R_g = {pr.R_g!r}\nplant.C_dc = {pr.C_dc!r}\nplant.T_sw = {pr.T_sw!r}\n")
    assert load(p).params == pr


def test_format_gain_set_roundtrip(tmp_path):
    p = tmp_path / "g.cfg"
    p.write_text(format_gain_set("x", hinf_gains(), header="test"))
    cfg = load([ALL[0], p])
    assert cfg.gains["x"] == hinf_gains()
