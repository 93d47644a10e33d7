import math

import numpy as np
import pytest

from mimogfm.sim import (STEP_SCENARIOS, TRACE_COLUMNS, NotSettledError, Scenario, SimTrace,
                         metrics, simulate, step_consistency)


def synthetic(y, t, step_time):
    data = np.zeros((len(t), len(TRACE_COLUMNS)))
    data[:, 0] = t
    data[:, TRACE_COLUMNS.index("p")] = y
    return SimTrace(TRACE_COLUMNS, data, {"step_time": step_time})


def test_metrics_first_order():
    tau, ts = 0.05, 0.2
    t = np.arange(0, 2.0 + 1e-12, 1e-4)
    y = np.where(t < ts, 0.5, 1.0 - 0.5 * np.exp(-(t - ts) / tau))
    m = metrics(synthetic(y, t, ts), "p", 1.0)
    assert m.overshoot == 0.0
    assert m.settling_time == pytest.approx(tau * math.log(50.0), rel=1e-4)
    assert abs(m.steady_error) < 1e-9


def test_metrics_damped_second_order():
    zeta, wn, ts = 0.3, 40.0, 0.2
    wd = wn * math.sqrt(1 - zeta ** 2)
    t = np.arange(0, 2.0 + 1e-12, 1e-5)
    tt = np.maximum(t - ts, 0.0)
    resp = 1 - np.exp(-zeta * wn * tt) * (np.cos(wd * tt) + zeta / math.sqrt(1 - zeta ** 2) * np.sin(wd * tt))
    y = 0.5 + 0.5 * resp
    m = metrics(synthetic(y, t, ts), "p", 1.0)
    assert m.overshoot == pytest.approx(math.exp(-math.pi * zeta / math.sqrt(1 - zeta ** 2)), rel=1e-4)
    assert m.overshoot == pytest.approx(0.372, abs=1e-3)


def test_metrics_downward_step():
    tau, w = 0.01, 300.0
    t = np.arange(0, 1.0 + 1e-12, 1e-5)
    y = np.where(t < 0.1, 1.0, 0.998 + 0.002 * np.exp(-(t - 0.1) / tau) * np.cos(w * (t - 0.1)))
    m = metrics(synthetic(y, t, 0.1), "p", 0.998)
    # first undershoot where tan(w s) = -1 / (w tau)
    s = (math.pi - math.atan(1.0 / (w * tau))) / w
    assert m.overshoot == pytest.approx(-math.exp(-s / tau) * math.cos(w * s), rel=1e-4)


def test_metrics_constant_trace():
    t = np.arange(0, 1.0, 1e-3)
    m = metrics(synthetic(np.full(t.size, 0.7), t, 0.1), "p", 0.7)
    assert (m.overshoot, m.settling_time) == (0.0, 0.0)
    assert abs(m.steady_error) < 1e-15


def test_metrics_not_settled():
    t = np.arange(0, 1.0, 1e-3)
    y = np.where(t < 0.1, 0.0, np.sin(t))
    with pytest.raises(NotSettledError):
        metrics(synthetic(y, t, 0.1), "p", 1.0)


def test_constant_scenario_stays_at_equilibrium(hinf, refs, params):
    scn = Scenario("flat", "P_ref", 0.5, 0.5, duration=0.5, step_time=0.1)
    tr = simulate(scn, hinf, refs, params)
    for col in ("v_dc", "p", "omega_u", "q", "V"):
        assert np.max(np.abs(tr[col] - tr[col][0])) < 1e-8


def test_power_step_final_values(gains, refs, params):
    tr = simulate(STEP_SCENARIOS["pref_step"], gains, refs, params)
    assert tr["p"][-1] == pytest.approx(1.0, abs=1e-3)
    assert tr["v_dc"][-1] == pytest.approx(1.0, abs=1e-4)
    assert tr["omega_u"][-1] == pytest.approx(1.0, abs=1e-5)


def test_frequency_step_droop(gains, refs, params):
    tr = simulate(STEP_SCENARIOS["wg_step"], gains, refs, params)
    assert tr["p"][-1] == pytest.approx(0.7, abs=2e-3)
    assert tr["v_dc"][-1] == pytest.approx(1.0, abs=1e-4)
    assert tr["omega_u"][-1] == pytest.approx(0.998, abs=1e-5)


def test_trace_layout(hinf, refs, params):
    tr = simulate(STEP_SCENARIOS["pref_step"], hinf, refs, params, label="hinf")
    assert tr.columns == TRACE_COLUMNS
    assert len(tr.t) == 20001
    assert tr.t[2000] == pytest.approx(0.2)
    assert tr.meta["gains"] == "hinf"
    # first post-step sample still sits at the old operating point
    assert tr["p"][2000] == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("name", sorted(STEP_SCENARIOS))
def test_halving_the_step(name, gains, refs, params):
    rep = step_consistency(1e-5, STEP_SCENARIOS[name], gains, refs, params)
    assert rep.max_deviation < 1e-6


def test_csv_roundtrip(tmp_path, hinf, refs, params):
    scn = Scenario("short", "P_ref", 0.5, 0.6, duration=0.05, step_time=0.01)
    tr = simulate(scn, hinf, refs, params, label="hinf")
    tr.to_csv(tmp_path / "t.csv")
    back = SimTrace.from_csv(tmp_path / "t.csv")
    assert back.columns == tr.columns
    np.testing.assert_allclose(back.data, tr.data, rtol=1e-11, atol=1e-14)
    assert back.meta["scenario"] == "short" and back.meta["gains"] == "hinf"


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario("x", "bogus", 0, 1)
    with pytest.raises(ValueError):
        Scenario("x", "P_ref", 0, 1, duration=1.0, step_time=1.5)


def test_step_time_off_grid(hinf, refs, params):
    with pytest.raises(ValueError):
        simulate(Scenario("x", "P_ref", 0.5, 0.6, duration=0.05, step_time=0.01005), hinf, refs, params)
