import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimogfm.presets import table1_params
from mimogfm.plant import (Bases, ControlInput, ModelDomainError, PlantParams, PlantState, SIParams,
                           params_from_si, plant_deriv, plant_outputs)

TEST_STATE = PlantState(e_d=1.0, e_q=0.0, i_d=0.5, i_q=0.1, v_d=0.98, v_q=-0.05,
                        i_od=0.45, i_oq=0.02, v_dc=1.02, delta=0.1)
TEST_EREF = (1.01, 0.02)
TEST_INPUT = ControlInput(i_u=0.5, omega_u=1.001, E_u=1.0)

# term-by-term evaluation in exact rational arithmetic (sympy, 20 digits)
EXPECTED_DERIV = [
    66.666666666666722684, 133.33333333333332972, 223.98067579576731248, 324.09662102116417313,
    330.53671658041737926, 245.83266436676352888, -64.120568161186309115, 37.663593014097404780,
    0.20008003201280530532, 0.31415926535894472616,
]


def test_deriv_matches_exact_evaluation(params):
    dx = plant_deriv(TEST_STATE, TEST_EREF, TEST_INPUT, params).as_array()
    np.testing.assert_allclose(dx, EXPECTED_DERIV, rtol=1e-12, atol=1e-12)


def test_deriv_synchronized_zero_power(params):
    x = PlantState(0, 0, 0, 0, 0, 0, 0, 0, 1.0, 0.0)
    dx = plant_deriv(x, (0.0, 0.0), ControlInput(0.0, params.omega_g, 0.0), params)
    assert dx.delta == 0.0
    assert dx.v_dc == 0.0


def test_deriv_guards(params):
    with pytest.raises(ModelDomainError):
        plant_deriv(PlantState(v_dc=0.0), (0, 0), TEST_INPUT, params)
    with pytest.raises(ModelDomainError):
        plant_deriv(PlantState(v_dc=-0.1), (0, 0), TEST_INPUT, params)
    with pytest.raises(ModelDomainError):
        plant_deriv(TEST_STATE, (math.nan, 0), TEST_INPUT, params)


def test_disturbance_override(params):
    a = plant_deriv(TEST_STATE, TEST_EREF, TEST_INPUT, params, omega_g=0.998, V_g=1.05)
    b = plant_deriv(TEST_STATE, TEST_EREF, TEST_INPUT,
                    PlantParams(**{**params.__dict__, "omega_g": 0.998, "V_g": 1.05}))
    assert a == b


@pytest.mark.parametrize("x, expected", [
    ((1.0, 0.0, 0.5, 0.0), (0.5, 0.0, 1.0)),
    ((0.0, 1.0, 0.0, 1.0), (1.0, 0.0, 1.0)),
    ((0.8, 0.6, 0.3, -0.4), (0.0, 0.5, 1.0)),
])
def test_outputs(x, expected):
    v_d, v_q, i_od, i_oq = x
    y = plant_outputs(PlantState(v_d=v_d, v_q=v_q, i_od=i_od, i_oq=i_oq), ControlInput(0.3, 1.01, 1.0))
    assert y.p == pytest.approx(expected[0], abs=1e-15)
    assert y.q == pytest.approx(expected[1], abs=1e-15)
    assert y.V == pytest.approx(expected[2], abs=1e-15)
    assert (y.v_dc, y.omega_u) == (1.0, 1.01)


finite = st.floats(-2.0, 2.0, allow_nan=False)


@given(finite, finite, finite, finite, st.floats(-math.pi, math.pi))
def test_outputs_frame_rotation_invariant(v_d, v_q, i_od, i_oq, theta):
    c, s = math.cos(theta), math.sin(theta)
    u = ControlInput(0.0, 1.0, 1.0)
    y0 = plant_outputs(PlantState(v_d=v_d, v_q=v_q, i_od=i_od, i_oq=i_oq), u)
    y1 = plant_outputs(PlantState(v_d=c * v_d - s * v_q, v_q=s * v_d + c * v_q,
                                  i_od=c * i_od - s * i_oq, i_oq=s * i_od + c * i_oq), u)
    assert y1.p == pytest.approx(y0.p, abs=1e-13)
    assert y1.q == pytest.approx(y0.q, abs=1e-13)
    assert y1.V == pytest.approx(y0.V, abs=1e-13)


@given(finite, finite)
def test_voltage_magnitude_squared(v_d, v_q):
    y = plant_outputs(PlantState(v_d=v_d, v_q=v_q), ControlInput(0, 1, 1))
    assert y.V ** 2 == pytest.approx(v_d ** 2 + v_q ** 2, rel=1e-14, abs=1e-300)


@given(st.floats(0.5, 1.5), finite, finite, finite, finite)
def test_dc_power_balance(v_dc, e_d, e_q, i_d, i_q):
    params = table1_params()
    i_u = (e_d * i_d + e_q * i_q) / v_dc
    x = PlantState(e_d=e_d, e_q=e_q, i_d=i_d, i_q=i_q, v_dc=v_dc)
    dx = plant_deriv(x, (0, 0), ControlInput(i_u, 1.0, 1.0), params)
    assert abs(dx.v_dc) < 1e-12 * max(1.0, abs(params.omega_b / params.C_dc * i_u))


@pytest.mark.parametrize("field, si, pu", [
    ("L_f", 3e-3, 0.0326),
    ("C_f", 5e-6, 0.0454),
    ("L_g", 8e-3, 0.087),
])
def test_per_unit_table_pairs(field, si, pu):
    base = dict(L_f=3e-3, C_f=5e-6, L_g=8e-3, C_dc=500e-6, f_sw=10e3)
    base[field] = si
    params = params_from_si(SIParams(**base), Bases(S_n=5000.0, V_n=380.0, omega_n=100 * math.pi))
    assert getattr(params, field) == pytest.approx(pu, rel=5e-3)


def test_per_unit_dc_and_delay():
    params = params_from_si(SIParams(L_f=3e-3, C_f=5e-6, L_g=8e-3, C_dc=500e-6, f_sw=10e3))
    assert params.C_dc == pytest.approx(100 * math.pi * 500e-6 * 700 ** 2 / 5000)
    assert params.T_sw == pytest.approx(1e-4)
    assert params.V_g == pytest.approx(1.0)
    assert params.omega_g == pytest.approx(1.0)


def test_per_unit_bad_bases():
    si = SIParams(L_f=3e-3, C_f=5e-6, L_g=8e-3, C_dc=500e-6, f_sw=10e3)
    with pytest.raises(ModelDomainError):
        params_from_si(si, Bases(S_n=0.0))
    with pytest.raises(ModelDomainError):
        params_from_si(si, Bases(V_n=-380.0))


def test_params_invariants():
    with pytest.raises(ModelDomainError):
        PlantParams(L_f=0.03, C_f=0.05, L_g=0.09, R_g=-0.01, C_dc=15, T_sw=1e-4)
    with pytest.raises(ModelDomainError):
        PlantParams(L_f=0.0, C_f=0.05, L_g=0.09, R_g=0.01, C_dc=15, T_sw=1e-4)
