"""Cascaded voltage/current PI controllers with decoupling and feedforward."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

from .plant import ModelDomainError, _Vector


@dataclass(frozen=True)
class CascadeGains(_Vector):
    k_pv: float
    k_iv: float
    k_pi: float
    k_ii: float
    k_ffi: float
    k_ffv: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in astuple(self)):
            raise ModelDomainError(f"non-finite cascade gain: {self!r}")


@dataclass(frozen=True)
class CascadeState(_Vector):
    xi_vd: float = 0.0
    xi_vq: float = 0.0
    xi_id: float = 0.0
    xi_iq: float = 0.0


def cascade_commands(xs, x, E_u, g, params):
    """Voltage and current references of the cascade.

    Returns ``(e_dref, e_qref, i_dref, i_qref)``.  The q-axis voltage
    reference is zero and the decoupling terms carry no ``omega_u`` factor.
    """
    i_dref = g.k_pv * (E_u - x.v_d) + g.k_iv * xs.xi_vd - params.C_f * x.v_q + g.k_ffi * x.i_od
    i_qref = -g.k_pv * x.v_q + g.k_iv * xs.xi_vq + params.C_f * x.v_d + g.k_ffi * x.i_oq
    e_dref = g.k_pi * (i_dref - x.i_d) + g.k_ii * xs.xi_id - params.L_f * x.i_q + g.k_ffv * x.v_d
    e_qref = g.k_pi * (i_qref - x.i_q) + g.k_ii * xs.xi_iq + params.L_f * x.i_d + g.k_ffv * x.v_q
    return e_dref, e_qref, i_dref, i_qref


def cascade_deriv(xs, x, E_u, g, params):
    """Integrator rates: the four PI error signals."""
    _, _, i_dref, i_qref = cascade_commands(xs, x, E_u, g, params)
    return CascadeState(E_u - x.v_d, -x.v_q, i_dref - x.i_d, i_qref - x.i_q)
