"""Multivariable grid-forming outer controller.

The 3x5 transfer matrix maps the error vector
``e = [V_dcref - v_dc, P_ref - p, omega_g - omega_u, Q_ref - q, V_ref - V]``
onto the plant inputs ``[i_u, omega_u, E_u]``::

    [k_pdc + k_idc/s   k_12                     0   k_14      k_15          ]
    [k_21              D_p*k_22/(s + k_22)      0   k_24      k_24/D_q      ]
    [k_31              k_32                     0   k_34/s    k_34/(D_q*s)  ]

It is realized with three states: the DC-error integrator, the low-pass
state (which holds the filtered ``D_p*e_2``) and one integrator shared by
the reactive-power and voltage columns.  The third column is zero, so the
controller never sees the grid frequency.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .plant import ControlInput, ModelDomainError, _Vector


@dataclass(frozen=True)
class GfmGains(_Vector):
    k_pdc: float
    k_idc: float
    k_12: float
    k_14: float
    k_15: float
    k_21: float
    k_22: float
    k_24: float
    k_31: float
    k_32: float
    k_34: float
    D_p: float = 0.01
    D_q: float = 0.05

    def __post_init__(self):
        if not all(math.isfinite(v) for v in astuple(self)):
            raise ModelDomainError(f"non-finite GFM gain: {self!r}")

    def validate(self):
        """Raise if the droop coefficients or the low-pass corner are not positive."""
        if self.D_p <= 0.0 or self.D_q <= 0.0:
            raise ModelDomainError(f"droop coefficients must be positive (D_p={self.D_p}, D_q={self.D_q})")
        if self.k_22 <= 0.0:
            raise ModelDomainError(f"low-pass corner k_22 must be positive, got {self.k_22}")


@dataclass(frozen=True)
class GfmState(_Vector):
    xi_dc: float = 0.0
    xi_lp: float = 0.0
    xi_qv: float = 0.0


@dataclass(frozen=True)
class References:
    V_dcref: float = 1.0
    P_ref: float = 0.5
    omega_g_ref: float = 1.0
    Q_ref: float = 0.0
    V_ref: float = 1.0
    i_0: float | None = None
    omega_0: float = 1.0
    E_0: float = 1.0

    def __post_init__(self):
        if self.V_dcref <= 0.0 or self.V_ref <= 0.0:
            raise ModelDomainError("V_dcref and V_ref must be positive")
        # the DC current set-point defaults to the active-power reference
        if self.i_0 is None:
            object.__setattr__(self, "i_0", self.P_ref)

    def y_ref(self):
        return np.array([self.V_dcref, self.P_ref, self.omega_g_ref, self.Q_ref, self.V_ref])


def gfm_error(y, refs):
    return np.array([
        refs.V_dcref - y.v_dc,
        refs.P_ref - y.p,
        refs.omega_g_ref - y.omega_u,
        refs.Q_ref - y.q,
        refs.V_ref - y.V,
    ])


def _inv_Dq(g):
    if g.D_q == 0.0:
        raise ModelDomainError("D_q must be non-zero")
    return 1.0 / g.D_q


def gfm_output(xs, e, g, refs):
    """Plant inputs ``u = u_0 + Phi(s) e`` from the realized controller."""
    inv_dq = _inv_Dq(g)
    i_u = (refs.i_0 + g.k_pdc * e[0] + g.k_idc * xs.xi_dc
           + g.k_12 * e[1] + g.k_14 * e[3] + g.k_15 * e[4])
    omega_u = refs.omega_0 + g.k_21 * e[0] + xs.xi_lp + g.k_24 * e[3] + g.k_24 * inv_dq * e[4]
    E_u = refs.E_0 + g.k_31 * e[0] + g.k_32 * e[1] + xs.xi_qv
    return ControlInput(i_u, omega_u, E_u)


def gfm_deriv(xs, e, g):
    inv_dq = _inv_Dq(g)
    return GfmState(
        e[0],
        g.k_22 * (g.D_p * e[1] - xs.xi_lp),
        g.k_34 * e[3] + g.k_34 * inv_dq * e[4],
    )


def phi_eval(g, s):
    """Evaluate the 3x5 transfer matrix at complex frequency ``s``."""
    s = complex(s)
    if s == 0.0 or s == -g.k_22:
        raise ZeroDivisionError(f"s = {s} is a pole of the control transfer matrix")
    inv_dq = _inv_Dq(g)
    phi = np.zeros((3, 5), dtype=complex)
    phi[0] = [g.k_pdc + g.k_idc / s, g.k_12, 0.0, g.k_14, g.k_15]
    phi[1] = [g.k_21, g.D_p * g.k_22 / (s + g.k_22), 0.0, g.k_24, g.k_24 * inv_dq]
    phi[2] = [g.k_31, g.k_32, 0.0, g.k_34 / s, g.k_34 * inv_dq / s]
    return phi


def realization(g):
    """State-space matrices ``(A, B, C, D)`` of the controller from e to u - u_0."""
    inv_dq = _inv_Dq(g)
    A = np.diag([0.0, -g.k_22, 0.0])
    B = np.array([
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, g.k_22 * g.D_p, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, g.k_34, g.k_34 * inv_dq],
    ])
    C = np.array([
        [g.k_idc, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
    D = np.array([
        [g.k_pdc, g.k_12, 0.0, g.k_14, g.k_15],
        [g.k_21, 0.0, 0.0, g.k_24, g.k_24 * inv_dq],
        [g.k_31, g.k_32, 0.0, 0.0, 0.0],
    ])
    return A, B, C, D
