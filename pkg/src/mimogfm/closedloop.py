"""Closed-loop composition of plant, cascade and grid-forming controller.

The full state is the 17-vector ``[plant (10), cascade (4), gfm (3)]``.
:func:`closedloop_deriv` composes the per-module functions on dataclass
values; the flat-array kernels in :mod:`mimogfm.kernel` evaluate the same
vector field and are what the solvers and integrators call.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernel
from .cascade import CascadeGains, CascadeState, cascade_commands, cascade_deriv
from .gfm import GfmGains, GfmState, References, gfm_deriv, gfm_error, gfm_output
from .plant import ControlInput, ModelDomainError, PlantState, plant_deriv, plant_outputs

log = logging.getLogger(__name__)

STATE_NAMES = PlantState.names() + CascadeState.names() + GfmState.names()

# Optimizer ordering of the tunable gains; D_p and D_q stay fixed.
THETA_NAMES = (
    "k_pi", "k_ii", "k_ffv", "k_pv", "k_iv", "k_ffi",
    "k_21", "k_22", "k_24", "k_31", "k_32", "k_34",
    "k_pdc", "k_idc", "k_12", "k_14", "k_15",
)
_CASCADE_NAMES = set(CascadeGains.names())


class EquilibriumError(RuntimeError):
    """Newton iteration failed; ``residual`` holds the last residual norm."""

    def __init__(self, msg, residual=float("nan"), state=None):
        super().__init__(msg)
        self.residual = residual
        self.state = state


@dataclass(frozen=True)
class Disturbance:
    omega_g: float = 1.0
    V_g: float = 1.0

    def __post_init__(self):
        if not (self.omega_g > 0.0 and self.V_g > 0.0):
            raise ModelDomainError(f"disturbance must be positive: {self!r}")


@dataclass(frozen=True)
class GainSet:
    cascade: CascadeGains
    gfm: GfmGains

    def theta(self):
        """Flattened tunable gains in ``THETA_NAMES`` order."""
        return np.array([self[name] for name in THETA_NAMES])

    def __getitem__(self, name):
        src = self.cascade if name in _CASCADE_NAMES else self.gfm
        return getattr(src, name)

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(THETA_NAMES),):
            raise ValueError(f"theta must have {len(THETA_NAMES)} entries")
        casc = {}
        gfm = {}
        for name, v in zip(THETA_NAMES, theta):
            (casc if name in _CASCADE_NAMES else gfm)[name] = float(v)
        return GainSet(replace(self.cascade, **casc), replace(self.gfm, **gfm))

    def as_dict(self):
        out = dict(zip(CascadeGains.names(), self.cascade.as_array()))
        out.update(zip(GfmGains.names(), self.gfm.as_array()))
        return {k: float(v) for k, v in out.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(CascadeGains(**{k: d[k] for k in CascadeGains.names()}),
                   GfmGains(**{k: d[k] for k in GfmGains.names() if k in d}))


@dataclass(frozen=True)
class FullState:
    plant: PlantState = field(default_factory=PlantState)
    cascade: CascadeState = field(default_factory=CascadeState)
    gfm: GfmState = field(default_factory=GfmState)

    def as_array(self):
        return np.concatenate([self.plant.as_array(), self.cascade.as_array(), self.gfm.as_array()])

    @classmethod
    def from_array(cls, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (kernel.NX,):
            raise ValueError(f"full state must have {kernel.NX} entries, got shape {z.shape}")
        return cls(PlantState.from_array(z[:10]), CascadeState.from_array(z[10:14]),
                   GfmState.from_array(z[14:]))


def pack_params(refs, d, g, params):
    """Flat parameter vector for the kernels (layout in :mod:`mimogfm.kernel`)."""
    c, k = g.cascade, g.gfm
    return np.array([
        params.L_f, params.C_f, params.L_g, params.R_g, params.C_dc, params.T_sw, params.omega_b,
        refs.V_dcref, refs.P_ref, refs.omega_g_ref, refs.Q_ref, refs.V_ref,
        refs.i_0, refs.omega_0, refs.E_0,
        d.omega_g, d.V_g,
        c.k_pv, c.k_iv, c.k_pi, c.k_ii, c.k_ffi, c.k_ffv,
        k.k_pdc, k.k_idc, k.k_12, k.k_14, k.k_15, k.k_21, k.k_22, k.k_24,
        k.k_31, k.k_32, k.k_34, k.D_p, k.D_q,
    ], dtype=float)


def control_signals(z, refs, g):
    """Outputs, error vector and plant inputs at a full state."""
    y0 = plant_outputs(z.plant, ControlInput(0.0, refs.omega_0, 0.0))
    e = gfm_error(y0, refs)
    u = gfm_output(z.gfm, e, g.gfm, refs)
    # omega_u enters y, so re-evaluate once u is known (e_3 never feeds back)
    y = plant_outputs(z.plant, u)
    return y, gfm_error(y, refs), u


def closedloop_deriv(z, refs, d, g, params):
    """Derivative of the full closed-loop state as a :class:`FullState`."""
    g.gfm.validate()
    _, e, u = control_signals(z, refs, g)
    e_dref, e_qref, _, _ = cascade_commands(z.cascade, z.plant, u.E_u, g.cascade, params)
    dx = plant_deriv(z.plant, (e_dref, e_qref), u, params, omega_g=d.omega_g, V_g=d.V_g)
    dxs = cascade_deriv(z.cascade, z.plant, u.E_u, g.cascade, params)
    dxg = gfm_deriv(z.gfm, e, g.gfm)
    return FullState(dx, dxs, dxg)


def flat_start(refs, params, g=None, d=None):
    """Deterministic initial guess for :func:`find_equilibrium`.

    The AC side is initialized from a lossless power-flow estimate at the
    reference voltage with ``delta = 0``.  When gains are given, the
    integrators are back-solved so the controller commands match the
    initial currents and voltages.
    """
    d = d or Disturbance(refs.omega_g_ref, params.V_g)
    w = refs.omega_0
    v_d = refs.V_ref
    i_od = refs.P_ref / refs.V_ref
    i_oq = -refs.Q_ref / refs.V_ref
    i_d = i_od
    i_q = i_oq + params.C_f * w * v_d
    e_d = v_d - params.L_f * w * i_q
    e_q = params.L_f * w * i_d
    plant = PlantState(e_d, e_q, i_d, i_q, v_d, 0.0, i_od, i_oq, refs.V_dcref, 0.0)
    if g is None:
        return FullState(plant=plant)

    c, k = g.cascade, g.gfm
    xi_dc = 0.0
    if k.k_idc != 0.0:
        xi_dc = (i_d * e_d + i_q * e_q) / refs.V_dcref - refs.i_0
        xi_dc /= k.k_idc
    gfm = GfmState(xi_dc, 0.0, v_d - refs.E_0)
    E_u = v_d
    xi_vd = xi_vq = xi_id = xi_iq = 0.0
    if c.k_iv != 0.0:
        xi_vd = (i_d - c.k_pv * (E_u - v_d) - c.k_ffi * i_od) / c.k_iv
        xi_vq = (i_q - params.C_f * v_d - c.k_ffi * i_oq) / c.k_iv
    if c.k_ii != 0.0:
        xi_id = (e_d + params.L_f * i_q - c.k_ffv * v_d) / c.k_ii
        xi_iq = (e_q - params.L_f * i_d) / c.k_ii
    return FullState(plant, CascadeState(xi_vd, xi_vq, xi_id, xi_iq), gfm)


def find_equilibrium(refs, d, g, params, initial_guess=None, *, tol=1e-10, max_iter=50,
                     fd_step=1e-7, max_halvings=20):
    """Solve ``closedloop_deriv(z) = 0`` by damped Newton iteration.

    The Jacobian is formed by central differences.  A step is halved until
    the residual infinity norm decreases.

    Raises
    ------
    EquilibriumError
        On non-convergence within ``max_iter`` iterations or a singular
        Jacobian.
    """
    g.gfm.validate()
    if initial_guess is None:
        initial_guess = flat_start(refs, params, g, d)
    z = initial_guess.as_array() if isinstance(initial_guess, FullState) else np.asarray(initial_guess, float)
    if not z[8] > 0.0:
        raise ModelDomainError("initial guess must have v_dc > 0")
    p = pack_params(refs, d, g, params)
    f = kernel.rhs(z, p)
    res = np.max(np.abs(f))
    for it in range(max_iter):
        if res < tol:
            log.debug("equilibrium converged in %d iterations (residual %.3e)", it, res)
            return FullState.from_array(z)
        J = kernel.jacobian(z, p, fd_step)
        try:
            dz = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError as exc:
            raise EquilibriumError("singular Jacobian in equilibrium solve", res,
                                   FullState.from_array(z)) from exc
        if not np.all(np.isfinite(dz)):
            raise EquilibriumError("non-finite Newton step", res, FullState.from_array(z))
        step = 1.0
        for _ in range(max_halvings + 1):
            z_new = z + step * dz
            if z_new[8] > 0.0:
                f_new = kernel.rhs(z_new, p)
                res_new = np.max(np.abs(f_new))
                if res_new < res:
                    break
            step *= 0.5
        else:
            raise EquilibriumError(f"line search failed (residual {res:.3e})", res,
                                   FullState.from_array(z))
        z, f, res = z_new, f_new, res_new
    if res < tol:
        return FullState.from_array(z)
    raise EquilibriumError(f"no convergence after {max_iter} iterations (residual {res:.3e})",
                           res, FullState.from_array(z))


def steady_state_report(z, refs, d, g):
    """Outputs and plant inputs at a state, as plain floats keyed by name."""
    y, e, u = control_signals(z, refs, g)
    out = dict(zip(STATE_NAMES, z.as_array()))
    out.update({"p": y.p, "q": y.q, "V": y.V, "omega_u": u.omega_u, "E_u": u.E_u, "i_u": u.i_u})
    return out
