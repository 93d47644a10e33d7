"""Nonlinear per-unit dq-frame model of the converter power stage.

The model covers the LC filter, the inductive grid line, the DC link fed by
a controlled current source and the PWM/sampling delay, written in the
frame rotating at the controller frequency ``omega_u``.  All time
derivatives are per second; the ``omega_b`` factors carry the per-unit time
scaling while ``T_sw`` stays in seconds.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np


class ModelDomainError(ValueError):
    """Raised when a model is evaluated outside its physical domain."""


def _check_finite(name, values):
    for v in values:
        if not math.isfinite(v):
            raise ModelDomainError(f"non-finite value in {name}: {values!r}")


@dataclass(frozen=True)
class PlantParams:
    L_f: float
    C_f: float
    L_g: float
    R_g: float
    C_dc: float
    T_sw: float
    omega_b: float = 100.0 * math.pi
    V_g: float = 1.0
    omega_g: float = 1.0

    def __post_init__(self):
        _check_finite("PlantParams", astuple(self))
        for name in ("L_f", "C_f", "L_g", "C_dc", "T_sw", "omega_b", "V_g"):
            if getattr(self, name) <= 0.0:
                raise ModelDomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.R_g < 0.0:
            raise ModelDomainError(f"R_g must be non-negative, got {self.R_g}")


class _Vector:
    """Mixin for flat float records with a fixed field order."""

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (len(fields(cls)),):
            raise ValueError(f"{cls.__name__} expects {len(fields(cls))} values, got shape {arr.shape}")
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class PlantState(_Vector):
    e_d: float = 0.0
    e_q: float = 0.0
    i_d: float = 0.0
    i_q: float = 0.0
    v_d: float = 0.0
    v_q: float = 0.0
    i_od: float = 0.0
    i_oq: float = 0.0
    v_dc: float = 1.0
    delta: float = 0.0


@dataclass(frozen=True)
class ControlInput(_Vector):
    i_u: float
    omega_u: float
    E_u: float


@dataclass(frozen=True)
class PlantOutputs(_Vector):
    v_dc: float
    p: float
    omega_u: float
    q: float
    V: float


def plant_deriv(x, e_ref, u, params, omega_g=None, V_g=None):
    """Time derivative of the ten power-stage states.

    Parameters
    ----------
    x : PlantState
    e_ref : tuple of float
        Converter voltage references ``(e_dref, e_qref)``.
    u : ControlInput
    params : PlantParams
    omega_g, V_g : float, optional
        Grid frequency and voltage overriding the values in ``params``;
        the closed loop passes its disturbance vector here.

    Returns
    -------
    PlantState
        Per-second rates in the same field order.
    """
    _check_finite("PlantState", astuple(x))
    _check_finite("ControlInput", astuple(u))
    _check_finite("e_ref", tuple(e_ref))
    if x.v_dc <= 0.0:
        raise ModelDomainError(f"DC-link collapse: v_dc = {x.v_dc}")
    wg = params.omega_g if omega_g is None else omega_g
    vg = params.V_g if V_g is None else V_g
    wb = params.omega_b
    wu = u.omega_u
    tau = 1.5 * params.T_sw
    e_dref, e_qref = e_ref

    de_d = (e_dref - x.e_d) / tau
    de_q = (e_qref - x.e_q) / tau
    di_d = wb / params.L_f * (x.e_d - x.v_d) + wb * wu * x.i_q
    di_q = wb / params.L_f * (x.e_q - x.v_q) - wb * wu * x.i_d
    dv_d = wb / params.C_f * (x.i_d - x.i_od) + wb * wu * x.v_q
    dv_q = wb / params.C_f * (x.i_q - x.i_oq) - wb * wu * x.v_d
    di_od = (wb / params.L_g * (x.v_d - vg * math.cos(x.delta))
             - wb * params.R_g / params.L_g * x.i_od + wb * wu * x.i_oq)
    di_oq = (wb / params.L_g * (x.v_q + vg * math.sin(x.delta))
             - wb * params.R_g / params.L_g * x.i_oq - wb * wu * x.i_od)
    dv_dc = (wb / params.C_dc * u.i_u
             - wb * (x.e_d * x.i_d + x.e_q * x.i_q) / (params.C_dc * x.v_dc))
    ddelta = wb * (wu - wg)
    return PlantState(de_d, de_q, di_d, di_q, dv_d, dv_q, di_od, di_oq, dv_dc, ddelta)


def plant_outputs(x, u):
    """Return ``(v_dc, p, omega_u, q, V)`` for a plant state."""
    p = x.v_d * x.i_od + x.v_q * x.i_oq
    q = -x.v_d * x.i_oq + x.v_q * x.i_od
    V = math.sqrt(x.v_d * x.v_d + x.v_q * x.v_q)
    return PlantOutputs(x.v_dc, p, u.omega_u, q, V)


@dataclass(frozen=True)
class SIParams:
    """Physical parameter record in SI units.

    Inductances in H, capacitances in F, resistance in ohm, switching
    frequency in Hz, voltages as line-to-line RMS in V.
    """

    L_f: float
    C_f: float
    L_g: float
    C_dc: float
    f_sw: float
    R_g_pu: float = 0.01
    V_g: float = 380.0
    f_g: float = 50.0


@dataclass(frozen=True)
class Bases:
    S_n: float = 5000.0
    V_n: float = 380.0
    omega_n: float = 100.0 * math.pi
    V_dc: float = 700.0


def params_from_si(si, bases=Bases()):
    """Per-unitize an SI parameter record.

    AC elements use the impedance base ``V_n**2 / S_n`` at ``omega_n``.  The
    DC capacitor uses the DC voltage base and ``S_n``, which gives
    ``C_dc_pu = omega_n * C_dc * V_dc**2 / S_n``.
    """
    for name in ("S_n", "V_n", "omega_n", "V_dc"):
        v = getattr(bases, name)
        if not (math.isfinite(v) and v > 0.0):
            raise ModelDomainError(f"base {name} must be positive, got {v}")
    z_base = bases.V_n ** 2 / bases.S_n
    wn = bases.omega_n
    return PlantParams(
        L_f=wn * si.L_f / z_base,
        C_f=wn * si.C_f * z_base,
        L_g=wn * si.L_g / z_base,
        R_g=si.R_g_pu,
        C_dc=wn * si.C_dc * bases.V_dc ** 2 / bases.S_n,
        T_sw=1.0 / si.f_sw,
        omega_b=wn,
        V_g=si.V_g / bases.V_n,
        omega_g=2.0 * math.pi * si.f_g / wn,
    )


TABLE1_SI = SIParams(L_f=3e-3, C_f=5e-6, L_g=8e-3, C_dc=500e-6, f_sw=10e3)


def table1_params(R_g=0.01):
    """Per-unit parameters of the 5 kW / 380 V experimental setup."""
    si = SIParams(**{**TABLE1_SI.__dict__, "R_g_pu": R_g})
    return params_from_si(si)
