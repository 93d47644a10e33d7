"""Pure-Python closed-loop kernels.

Flat-array counterparts of the compiled kernels in ``_ckernel.pyx``; the
two must stay expression-for-expression identical.  Parameter layout is
defined in :mod:`mimogfm.kernel`.
"""
import math

import numpy as np

NX = 17
BLOWUP = 1e6


def _rhs(z, p):
    (e_d, e_q, i_d, i_q, v_d, v_q, i_od, i_oq, v_dc, delta,
     xi_vd, xi_vq, xi_id, xi_iq, xi_dc, xi_lp, xi_qv) = z
    (L_f, C_f, L_g, R_g, C_dc, T_sw, wb,
     V_dcref, P_ref, w_gref, Q_ref, V_ref, i_0, w_0, E_0,
     w_g, V_g,
     k_pv, k_iv, k_pi, k_ii, k_ffi, k_ffv,
     k_pdc, k_idc, k_12, k_14, k_15, k_21, k_22, k_24, k_31, k_32, k_34,
     D_p, D_q) = p
    if not v_dc > 0.0:
        return None

    pw = v_d * i_od + v_q * i_oq
    qr = -v_d * i_oq + v_q * i_od
    V = math.sqrt(v_d * v_d + v_q * v_q)
    e1 = V_dcref - v_dc
    e2 = P_ref - pw
    e4 = Q_ref - qr
    e5 = V_ref - V

    i_u = i_0 + k_pdc * e1 + k_idc * xi_dc + k_12 * e2 + k_14 * e4 + k_15 * e5
    w_u = w_0 + k_21 * e1 + xi_lp + k_24 * e4 + k_24 / D_q * e5
    E_u = E_0 + k_31 * e1 + k_32 * e2 + xi_qv

    i_dref = k_pv * (E_u - v_d) + k_iv * xi_vd - C_f * v_q + k_ffi * i_od
    i_qref = -k_pv * v_q + k_iv * xi_vq + C_f * v_d + k_ffi * i_oq
    e_dref = k_pi * (i_dref - i_d) + k_ii * xi_id - L_f * i_q + k_ffv * v_d
    e_qref = k_pi * (i_qref - i_q) + k_ii * xi_iq + L_f * i_d + k_ffv * v_q

    tau = 1.5 * T_sw
    return (
        (e_dref - e_d) / tau,
        (e_qref - e_q) / tau,
        wb / L_f * (e_d - v_d) + wb * w_u * i_q,
        wb / L_f * (e_q - v_q) - wb * w_u * i_d,
        wb / C_f * (i_d - i_od) + wb * w_u * v_q,
        wb / C_f * (i_q - i_oq) - wb * w_u * v_d,
        wb / L_g * (v_d - V_g * math.cos(delta)) - wb * R_g / L_g * i_od + wb * w_u * i_oq,
        wb / L_g * (v_q + V_g * math.sin(delta)) - wb * R_g / L_g * i_oq - wb * w_u * i_od,
        wb / C_dc * i_u - wb * (e_d * i_d + e_q * i_q) / (C_dc * v_dc),
        wb * (w_u - w_g),
        E_u - v_d,
        -v_q,
        i_dref - i_d,
        i_qref - i_q,
        e1,
        k_22 * (D_p * e2 - xi_lp),
        k_34 * e4 + k_34 / D_q * e5,
    )


def rhs(z, p):
    """Closed-loop derivative; raises ValueError on DC-link collapse."""
    out = _rhs(tuple(map(float, z)), tuple(map(float, p)))
    if out is None:
        raise ValueError("DC-link collapse: v_dc <= 0")
    return np.array(out)


def jacobian(z, p, h):
    """Central finite-difference Jacobian of :func:`rhs` with step ``h``."""
    z = [float(v) for v in z]
    p = tuple(map(float, p))
    J = np.empty((NX, NX))
    for k in range(NX):
        zp = list(z)
        zm = list(z)
        zp[k] += h
        zm[k] -= h
        fp = _rhs(zp, p)
        fm = _rhs(zm, p)
        if fp is None or fm is None:
            raise ValueError("DC-link collapse: v_dc <= 0")
        for i in range(NX):
            J[i, k] = (fp[i] - fm[i]) / (2.0 * h)
    return J


def _bad(z):
    if not z[8] > 0.0:
        return True
    for v in z:
        if not abs(v) <= BLOWUP:
            return True
    return False


def rk4(z0, p, h, n_steps, every, out):
    """Fixed-step RK4 from ``z0`` writing every ``every``-th state into ``out``.

    ``out`` has ``n_steps // every + 1`` rows; row 0 is ``z0``.  Returns the
    number of completed steps, which is smaller than ``n_steps`` when the
    state leaves the admissible region.
    """
    p = tuple(map(float, p))
    z = [float(v) for v in z0]
    out[0, :] = z
    row = 1
    h2 = 0.5 * h
    h6 = h / 6.0
    rng = range(NX)
    for step in range(n_steps):
        k1 = _rhs(z, p)
        if k1 is None:
            return step
        k2 = _rhs([z[i] + h2 * k1[i] for i in rng], p)
        if k2 is None:
            return step
        k3 = _rhs([z[i] + h2 * k2[i] for i in rng], p)
        if k3 is None:
            return step
        k4 = _rhs([z[i] + h * k3[i] for i in rng], p)
        if k4 is None:
            return step
        z = [z[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in rng]
        if _bad(z):
            return step
        if (step + 1) % every == 0:
            out[row, :] = z
            row += 1
    return n_steps
