# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop kernels; mirror of ``_pykernel.py``."""
import numpy as np
from libc.math cimport cos, sin, sqrt, fabs

cdef enum:
    NX = 17
    NP = 36

cdef double BLOWUP = 1e6


cdef int _rhs(const double* z, const double* p, double* f) noexcept nogil:
    cdef double e_d = z[0], e_q = z[1], i_d = z[2], i_q = z[3]
    cdef double v_d = z[4], v_q = z[5], i_od = z[6], i_oq = z[7]
    cdef double v_dc = z[8], delta = z[9]
    cdef double xi_vd = z[10], xi_vq = z[11], xi_id = z[12], xi_iq = z[13]
    cdef double xi_dc = z[14], xi_lp = z[15], xi_qv = z[16]

    cdef double L_f = p[0], C_f = p[1], L_g = p[2], R_g = p[3], C_dc = p[4]
    cdef double T_sw = p[5], wb = p[6]
    cdef double V_dcref = p[7], P_ref = p[8], Q_ref = p[10], V_ref = p[11]
    cdef double i_0 = p[12], w_0 = p[13], E_0 = p[14]
    cdef double w_g = p[15], V_g = p[16]
    cdef double k_pv = p[17], k_iv = p[18], k_pi = p[19], k_ii = p[20]
    cdef double k_ffi = p[21], k_ffv = p[22]
    cdef double k_pdc = p[23], k_idc = p[24], k_12 = p[25], k_14 = p[26], k_15 = p[27]
    cdef double k_21 = p[28], k_22 = p[29], k_24 = p[30], k_31 = p[31], k_32 = p[32]
    cdef double k_34 = p[33], D_p = p[34], D_q = p[35]

    cdef double pw, qr, V, e1, e2, e4, e5, i_u, w_u, E_u
    cdef double i_dref, i_qref, e_dref, e_qref, tau

    if not v_dc > 0.0:
        return -1

    pw = v_d * i_od + v_q * i_oq
    qr = -v_d * i_oq + v_q * i_od
    V = sqrt(v_d * v_d + v_q * v_q)
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
    f[0] = (e_dref - e_d) / tau
    f[1] = (e_qref - e_q) / tau
    f[2] = wb / L_f * (e_d - v_d) + wb * w_u * i_q
    f[3] = wb / L_f * (e_q - v_q) - wb * w_u * i_d
    f[4] = wb / C_f * (i_d - i_od) + wb * w_u * v_q
    f[5] = wb / C_f * (i_q - i_oq) - wb * w_u * v_d
    f[6] = wb / L_g * (v_d - V_g * cos(delta)) - wb * R_g / L_g * i_od + wb * w_u * i_oq
    f[7] = wb / L_g * (v_q + V_g * sin(delta)) - wb * R_g / L_g * i_oq - wb * w_u * i_od
    f[8] = wb / C_dc * i_u - wb * (e_d * i_d + e_q * i_q) / (C_dc * v_dc)
    f[9] = wb * (w_u - w_g)
    f[10] = E_u - v_d
    f[11] = -v_q
    f[12] = i_dref - i_d
    f[13] = i_qref - i_q
    f[14] = e1
    f[15] = k_22 * (D_p * e2 - xi_lp)
    f[16] = k_34 * e4 + k_34 / D_q * e5
    return 0


def _as_vec(a, n):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"expected shape ({n},), got {arr.shape}")
    return arr


def rhs(z, p):
    """Closed-loop derivative; raises ValueError on DC-link collapse."""
    cdef double[::1] zv = _as_vec(z, NX)
    cdef double[::1] pv = _as_vec(p, NP)
    out = np.empty(NX)
    cdef double[::1] ov = out
    if _rhs(&zv[0], &pv[0], &ov[0]) != 0:
        raise ValueError("DC-link collapse: v_dc <= 0")
    return out


def jacobian(z, p, double h):
    """Central finite-difference Jacobian of :func:`rhs` with step ``h``."""
    cdef double[::1] pv = _as_vec(p, NP)
    cdef double[::1] zp = _as_vec(z, NX).copy()
    cdef double[::1] zm = _as_vec(z, NX).copy()
    cdef double fp[NX]
    cdef double fm[NX]
    J = np.empty((NX, NX))
    cdef double[:, ::1] Jv = J
    cdef int i, k, bad = 0
    cdef double zk
    with nogil:
        for k in range(NX):
            zk = zp[k]
            zp[k] = zk + h
            zm[k] = zk - h
            if _rhs(&zp[0], &pv[0], fp) != 0 or _rhs(&zm[0], &pv[0], fm) != 0:
                bad = 1
                break
            for i in range(NX):
                Jv[i, k] = (fp[i] - fm[i]) / (2.0 * h)
            zp[k] = zk
            zm[k] = zk
    if bad:
        raise ValueError("DC-link collapse: v_dc <= 0")
    return J


cdef bint _bad(const double* z) noexcept nogil:
    cdef int i
    if not z[8] > 0.0:
        return True
    for i in range(NX):
        if not fabs(z[i]) <= BLOWUP:
            return True
    return False


def rk4(z0, p, double h, long n_steps, long every, double[:, ::1] out):
    """Fixed-step RK4 from ``z0`` writing every ``every``-th state into ``out``.

    Returns the number of completed steps.
    """
    cdef double[::1] pv = _as_vec(p, NP)
    cdef double[::1] z0v = _as_vec(z0, NX)
    cdef double z[NX]
    cdef double y[NX]
    cdef double k1[NX]
    cdef double k2[NX]
    cdef double k3[NX]
    cdef double k4[NX]
    cdef double h2 = 0.5 * h, h6 = h / 6.0
    cdef long step, row = 1, done = n_steps
    cdef int i
    for i in range(NX):
        z[i] = z0v[i]
        out[0, i] = z[i]
    with nogil:
        for step in range(n_steps):
            if _rhs(z, &pv[0], k1) != 0:
                done = step
                break
            for i in range(NX):
                y[i] = z[i] + h2 * k1[i]
            if _rhs(y, &pv[0], k2) != 0:
                done = step
                break
            for i in range(NX):
                y[i] = z[i] + h2 * k2[i]
            if _rhs(y, &pv[0], k3) != 0:
                done = step
                break
            for i in range(NX):
                y[i] = z[i] + h * k3[i]
            if _rhs(y, &pv[0], k4) != 0:
                done = step
                break
            for i in range(NX):
                z[i] = z[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if _bad(z):
                done = step
                break
            if (step + 1) % every == 0:
                for i in range(NX):
                    out[row, i] = z[i]
                row += 1
    return done
