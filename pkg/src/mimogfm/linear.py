"""Linearization of the closed loop and LTI frequency-domain tools.

The synthesis channels are ``w = [dP_ref, domega_g]`` and
``z = [dP_ref - domega_g/D_p - dp, dp]``.  Gains are not pulled out into a
separate static block: the closed loop is re-linearized for every gain
vector, which yields the same ``T_ij(s)`` as closing the open
interconnection with a diagonal gain matrix.  :func:`lft_closed_loop`
builds that interconnection explicitly so the equivalence can be checked.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .closedloop import STATE_NAMES, pack_params

W_NAMES = ("dP_ref", "domega_g")
Z_NAMES = ("droop_error", "dp")


class UnstableSystemError(ArithmeticError):
    pass


@dataclass
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_names: tuple = ()
    output_names: tuple = ()
    state_names: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = self.D.shape
        if self.A.size == 0:
            self.A = np.zeros((0, 0))
        n = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(n, m)
        self.C = np.asarray(self.C, dtype=float).reshape(p, n)
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        for name in "ABCD":
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in {name}")
        if not self.input_names:
            self.input_names = tuple(f"u{i}" for i in range(m))
        if not self.output_names:
            self.output_names = tuple(f"y{i}" for i in range(p))

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def shape(self):
        """``(outputs, inputs)``."""
        return self.D.shape

    def channel(self, i, j):
        """SISO subsystem from input ``j`` to output ``i`` (zero-based)."""
        return LtiSystem(self.A, self.B[:, [j]], self.C[[i], :], self.D[[i]][:, [j]],
                         (self.input_names[j],), (self.output_names[i],), self.state_names)

    def scaled(self, alpha):
        return LtiSystem(self.A, self.B, alpha * self.C, alpha * self.D,
                         self.input_names, self.output_names, self.state_names)


def series(first, second):
    """Cascade ``second(s) @ first(s)``: the output of ``first`` drives ``second``."""
    n1, n2 = first.n_states, second.n_states
    A = np.block([[first.A, np.zeros((n1, n2))],
                  [second.B @ first.C, second.A]])
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return LtiSystem(A, B, C, D, first.input_names, second.output_names)


def _fd_columns(fun, x0, step):
    cols = []
    for k in range(len(x0)):
        dx = np.zeros(len(x0))
        dx[k] = step
        cols.append((fun(x0 + dx) - fun(x0 - dx)) / (2.0 * step))
    return np.column_stack(cols)


def jacobian_fd(fun, x0, step=1e-7):
    """Central-difference Jacobian of a vector function."""
    return _fd_columns(fun, np.asarray(x0, dtype=float), step)


def _power(z):
    return z[4] * z[6] + z[5] * z[7]


def linearize(z_eq, refs, d, g, params, step=1e-7):
    """Linear channel model of the closed loop at an equilibrium.

    ``A`` and ``B`` come from central differences of the closed-loop
    vector field with respect to the state and to ``(P_ref, omega_g)``;
    the output rows differentiate the active power the same way.
    """
    z0 = z_eq.as_array() if hasattr(z_eq, "as_array") else np.asarray(z_eq, dtype=float)
    prm = pack_params(refs, d, g, params)
    A = kernel.jacobian(z0, prm, step)
    i_pref = kernel.PARAM_INDEX["P_ref"]
    i_wg = kernel.PARAM_INDEX["omega_g"]

    def f_w(w):
        q = prm.copy()
        q[i_pref] += w[0]
        q[i_wg] += w[1]
        return kernel.rhs(z0, q)

    B = jacobian_fd(f_w, np.zeros(2), step)
    dp = jacobian_fd(lambda z: np.array([_power(z)]), z0, step)[0]
    inv_dp = 1.0 / g.gfm.D_p
    C = np.vstack([-dp, dp])
    D = np.array([[1.0, -inv_dp], [0.0, 0.0]])
    return LtiSystem(A, B, C, D, W_NAMES, Z_NAMES, STATE_NAMES)


def spectral_abscissa(sys):
    """Largest real part of the eigenvalues of ``A`` (``-inf`` for a static system)."""
    A = sys.A if isinstance(sys, LtiSystem) else np.asarray(sys, dtype=float)
    if A.size == 0:
        return -math.inf
    if not np.all(np.isfinite(A)):
        raise np.linalg.LinAlgError("non-finite state matrix")
    return float(np.max(np.linalg.eigvals(A).real))


def freq_response(sys, omega):
    """``C (j omega I - A)^-1 B + D`` at one frequency (rad/s)."""
    n = sys.n_states
    if n == 0:
        return sys.D.astype(complex)
    M = 1j * omega * np.eye(n) - sys.A
    try:
        X = np.linalg.solve(M, sys.B.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"j*{omega} is an eigenvalue of A") from exc
    return sys.C @ X + sys.D


def freq_response_grid(sys, omegas):
    """Frequency response on an array of frequencies, shape ``(len(omegas), p, m)``."""
    omegas = np.asarray(omegas, dtype=float)
    n = sys.n_states
    p, m = sys.shape
    if n == 0:
        return np.broadcast_to(sys.D.astype(complex), (len(omegas), p, m)).copy()
    M = 1j * omegas[:, None, None] * np.eye(n)[None] - sys.A[None]
    rhs = np.broadcast_to(sys.B.astype(complex), (len(omegas), n, m))
    X = np.linalg.solve(M, rhs)
    return np.einsum("pn,knm->kpm", sys.C, X) + sys.D[None]


def export_csv(sys, path):
    """Write ``A``, ``B``, ``C``, ``D`` as labelled blocks in one CSV file."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for name in "ABCD":
            mat = getattr(sys, name)
            w.writerow([f"# {name}", mat.shape[0], mat.shape[1]])
            for row in mat:
                w.writerow([repr(float(v)) for v in row])


def read_csv(path):
    """Inverse of :func:`export_csv`."""
    blocks = {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    i = 0
    while i < len(rows):
        head = rows[i]
        name, r, c = head[0][2:], int(head[1]), int(head[2])
        data = [[float(v) for v in rows[i + 1 + k]] for k in range(r)]
        blocks[name] = np.array(data, dtype=float).reshape(r, c)
        i += 1 + r
    return LtiSystem(blocks["A"], blocks["B"], blocks["C"], blocks["D"])


# -- explicit interconnection with the gains pulled out -----------------------

# Diagonal structure of the static gain block; repeated names act on d/q pairs.
K_STRUCTURE = (
    "k_pdc", "k_idc", "k_21", "k_31", "k_12", "k_22", "k_32", "k_14", "k_15",
    "k_24", "k_24", "k_34", "k_34", "k_ffi", "k_ffi", "k_pv", "k_pv",
    "k_iv", "k_iv", "k_ffv", "k_ffv", "k_pi", "k_pi", "k_ii", "k_ii",
)


def _open_loop(z, w, u_hat, refs, d, g, params):
    """Vector field with every tunable gain replaced by an external input.

    Returns ``(dz, y_hat, p)`` where ``y_hat`` are the signals that the
    gains multiply and ``u_hat`` are the gain outputs.
    """
    (e_d, e_q, i_d, i_q, v_d, v_q, i_od, i_oq, v_dc, delta,
     xi_vd, xi_vq, xi_id, xi_iq, xi_dc, xi_lp, xi_qv) = z
    P_ref = refs.P_ref + w[0]
    w_g = d.omega_g + w[1]
    D_p, D_q = g.gfm.D_p, g.gfm.D_q
    L_f, C_f, wb = params.L_f, params.C_f, params.omega_b
    (u_pdc, u_idc, u_21, u_31, u_12, u_22, u_32, u_14, u_15,
     u_24a, u_24b, u_34a, u_34b, u_ffid, u_ffiq, u_pvd, u_pvq,
     u_ivd, u_ivq, u_ffvd, u_ffvq, u_pid, u_piq, u_iid, u_iiq) = u_hat

    pw = v_d * i_od + v_q * i_oq
    qr = -v_d * i_oq + v_q * i_od
    V = math.sqrt(v_d * v_d + v_q * v_q)
    e1 = refs.V_dcref - v_dc
    e2 = P_ref - pw
    e4 = refs.Q_ref - qr
    e5 = refs.V_ref - V

    i_u = refs.i_0 + u_pdc + u_idc + u_12 + u_14 + u_15
    w_u = refs.omega_0 + u_21 + xi_lp + u_24a + u_24b
    E_u = refs.E_0 + u_31 + u_32 + xi_qv
    i_dref = u_pvd + u_ivd - C_f * v_q + u_ffid
    i_qref = u_pvq + u_ivq + C_f * v_d + u_ffiq
    e_dref = u_pid + u_iid - L_f * i_q + u_ffvd
    e_qref = u_piq + u_iiq + L_f * i_d + u_ffvq

    tau = 1.5 * params.T_sw
    dz = np.array([
        (e_dref - e_d) / tau,
        (e_qref - e_q) / tau,
        wb / L_f * (e_d - v_d) + wb * w_u * i_q,
        wb / L_f * (e_q - v_q) - wb * w_u * i_d,
        wb / C_f * (i_d - i_od) + wb * w_u * v_q,
        wb / C_f * (i_q - i_oq) - wb * w_u * v_d,
        wb / params.L_g * (v_d - d.V_g * math.cos(delta)) - wb * params.R_g / params.L_g * i_od + wb * w_u * i_oq,
        wb / params.L_g * (v_q + d.V_g * math.sin(delta)) - wb * params.R_g / params.L_g * i_oq - wb * w_u * i_od,
        wb / params.C_dc * i_u - wb * (e_d * i_d + e_q * i_q) / (params.C_dc * v_dc),
        wb * (w_u - w_g),
        E_u - v_d,
        -v_q,
        i_dref - i_d,
        i_qref - i_q,
        e1,
        u_22,
        u_34a + u_34b,
    ])
    y_hat = np.array([
        e1, xi_dc, e1, e1, e2, D_p * e2 - xi_lp, e2, e4, e5,
        e4, e5 / D_q, e4, e5 / D_q, i_od, i_oq, E_u - v_d, -v_q,
        xi_vd, xi_vq, v_d, v_q, i_dref - i_d, i_qref - i_q, xi_id, xi_iq,
    ])
    return dz, y_hat, pw


def lft_closed_loop(z_eq, refs, d, g, params, step=1e-7):
    """Close the linearized gain-free interconnection with ``K = diag(gains)``.

    The open interconnection ``G`` maps ``(w, u_hat)`` to ``(z, y_hat)``
    and is linearized at the equilibrium point; the result must coincide
    with :func:`linearize` for the same gains.
    """
    z0 = z_eq.as_array() if hasattr(z_eq, "as_array") else np.asarray(z_eq, dtype=float)
    gains = g.as_dict()
    kdiag = np.array([gains[name] for name in K_STRUCTURE])
    K = np.diag(kdiag)
    nz, nw, nu = len(z0), 2, len(K_STRUCTURE)
    w0 = np.zeros(nw)

    # operating point of the gain outputs: u_hat = K y_hat (solved by iteration)
    u0 = np.zeros(nu)
    for _ in range(len(K_STRUCTURE) + 2):
        _, y_hat, _ = _open_loop(z0, w0, u0, refs, d, g, params)
        u0 = K @ y_hat

    def full(v):
        z = v[:nz]
        w = v[nz:nz + nw]
        u = v[nz + nw:]
        dz, y_hat, pw = _open_loop(z, w, u, refs, d, g, params)
        return np.concatenate([dz, y_hat, [pw]])

    J = jacobian_fd(full, np.concatenate([z0, w0, u0]), step)
    Agg = J[:nz, :nz]
    Bw = J[:nz, nz:nz + nw]
    Bu = J[:nz, nz + nw:]
    Cy = J[nz:nz + nu, :nz]
    Dyw = J[nz:nz + nu, nz:nz + nw]
    Dyu = J[nz:nz + nu, nz + nw:]
    cp = J[-1, :nz]
    # u = K (Cy x + Dyw w + Dyu u)  =>  u = (I - K Dyu)^-1 K (Cy x + Dyw w)
    M = np.linalg.solve(np.eye(nu) - K @ Dyu, K)
    A = Agg + Bu @ M @ Cy
    B = Bw + Bu @ M @ Dyw
    inv_dp = 1.0 / g.gfm.D_p
    C = np.vstack([-cp, cp])
    D = np.array([[1.0, -inv_dp], [0.0, 0.0]])
    return LtiSystem(A, B, C, D, W_NAMES, Z_NAMES, STATE_NAMES)
