"""Nonlinear time-domain simulation of step scenarios and transient metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernel
from .closedloop import Disturbance, find_equilibrium, pack_params

DEFAULT_H = 1e-5

REF_QUANTITIES = ("P_ref", "Q_ref", "V_ref", "V_dcref")
DIST_QUANTITIES = ("omega_g", "V_g")

TRACE_COLUMNS = ("t", "v_dc", "p", "omega_u", "q", "V",
                 "delta", "v_d", "v_q", "i_od", "i_oq", "i_u", "E_u")


class SimulationError(RuntimeError):
    """Integration left the admissible region; ``time`` is the failure time."""

    def __init__(self, msg, time):
        super().__init__(msg)
        self.time = time


class NotSettledError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    quantity: str
    pre: float
    post: float
    duration: float = 2.0
    step_time: float = 0.2
    sample_period: float = 1e-4

    def __post_init__(self):
        if self.quantity not in REF_QUANTITIES + DIST_QUANTITIES:
            raise ValueError(f"unknown stepped quantity {self.quantity!r}")
        if not 0.0 < self.step_time < self.duration:
            raise ValueError("step time must lie strictly inside the simulated interval")
        if not self.sample_period > 0.0:
            raise ValueError("sample period must be positive")

    def apply(self, refs, d, value):
        if self.quantity in REF_QUANTITIES:
            return replace(refs, **{self.quantity: value}), d
        return refs, replace(d, **{self.quantity: value})


STEP_SCENARIOS = {
    "pref_step": Scenario("pref_step", "P_ref", 0.5, 1.0),
    # 50 Hz -> 49.9 Hz
    "wg_step": Scenario("wg_step", "omega_g", 1.0, 0.998),
}


@dataclass
class SimTrace:
    columns: tuple
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError("data shape does not match the column schema")
        if len(self.data) > 1 and not np.all(np.diff(self.data[:, 0]) > 0):
            raise ValueError("time column must be strictly increasing")

    def __getitem__(self, name):
        return self.data[:, self.columns.index(name)]

    @property
    def t(self):
        return self["t"]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            for key, val in self.meta.items():
                fh.write(f"# {key}={val}\n")
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        meta = {}
        rows = []
        header = None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key] = val
                elif header is None:
                    header = tuple(line.split(","))
                else:
                    rows.append([float(v) for v in line.split(",")])
        if header is None:
            raise ValueError(f"{path}: missing header row")
        return cls(header, np.array(rows).reshape(len(rows), len(header)), meta)


def _signals(Z, refs, g):
    """Outputs and controller commands for an array of full states."""
    c = g.gfm
    v_d, v_q, i_od, i_oq, v_dc = Z[:, 4], Z[:, 5], Z[:, 6], Z[:, 7], Z[:, 8]
    p = v_d * i_od + v_q * i_oq
    q = -v_d * i_oq + v_q * i_od
    V = np.sqrt(v_d * v_d + v_q * v_q)
    e1 = refs.V_dcref - v_dc
    e2 = refs.P_ref - p
    e4 = refs.Q_ref - q
    e5 = refs.V_ref - V
    i_u = refs.i_0 + c.k_pdc * e1 + c.k_idc * Z[:, 14] + c.k_12 * e2 + c.k_14 * e4 + c.k_15 * e5
    w_u = refs.omega_0 + c.k_21 * e1 + Z[:, 15] + c.k_24 * e4 + c.k_24 / c.D_q * e5
    E_u = refs.E_0 + c.k_31 * e1 + c.k_32 * e2 + Z[:, 16]
    return {"v_dc": v_dc, "p": p, "omega_u": w_u, "q": q, "V": V, "delta": Z[:, 9],
            "v_d": v_d, "v_q": v_q, "i_od": i_od, "i_oq": i_oq, "i_u": i_u, "E_u": E_u}


def _n_steps(interval, h, what):
    n = round(interval / h)
    if n < 1 or abs(n * h - interval) > 1e-9 * max(1.0, interval):
        raise ValueError(f"{what} ({interval}) is not an integer multiple of h ({h})")
    return n


def simulate(scn, g, refs, params, d=None, h=DEFAULT_H, label="", return_states=False):
    """Integrate the closed loop through a step scenario with fixed-step RK4.

    The run starts at the pre-step equilibrium; the stepped quantity jumps
    at ``scn.step_time`` (right-continuous), which is a point of the
    integration grid.
    """
    d = d or Disturbance(1.0, params.V_g)
    refs_pre, d_pre = scn.apply(refs, d, scn.pre)
    refs_post, d_post = scn.apply(refs, d, scn.post)
    every = _n_steps(scn.sample_period, h, "sample period")
    n_pre = _n_steps(scn.step_time, h, "step time")
    n_total = _n_steps(scn.duration, h, "duration")
    if n_pre % every or n_total % every:
        raise ValueError("step time and duration must be multiples of the sample period")

    z0 = find_equilibrium(refs_pre, d_pre, g, params).as_array()
    segments = []
    z = z0
    for prm, n in ((pack_params(refs_pre, d_pre, g, params), n_pre),
                   (pack_params(refs_post, d_post, g, params), n_total - n_pre)):
        out = np.zeros((n // every + 1, kernel.NX))
        done = kernel.rk4(z, prm, h, n, every, out)
        if done < n:
            t_fail = (sum(len(s) - 1 for s in segments) * every + done + 1) * h
            raise SimulationError(f"integration blow-up at t = {t_fail:.6g} s", t_fail)
        segments.append(out)
        z = out[-1]

    pre, post = segments
    t = np.arange(n_total // every + 1) * (every * h)
    # the sample at the step instant reports post-step references
    Z = np.vstack([pre[:-1], post])
    n_pre_rows = len(pre) - 1
    sig_pre = _signals(Z[:n_pre_rows], refs_pre, g)
    sig_post = _signals(Z[n_pre_rows:], refs_post, g)
    cols = [t] + [np.concatenate([sig_pre[k], sig_post[k]]) for k in TRACE_COLUMNS[1:]]
    meta = {"scenario": scn.name, "quantity": scn.quantity, "pre": scn.pre, "post": scn.post,
            "step_time": scn.step_time, "h": h, "gains": label}
    trace = SimTrace(TRACE_COLUMNS, np.column_stack(cols), meta)
    if return_states:
        return trace, Z
    return trace


@dataclass(frozen=True)
class Metrics:
    overshoot: float
    settling_time: float
    steady_error: float


def metrics(trace, channel, final_value, step_time=None, band=0.02):
    """Overshoot, 2 % settling time and steady-state error of a step response.

    Overshoot is the largest excursion beyond ``final_value`` in the
    direction of the step, divided by the step size.  The settling time is
    measured from the step to the last exit from the band
    ``+/- band * |step|`` around ``final_value``, interpolated linearly
    between samples.
    """
    if step_time is None:
        step_time = float(trace.meta.get("step_time", trace.t[0]))
    t = trace.t
    y = trace[channel]
    k0 = int(np.searchsorted(t, step_time - 1e-12))
    t, y = t[k0:], y[k0:]
    step = final_value - y[0]
    if step != 0.0:
        overshoot = max(0.0, float(np.max(math.copysign(1.0, step) * (y - final_value)))) / abs(step)
        tol = band * abs(step)
    else:
        overshoot = 0.0
        tol = band * max(abs(final_value), 1e-12)
    err = np.abs(y - final_value)
    tail = y[int(0.9 * len(y)):]
    if np.any(np.abs(tail - final_value) > tol):
        raise NotSettledError(f"{channel} has not settled within the last 10% of the trace")
    outside = np.nonzero(err > tol)[0]
    if outside.size == 0:
        settling = 0.0
    else:
        k = outside[-1]
        # linear interpolation of the band crossing between samples k and k+1
        e0, e1 = err[k] - tol, err[k + 1] - tol
        frac = e0 / (e0 - e1) if e0 != e1 else 0.0
        settling = float(t[k] + frac * (t[k + 1] - t[k]) - t[0])
    steady = float(np.mean(tail) - final_value)
    return Metrics(overshoot, settling, steady)


@dataclass(frozen=True)
class StepReport:
    h: float
    max_deviation: float
    worst_column: str


def step_consistency(h, scn, g, refs, params, d=None,
                     columns=("v_dc", "p", "omega_u", "q", "V")):
    """Largest output difference between runs at ``h`` and ``h/2``."""
    a = simulate(scn, g, refs, params, d, h=h)
    b = simulate(scn, g, refs, params, d, h=h / 2)
    devs = {c: float(np.max(np.abs(a[c] - b[c]))) for c in columns}
    worst = max(devs, key=devs.get)
    return StepReport(h, devs[worst], worst)
