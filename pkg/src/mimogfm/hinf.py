"""H-infinity norms, the weighted channel objective and fixed-structure tuning.

The objective for a gain vector is the largest weighted channel norm::

    max(||W11 T11||, ||W21 T21||, ||W12 T12||)

which equals the H-infinity norm of the block-diagonal collection of the
scalar channels.  Gains are tuned by a derivative-free pattern search.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .closedloop import THETA_NAMES, EquilibriumError, find_equilibrium
from .linear import LtiSystem, UnstableSystemError, freq_response, freq_response_grid, linearize, series, spectral_abscissa
from .plant import ModelDomainError

log = logging.getLogger(__name__)

GRID = np.logspace(-4, 6, 400)
PENALTY = 1e9
PENALTY_INVALID = 1e12


class InfeasibleStartError(RuntimeError):
    pass


@dataclass(frozen=True)
class Weight:
    """Rational weight with coefficients in ascending powers of ``s``."""

    num: tuple
    den: tuple

    def __post_init__(self):
        num = tuple(float(c) for c in self.num)
        den = tuple(float(c) for c in self.den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if not any(den):
            raise ValueError("denominator is identically zero")
        if _degree(num) > _degree(den):
            raise ValueError(f"improper weight: deg num {_degree(num)} > deg den {_degree(den)}")

    def __call__(self, s):
        return np.polyval(self.num[::-1], s) / np.polyval(self.den[::-1], s)

    def ss(self):
        """Controllable-canonical realization as an :class:`LtiSystem`."""
        n = _degree(self.den)
        den = np.array(self.den[:n + 1]) / self.den[n]
        num = np.zeros(n + 1)
        num[:len(self.num)] = self.num[:n + 1]
        num /= self.den[n]
        d = num[n]
        if n == 0:
            return LtiSystem(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[d]])
        A = np.zeros((n, n))
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -den[:n]
        B = np.zeros((n, 1))
        B[-1, 0] = 1.0
        C = (num[:n] - d * den[:n])[None, :]
        return LtiSystem(A, B, C, [[d]])


def _degree(coeffs):
    nz = [i for i, c in enumerate(coeffs) if c != 0.0]
    return nz[-1] if nz else 0


# Channel weights: droop-tracking error, active-power roll-off and
# frequency-disturbance rejection.
W11 = Weight((8.0, 1.0), (0.0008, 1.0))
W21 = Weight((1.0, 1.0 / 80.0), (1.0, 1.0 / 8000.0))
W12 = Weight((6.0, 1.0), (0.0006, 100.0))
DEFAULT_CHANNELS = ((1, 1, W11), (2, 1, W21), (1, 2, W12))


def _sigma_max(G):
    if G.shape == (1, 1):
        return float(abs(G[0, 0]))
    return float(np.linalg.norm(G, 2))


def _require_stable(sys):
    alpha = spectral_abscissa(sys)
    if alpha >= 0.0:
        raise UnstableSystemError(f"system is not stable (spectral abscissa {alpha:.4g})")


def hinf_norm_grid(sys, grid=None):
    """Peak gain over a frequency grid, refined around the grid maximizer.

    The grid is augmented with ``omega = 0`` and the high-frequency limit
    ``D``.  The result is a lower bound of the true norm.
    """
    _require_stable(sys)
    grid = GRID if grid is None else np.asarray(grid, dtype=float)
    if sys.n_states == 0:
        return _sigma_max(sys.D)
    G = freq_response_grid(sys, grid)
    if G.shape[1:] == (1, 1):
        mags = np.abs(G[:, 0, 0])
    else:
        mags = np.linalg.svd(G, compute_uv=False)[:, 0]
    k = int(np.argmax(mags))
    best = float(mags[k])
    lo = math.log(grid[max(k - 1, 0)])
    hi = math.log(grid[min(k + 1, len(grid) - 1)])
    if hi > lo:
        res = minimize_scalar(lambda lw: -_sigma_max(freq_response(sys, math.exp(lw))),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        best = max(best, float(-res.fun))
    return max(best, _sigma_max(freq_response(sys, 0.0)), _sigma_max(sys.D))


def _hamiltonian(sys, gamma):
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    p, m = D.shape
    R = D.T @ D - gamma ** 2 * np.eye(m)
    S = D @ D.T - gamma ** 2 * np.eye(p)
    Ri = np.linalg.inv(R)
    Si = np.linalg.inv(S)
    H11 = A - B @ Ri @ D.T @ C
    H12 = -gamma * B @ Ri @ B.T
    H21 = gamma * C.T @ Si @ C
    H22 = -A.T + C.T @ D @ Ri @ B.T
    return np.block([[H11, H12], [H21, H22]])


def _crossing(sys, gamma, rtol=1e-5):
    """Largest gain found at frequencies where ``sigma_max = gamma`` may be crossed.

    Purely imaginary eigenvalues of the Hamiltonian mark the frequencies at
    which a singular value equals ``gamma``.  Near-imaginary eigenvalues are
    accepted as candidates and confirmed by evaluating the response at the
    candidates and at the midpoints between them.  Returns ``None`` when no
    crossing is confirmed.
    """
    ev = np.linalg.eigvals(_hamiltonian(sys, gamma))
    mag = np.maximum(1.0, np.abs(ev))
    cand = np.abs(ev[np.abs(ev.real) <= rtol * mag].imag)
    if cand.size == 0:
        return None
    w = np.unique(cand)
    mids = np.sqrt(w[:-1] * w[1:]) if w.size > 1 else np.array([])
    pts = np.concatenate([w, mids])
    peak = max(_sigma_max(freq_response(sys, float(x))) for x in pts)
    return peak if peak >= gamma * (1.0 - 1e-9) else None


def hinf_norm_bisection(sys, tol=1e-8, max_iter=200):
    """H-infinity norm by bisection on the Hamiltonian imaginary-axis test."""
    _require_stable(sys)
    sd = _sigma_max(sys.D)
    if sys.n_states == 0:
        return sd
    lo = max(sd, _sigma_max(freq_response(sys, 0.0)))
    for lam in np.linalg.eigvals(sys.A):
        if lam.imag != 0.0:
            lo = max(lo, _sigma_max(freq_response(sys, abs(lam.imag))))
        lo = max(lo, _sigma_max(freq_response(sys, abs(lam))))
    if lo == 0.0:
        return 0.0
    # gamma must not coincide with a singular value of D
    hi = lo * (1.0 + 10.0 * tol) if lo > sd else lo * 1.001 + 1e-300
    for _ in range(max_iter):
        peak = _crossing(sys, hi)
        if peak is None:
            break
        lo = max(lo, peak)
        hi = 2.0 * max(hi, peak)
    else:
        raise ArithmeticError("could not bracket the H-infinity norm")
    for _ in range(max_iter):
        if hi <= lo * (1.0 + tol):
            break
        gamma = math.sqrt(lo * hi)
        if gamma <= sd:
            gamma = 0.5 * (max(lo, sd) + hi)
        peak = _crossing(sys, gamma)
        if peak is None:
            hi = gamma
        else:
            lo = max(gamma, min(peak, hi))
    return math.sqrt(lo * hi)


def weighted_channel(sys, i, j, W):
    """``W(s) * T_ij(s)`` for output ``i`` and input ``j`` (both 1-based)."""
    if not isinstance(W, Weight):
        W = Weight(*W)
    return series(sys.channel(i - 1, j - 1), W.ss())


@dataclass
class SynthesisContext:
    """Fixed data of a tuning run: operating point, plant and base gains.

    ``base`` supplies the untuned entries (the droop coefficients) of the
    gain set that each candidate vector is written into.
    """

    refs: object
    d: object
    params: object
    base: object
    channels: tuple = DEFAULT_CHANNELS
    grid: np.ndarray = field(default_factory=lambda: GRID.copy())
    norm: str = "grid"


@dataclass
class Evaluation:
    value: float
    channel_norms: tuple = ()
    abscissa: float = math.nan
    status: str = "ok"


def evaluate(theta, ctx):
    """Objective with diagnostics; never raises for bad gain vectors."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return Evaluation(PENALTY_INVALID, status="non-finite gains")
    try:
        g = ctx.base.with_theta(theta)
        g.gfm.validate()
    except ModelDomainError as exc:
        return Evaluation(PENALTY_INVALID, status=f"invalid gains: {exc}")
    try:
        z = find_equilibrium(ctx.refs, ctx.d, g, ctx.params)
        sys = linearize(z, ctx.refs, ctx.d, g, ctx.params)
        alpha = spectral_abscissa(sys)
    except (EquilibriumError, ModelDomainError, ValueError, np.linalg.LinAlgError) as exc:
        return Evaluation(PENALTY_INVALID, status=f"equilibrium failed: {exc}")
    if not alpha < 0.0:
        return Evaluation(PENALTY + 1e6 * alpha, abscissa=alpha, status="unstable")
    norm = hinf_norm_grid if ctx.norm == "grid" else hinf_norm_bisection
    norms = []
    for i, j, W in ctx.channels:
        wsys = weighted_channel(sys, i, j, W)
        norms.append(norm(wsys, ctx.grid) if ctx.norm == "grid" else norm(wsys))
    return Evaluation(max(norms), tuple(norms), alpha)


def objective(theta, ctx):
    return evaluate(theta, ctx).value


@dataclass
class SynthesisProblem:
    theta0: np.ndarray
    frozen: tuple = ("k_12", "k_14", "k_15")
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    budget: int = 6000
    initial_mesh: float = 0.25
    min_mesh: float = 1e-6
    max_mesh: float = 1.0
    restarts: int = 3
    restart_scale: float = 0.05
    seed: int = 0
    workers: int = 1
    names: tuple = THETA_NAMES


@dataclass
class SynthesisResult:
    theta: np.ndarray
    value: float
    initial_value: float
    history: list
    evaluations: int
    iterations: int
    wall_time: float
    stop_reason: str


def _poll_directions(n, rng):
    # random orthonormal basis, so the poll set is not tied to the coordinate axes
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q *= np.sign(np.diag(R))
    return np.hstack([Q, -Q]).T


def synthesize(problem, ctx=None, objective_fn=None):
    """Minimize the objective over the free gains by pattern search.

    Each iteration polls ``2n`` points ``x +/- mesh * q_k`` in scaled
    coordinates around the incumbent, where ``q_k`` is a seeded random
    orthonormal basis.  The best strict improvement is accepted and the
    mesh doubled (up to ``max_mesh``); otherwise the mesh is halved.  Frozen
    gains never move.

    Raises
    ------
    InfeasibleStartError
        If the starting vector lands in the penalty region.
    """
    if objective_fn is None:
        def objective_fn(th):
            return objective(th, ctx)
    t_start = time.perf_counter()
    theta0 = np.array(problem.theta0, dtype=float)
    names = tuple(problem.names)
    free = np.array([name not in problem.frozen for name in names])
    scale = np.maximum(1.0, np.abs(theta0))
    lower = None if problem.lower is None else np.asarray(problem.lower, dtype=float)
    upper = None if problem.upper is None else np.asarray(problem.upper, dtype=float)
    rng = np.random.default_rng(problem.seed)

    def to_theta(x):
        th = theta0.copy()
        th[free] = x * scale[free]
        if lower is not None:
            th = np.maximum(th, lower)
        if upper is not None:
            th = np.minimum(th, upper)
        th[~free] = theta0[~free]
        return th

    evals = 0
    f0 = objective_fn(theta0)
    evals += 1
    if not f0 < PENALTY:
        raise InfeasibleStartError(f"initial gains are infeasible (objective {f0:.4g})")
    x_best = theta0[free] / scale[free]
    f_best = f0
    history = [(0, f_best, problem.initial_mesh, evals)]
    n = int(free.sum())
    iterations = 0
    stop = "budget"
    pool = ThreadPoolExecutor(problem.workers) if problem.workers > 1 else None

    def run_from(x, f, mesh):
        nonlocal evals, iterations, stop
        while True:
            if mesh < problem.min_mesh:
                stop = "mesh"
                return x, f
            if n == 0 or evals + 2 * n > problem.budget:
                stop = "budget"
                return x, f
            dirs = _poll_directions(n, rng)
            trials = [x + mesh * dv for dv in dirs]
            thetas = [to_theta(t) for t in trials]
            vals = list(pool.map(objective_fn, thetas)) if pool else [objective_fn(t) for t in thetas]
            evals += len(trials)
            iterations += 1
            k = int(np.argmin(vals))
            if vals[k] < f:
                x = to_theta(trials[k])[free] / scale[free]
                f = vals[k]
                mesh = min(2.0 * mesh, problem.max_mesh)
            else:
                mesh *= 0.5
            history.append((iterations, min(f, f_best), mesh, evals))
            log.info("iter %d  objective %.6g  mesh %.3g  evals %d", iterations, f, mesh, evals)

    try:
        x_best, f_best = run_from(x_best, f_best, problem.initial_mesh)
        for _ in range(problem.restarts):
            if evals + 1 > problem.budget:
                break
            x_try = x_best + problem.restart_scale * rng.standard_normal(n)
            f_try = objective_fn(to_theta(x_try))
            evals += 1
            if not f_try < PENALTY:
                continue
            x_new, f_new = run_from(to_theta(x_try)[free] / scale[free], f_try, problem.initial_mesh)
            if f_new < f_best:
                x_best, f_best = x_new, f_new
                history.append((iterations, f_best, problem.initial_mesh, evals))
    finally:
        if pool:
            pool.shutdown()

    theta = to_theta(x_best) if n else theta0
    if f_best >= f0:
        theta, f_best = theta0, f0
    return SynthesisResult(theta, f_best, f0, history, evals, iterations,
                           time.perf_counter() - t_start, stop)
