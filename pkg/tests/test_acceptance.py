"""Acceptance criteria 1-8, one verdict line each in the terminal summary."""
import io
import math
import time

import numpy as np
import pytest

from conftest import record
from mimogfm.cli import main
from mimogfm.closedloop import Disturbance, find_equilibrium, pack_params, steady_state_report
from mimogfm import kernel
from mimogfm.config import fixture, load
from mimogfm.hinf import (W11, SynthesisContext, evaluate, hinf_norm_bisection, hinf_norm_grid,
                          synthesize)
from mimogfm.linear import LtiSystem, linearize, spectral_abscissa
from mimogfm.plant import Bases, TABLE1_SI, params_from_si
from mimogfm.sim import STEP_SCENARIOS, metrics, simulate, step_consistency

CFG = [fixture("table1.cfg"), fixture("table2_traditional.cfg"), fixture("table2_hinf.cfg")]


def pref_overshoot(g, refs, params):
    tr = simulate(STEP_SCENARIOS["pref_step"], g, refs, params)
    return metrics(tr, "p", 1.0).overshoot


def test_c1_per_unit_round_trip():
    pu = params_from_si(TABLE1_SI, Bases())
    pairs = [("L_f", 0.0326), ("C_f", 0.0454), ("L_g", 0.087)]
    errs = {k: abs(getattr(pu, k) / v - 1.0) for k, v in pairs}
    ok = all(e <= 5e-3 for e in errs.values())
    record(1, ok, "rel. errors " + ", ".join(f"{k} {e:.2%}" for k, e in errs.items()) + " (tol 0.5%)")
    assert ok


def test_c2_equilibrium_identities(params, refs, dist, trad, hinf):
    worst = 0.0
    t0 = time.perf_counter()
    for g in (trad, hinf):
        r = steady_state_report(find_equilibrium(refs, dist, g, params), refs, dist, g)
        worst = max(worst, abs(r["v_dc"] - refs.V_dcref), abs(r["v_q"]), abs(r["p"] - refs.P_ref),
                    abs(g.gfm.D_q * (refs.Q_ref - r["q"]) + refs.V_ref - r["V"]))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 1.0
    record(2, ok, f"max identity residual {worst:.2e} p.u. (tol 1e-6), {elapsed:.2f} s")
    assert ok


def test_c3_droop_reproduction(params, refs, trad, hinf):
    scn = STEP_SCENARIOS["wg_step"]
    parts = []
    ok = True
    for name, g in (("traditional", trad), ("hinf", hinf)):
        t0 = time.perf_counter()
        tr = simulate(scn, g, refs, params)
        elapsed = time.perf_counter() - t0
        p_end, vdc_end = tr["p"][-1], tr["v_dc"][-1]
        ok &= abs(p_end - 0.7) <= 2e-3 and abs(vdc_end - refs.V_dcref) <= 1e-4 and elapsed < 10
        parts.append(f"{name}: p {p_end:.5f}, v_dc err {abs(vdc_end - 1):.1e}, {elapsed:.2f} s")
    record(3, ok, "; ".join(parts))
    assert ok


def test_c4_stability(params, refs, dist, trad, hinf):
    alphas = {}
    for name, g in (("traditional", trad), ("hinf", hinf)):
        z = find_equilibrium(refs, dist, g, params)
        alphas[name] = spectral_abscissa(linearize(z, refs, dist, g, params))
    ok = all(a < 0 for a in alphas.values())
    record(4, ok, "spectral abscissa " + ", ".join(f"{k} {v:.3f} 1/s" for k, v in alphas.items()))
    assert ok


def test_c5_transient_ordering(params, refs, trad, hinf):
    os_t = pref_overshoot(trad, refs, params)
    os_h = pref_overshoot(hinf, refs, params)
    ok = os_h <= os_t and os_h < 0.10
    record(5, ok, f"P_ref step overshoot: hinf {os_h:.1%}, traditional {os_t:.1%}")
    assert ok


def _random_stable(rng):
    n = int(rng.integers(1, 11))
    p, m = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    A = rng.normal(size=(n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + rng.uniform(0.05, 2.0)) * np.eye(n)
    return LtiSystem(A, rng.normal(size=(n, m)), rng.normal(size=(p, n)), rng.normal(size=(p, m)))


def test_c6_norm_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        sys = _random_stable(rng)
        a, b = hinf_norm_bisection(sys), hinf_norm_grid(sys)
        worst = max(worst, abs(a - b) / a)
    fo = LtiSystem([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    e_fo = max(abs(hinf_norm_bisection(fo) - 1), abs(hinf_norm_grid(fo) - 1))
    w11 = hinf_norm_bisection(W11.ss())
    e_w = abs(w11 / 1e4 - 1)
    elapsed = time.perf_counter() - t0
    ok = worst < 0.01 and e_fo < 1e-6 and e_w < 1e-4 and elapsed < 30
    record(6, ok, f"bisection vs grid worst {worst:.1e}; |1/(s+1)| err {e_fo:.1e}; "
                  f"|W11| = {w11:.6g}; {elapsed:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def synthesis_run():
    cfg = load(CFG)
    base, problem = cfg.synthesis_problem()
    ctx = SynthesisContext(cfg.refs, cfg.dist, cfg.params, base, channels=cfg.channels())
    t0 = time.perf_counter()
    res = synthesize(problem, ctx)
    return cfg, base, ctx, res, time.perf_counter() - t0


def test_c7_synthesis_protocol(synthesis_run, trad, hinf):
    cfg, base, ctx, res, elapsed = synthesis_run
    final = evaluate(res.theta, ctx)
    published = evaluate(hinf.theta(), ctx)
    g_star = base.with_theta(res.theta)
    os_star = pref_overshoot(g_star, cfg.refs, cfg.params)
    os_t = pref_overshoot(trad, cfg.refs, cfg.params)
    frozen_ok = all(g_star[k] == 0.0 for k in ("k_12", "k_14", "k_15"))
    ok = (res.value < res.initial_value and final.abscissa < 0 and frozen_ok
          and os_star <= os_t and os_star < 0.10
          and math.isfinite(published.value) and published.abscissa < 0 and elapsed < 300)
    record(7, ok, f"objective {res.initial_value:.4f} -> {res.value:.4f}, abscissa {final.abscissa:.3f}, "
                  f"P_ref overshoot {os_star:.1%} (traditional {os_t:.1%}), "
                  f"published design objective {published.value:.4f}, {elapsed:.0f} s")
    assert ok


def _fd_slope(params, refs, dist, g):
    z = find_equilibrium(refs, dist, g, params)
    A = linearize(z, refs, dist, g, params).A
    z0 = z.as_array()
    prm = pack_params(refs, dist, g, params)
    v = np.random.default_rng(0).normal(size=kernel.NX)
    v /= np.linalg.norm(v)
    eps = np.array([1e-2, 3e-3, 1e-3, 3e-4])
    f0 = kernel.rhs(z0, prm)
    r = [np.linalg.norm(kernel.rhs(z0 + e * v, prm) - f0 - e * (A @ v)) for e in eps]
    return np.polyfit(np.log(eps), np.log(r), 1)[0]


def _cli_bytes(tmp_path, tag):
    out = tmp_path / f"{tag}.cfg"
    trace = tmp_path / f"{tag}.csv"
    assert main(["synthesize", "--config", CFG[0], "--config", CFG[1], "--budget", "150",
                 "--out", str(out)], out=io.StringIO()) == 0
    assert main(["simulate", "--config", CFG[0], "--config", str(out), "--gains", "synthesized",
                 "--scenario", "pref_step", "--out", str(trace)], out=io.StringIO()) == 0
    hist = tmp_path / f"{tag}_history.csv"
    return out.read_bytes() + hist.read_bytes() + trace.read_bytes()


def test_c8_numerical_hygiene(tmp_path, params, refs, dist, trad, hinf):
    slopes = [_fd_slope(params, refs, dist, g) for g in (trad, hinf)]
    devs = [step_consistency(1e-5, scn, g, refs, params).max_deviation
            for scn in STEP_SCENARIOS.values() for g in (trad, hinf)]
    same = _cli_bytes(tmp_path, "a") == _cli_bytes(tmp_path, "b")
    ok = all(1.8 < s < 2.2 for s in slopes) and max(devs) < 1e-6 and same
    record(8, ok, f"FD residual slopes {', '.join(f'{s:.2f}' for s in slopes)}; "
                  f"RK4 h vs h/2 max {max(devs):.1e} p.u.; identical bytes {same}")
    assert ok
