"""Compare the compiled and pure-Python closed-loop kernels.

Run with ``python3 benchmarks/bench_kernel.py``.  Times the vector field,
the finite-difference Jacobian and a short RK4 run at the nominal
operating point with the H-infinity gains.
"""
import argparse
import timeit

import numpy as np

from mimogfm import _pykernel
from mimogfm.closedloop import find_equilibrium, pack_params
from mimogfm.presets import hinf_gains, nominal_disturbance, table1_params, table1_references

try:
    from mimogfm import _ckernel
except ImportError:
    _ckernel = None


def best_of(fn, number, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000, help="RK4 steps per run (h = 1e-5)")
    args = ap.parse_args()

    refs, d, g, params = table1_references(), nominal_disturbance(), hinf_gains(), table1_params()
    z = find_equilibrium(refs, d, g, params).as_array()
    p = pack_params(refs, d, g, params)
    out = np.zeros((args.steps // 100 + 1, z.size))

    backends = [("python", _pykernel)]
    if _ckernel is not None:
        backends.insert(0, ("cython", _ckernel))
    else:
        print("compiled kernel not available; timing the Python backend only")

    rows = []
    for name, k in backends:
        t_rhs = best_of(lambda: k.rhs(z, p), 2000 if name == "cython" else 200)
        t_jac = best_of(lambda: k.jacobian(z, p, 1e-7), 200 if name == "cython" else 10)
        n = args.steps if name == "cython" else max(args.steps // 20, 100)
        t_rk4 = best_of(lambda: k.rk4(z, p, 1e-5, n, 100, out), 1, repeat=3) / n
        rows.append((name, t_rhs, t_jac, t_rk4))

    print(f"{'backend':8} {'rhs [us]':>10} {'jacobian [us]':>14} {'rk4 step [us]':>14}")
    for name, a, b, c in rows:
        print(f"{name:8} {a * 1e6:10.2f} {b * 1e6:14.1f} {c * 1e6:14.2f}")
    if len(rows) == 2:
        (_, a0, b0, c0), (_, a1, b1, c1) = rows
        print(f"{'speedup':8} {a1 / a0:10.1f} {b1 / b0:14.1f} {c1 / c0:14.1f}")
        print(f"2 s step scenario (200000 steps): cython {200000 * c0:.2f} s, python {200000 * c1:.1f} s")


if __name__ == "__main__":
    main()
