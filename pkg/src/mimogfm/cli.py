"""Command-line front end: equilibrium | analyze | synthesize | simulate.

Exit codes: 0 success, 2 configuration/usage error, 3 equilibrium not
found, 4 infeasible synthesis start, 5 simulation blow-up.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .closedloop import STATE_NAMES, THETA_NAMES, EquilibriumError, find_equilibrium, steady_state_report
from .hinf import (InfeasibleStartError, SynthesisContext, evaluate, hinf_norm_bisection, synthesize,
                   weighted_channel)
from .linear import linearize, spectral_abscissa
from .plant import ModelDomainError
from .sim import NotSettledError, SimulationError, metrics, simulate, step_consistency

log = logging.getLogger("mimogfm")

EXIT_OK, EXIT_CONFIG, EXIT_EQUILIBRIUM, EXIT_INFEASIBLE, EXIT_BLOWUP = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def _table(rows, header):
    cols = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cols]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(v):
    return f"{v:.6g}"


def _gain_names(cfg, args):
    if args.gains:
        cfg.gain_set(args.gains)
        return [args.gains]
    if not cfg.gains:
        raise cfgmod.ConfigError("no gain sets defined")
    return list(cfg.gains)


def _equilibrium(cfg, g, refs=None, d=None):
    try:
        return find_equilibrium(refs or cfg.refs, d or cfg.dist, g, cfg.params)
    except (EquilibriumError, ModelDomainError, ValueError) as exc:
        raise CliError(f"equilibrium not found: {exc}", EXIT_EQUILIBRIUM) from exc


def cmd_equilibrium(cfg, args, out):
    name, g = cfg.gain_set(args.gains)
    z = _equilibrium(cfg, g)
    rep = steady_state_report(z, cfg.refs, cfg.dist, g)
    print(f"equilibrium for gain set '{name}'", file=out)
    print(_table([[k, _fmt(v)] for k, v in rep.items()], ["quantity", "value (p.u.)"]), file=out)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "value"])
            for k, v in rep.items():
                w.writerow([k, f"{v:.12g}"])
    return EXIT_OK


def _context(cfg, base):
    return SynthesisContext(cfg.refs, cfg.dist, cfg.params, base, channels=cfg.channels())


def cmd_analyze(cfg, args, out):
    names = _gain_names(cfg, args)
    rows = []
    for name in names:
        g = cfg.gains[name]
        z = _equilibrium(cfg, g)
        sys_ = linearize(z, cfg.refs, cfg.dist, g, cfg.params)
        alpha = spectral_abscissa(sys_)
        if alpha >= 0.0:
            rows.append([name, _fmt(alpha), "unstable"] + ["-"] * (len(cfg.channels()) + 1))
            continue
        norms = [hinf_norm_bisection(weighted_channel(sys_, i, j, W), tol=1e-6)
                 for i, j, W in cfg.channels()]
        rows.append([name, _fmt(alpha), "stable"] + [_fmt(v) for v in norms] + [_fmt(max(norms))])
    header = ["gains", "abscissa [1/s]", "status"]
    header += [f"|W{i}{j} T{i}{j}|inf" for i, j, _ in cfg.channels()] + ["objective"]
    print(_table(rows, header), file=out)
    return EXIT_OK


def cmd_synthesize(cfg, args, out):
    base, problem = cfg.synthesis_problem(seed=args.seed)
    if args.budget is not None:
        problem.budget = args.budget
    ctx = _context(cfg, base)
    try:
        res = synthesize(problem, ctx)
    except InfeasibleStartError as exc:
        raise CliError(str(exc), EXIT_INFEASIBLE) from exc
    final = evaluate(res.theta, ctx)
    start = evaluate(problem.theta0, ctx)
    name = cfg.synthesis.get("output_name", "synthesized")
    g = base.with_theta(res.theta)
    rows = [[k, _fmt(a), _fmt(b), "frozen" if k in problem.frozen else ""]
            for k, a, b in zip(THETA_NAMES, problem.theta0, res.theta)]
    print(_table(rows, ["gain", "initial", "final", ""]), file=out)
    print(f"objective: {_fmt(res.initial_value)} -> {_fmt(res.value)}", file=out)
    print("channel norms: " + ", ".join(_fmt(v) for v in start.channel_norms)
          + " -> " + ", ".join(_fmt(v) for v in final.channel_norms), file=out)
    print(f"spectral abscissa: {_fmt(final.abscissa)} 1/s", file=out)
    print(f"iterations: {res.iterations}  evaluations: {res.evaluations}  stop: {res.stop_reason}"
          f"  wall time: {res.wall_time:.1f} s", file=out)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(cfgmod.format_gain_set(
                name, g, f"synthesized from '{cfg.synthesis.get('initial', 'traditional')}'"
                f" seed {problem.seed}, objective {res.value!r}"))
        hist = os.path.splitext(args.out)[0] + "_history.csv"
        with open(hist, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "objective", "mesh", "evaluations"])
            for it, f, mesh, ev in res.history:
                w.writerow([it, f"{f:.12g}", f"{mesh:.12g}", ev])
        print(f"wrote gain set '{name}' to {args.out} and history to {hist}", file=out)
    return EXIT_OK


def _trace_path(base, name, multi):
    if not multi:
        return base
    stem, ext = os.path.splitext(base)
    return f"{stem}_{name}{ext or '.csv'}"


def cmd_simulate(cfg, args, out):
    if args.scenario not in cfg.scenarios:
        raise cfgmod.ConfigError(f"unknown scenario {args.scenario!r}; defined: {sorted(cfg.scenarios)}")
    scn = cfg.scenarios[args.scenario]
    names = _gain_names(cfg, args)
    rows = []
    for name in names:
        g = cfg.gains[name]
        try:
            trace = simulate(scn, g, cfg.refs, cfg.params, cfg.dist, h=cfg.h, label=name)
        except SimulationError as exc:
            raise CliError(f"{name}: {exc}", EXIT_BLOWUP) from exc
        except (EquilibriumError, ModelDomainError) as exc:
            raise CliError(f"{name}: {exc}", EXIT_EQUILIBRIUM) from exc
        if args.out:
            trace.to_csv(_trace_path(args.out, name, len(names) > 1))
        refs_post, d_post = scn.apply(cfg.refs, cfg.dist, scn.post)
        z_post = _equilibrium(cfg, g, refs_post, d_post)
        p_final = steady_state_report(z_post, refs_post, d_post, g)["p"]
        try:
            m = metrics(trace, "p", p_final)
            row = [name, _fmt(p_final), f"{100 * m.overshoot:.2f}", _fmt(m.settling_time), _fmt(m.steady_error)]
        except NotSettledError:
            row = [name, _fmt(p_final), "-", "not settled", "-"]
        row.append(_fmt(float(np.max(np.abs(trace["v_dc"] - refs_post.V_dcref)))))
        if args.check_step:
            rep = step_consistency(cfg.h, scn, g, cfg.refs, cfg.params, cfg.dist)
            row.append(f"{rep.max_deviation:.3g} ({rep.worst_column})")
        rows.append(row)
    header = ["gains", "p final", "overshoot [%]", "settling [s]", "steady error", "max |v_dc - ref|"]
    if args.check_step:
        header.append("h vs h/2 deviation")
    print(f"scenario '{scn.name}': {scn.quantity} {scn.pre} -> {scn.post} at t = {scn.step_time} s", file=out)
    print(_table(rows, header), file=out)
    return EXIT_OK


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="mimogfm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", action="append", required=True, metavar="PATH",
                       help="configuration file; repeat to merge several")
        p.add_argument("--gains", metavar="NAME", help="gain set to use (default: all / active)")
        p.add_argument("--out", metavar="PATH")
        if name == "simulate":
            p.add_argument("--scenario", required=True, metavar="NAME")
            p.add_argument("--check-step", action="store_true",
                           help="also report the h vs h/2 output deviation")
        if name == "synthesize":
            p.add_argument("--seed", type=int)
            p.add_argument("--budget", type=int, help="objective evaluation budget")
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        cfg = cfgmod.load(args.config)
        return COMMANDS[args.command](cfg, args, out)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
