"""Command line runner: ``gsdelab run <cfg>``, ``gsdelab verify <suite>``, ``gsdelab catalog``.

Exit codes: 0 success, 1 failed acceptance criteria, 2 validation or
configuration error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, coefficients, kernels, moduli, payoffs
from .bihari import BihariEnvelope, StepFunction, beta_integral
from .catalog import parse_call
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericalAbort, ValidationError
from .expectation import (MonteCarloSetup, check_sublinearity, upper_expectation_lattice, write_estimates_csv)
from .gheat import PdeConfig, cfl_steps, solve_gheat, write_slice_csv
from .mollify import mollify
from .paths import TimeGrid, export_many_csv
from .payoffs import terminal
from .solvers import BsdeProblem, SdeProblem, bsde_solve, euler_all, picard_solve_h2, picard_solve_h2p
from .svgplot import write_plot
from .uncertainty import UncertaintySet

ENV_OUT = "GSDELAB_OUT"


# -- builders -----------------------------------------------------------------

def build_uncertainty(sec: dict) -> UncertaintySet:
    if sec["gammas"]:
        mats = []
        for chunk in sec["gammas"].split(";"):
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            d = int(round(math.sqrt(len(vals))))
            if d * d != len(vals) or d == 0:
                raise ConfigError(f"gamma {chunk.strip()!r} is not a square matrix", "uncertainty.gammas")
            mats.append(np.array(vals).reshape(d, d))
        return UncertaintySet(mats)
    return UncertaintySet.from_interval(sec["sigma2_min"], sec["sigma2_max"], sec["n_interior"])


def build_grid(sec: dict) -> TimeGrid:
    return TimeGrid(sec["horizon"], sec["n_steps"])


def _payoff(spec: str, key: str):
    try:
        return payoffs.payoff(spec)
    except ConfigError as exc:
        raise ConfigError(str(exc), key) from None


def build_sde(cfg: ExperimentConfig, section: str) -> SdeProblem:
    s = cfg[section]
    n = len(s["x0"])
    if n == 0:
        raise ConfigError("x0 needs at least one value", f"{section}.x0")
    h = {}
    if s["h"]:
        for item in s["h"].split(";"):
            if not item.strip():
                continue
            try:
                idx, spec = item.split(":", 1)
                i, j = (int(v) for v in idx.split(","))
            except ValueError:
                raise ConfigError(f"h entries look like 'i,j: spec', got {item.strip()!r}", f"{section}.h") from None
            h[(i, j)] = spec.strip()
    sig = [p.strip() for p in s["sigma"].split(";") if p.strip()]
    coeffs = coefficients.CoefficientSet(
        n=n, b=coefficients.term(s["b"], n, f"{section}.b"),
        sigma=tuple(coefficients.term(p, n, f"{section}.sigma") for p in sig),
        h={k: coefficients.term(v, n, f"{section}.h") for k, v in h.items()}, regime=s["regime"], beta=s["beta"])
    coeffs.validate()
    return SdeProblem(coeffs, s["x0"], build_grid(cfg["grid"]), build_uncertainty(cfg["uncertainty"]))


DRIVERS = {
    "zero": (0, "0"),
    "constant": (1, "c"),
    "linear": (1, "k y"),
    "sin": (1, "k sin(y)"),
}


def build_driver(spec: str, key: str):
    table = {k: (None, v[0], v[1]) for k, v in DRIVERS.items()}
    name, args = parse_call(spec, table, key)
    if name == "zero":
        return (lambda t, y: np.zeros_like(y)), 0.0, 0.0
    a = args[0]
    if name == "constant":
        return (lambda t, y: np.full_like(y, a)), abs(a), 0.0
    if name == "linear":
        return (lambda t, y: a * y), 0.0, abs(a)
    return (lambda t, y: a * np.sin(y)), 0.0, abs(a)


# -- experiments ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _write_rows(dest: Path, header, rows) -> None:
    with open(dest, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


def run_gheat(cfg, out: Path, seed, threads):
    s = cfg["gheat"]
    uset = build_uncertainty(cfg["uncertainty"])
    if uset.dim != 1:
        raise ValidationError("the G-heat solver needs d = 1")
    lo, hi = uset.variance_bounds
    phi = _payoff(s["phi"], "gheat.phi")
    if s["n_x"] % 2 == 0:
        raise ConfigError("n_x must be odd so that x = 0 is a node", "gheat.n_x")
    L = s["half_width"] or 8.0 * math.sqrt(max(hi, 1e-12) * s["t"])
    dx = 2.0 * L / (s["n_x"] - 1)
    pc = PdeConfig(L, s["n_x"], cfl_steps(s["t"], dx, hi, s["cfl"]), lo, hi, s["boundary"])
    u = solve_gheat(pc, phi, s["t"])
    write_slice_csv(pc.x, u, out / "result.csv")
    write_plot(out / "plot.svg", {f"u({s['t']:g}, x)": (pc.x, u), "phi(x)": (pc.x, phi(pc.x))},
               title=f"G-heat solution, phi = {s['phi']}", xlabel="x", ylabel="u")
    return {"u(t,0)": float(u[s["n_x"] // 2]), "n_t": pc.n_t}


def run_expect(cfg, out: Path, seed, threads):
    s = cfg["expect"]
    uset = build_uncertainty(cfg["uncertainty"])
    grid = build_grid(cfg["grid"])
    setup = MonteCarloSetup(uset, grid, s["n_paths"], seed, control_cap=s["control_cap"], threads=threads)
    ests = []
    for spec in [p.strip() for p in s["payoffs"].split(";") if p.strip()]:
        phi = _payoff(spec, "expect.payoffs")
        ests.append(setup.estimate(terminal(phi), spec))
        if s["lattice"] and uset.dim == 1:
            ests.append(upper_expectation_lattice(phi, uset, TimeGrid(grid.horizon, s["lattice_steps"]),
                                                  s["dx_scale"], payoff_id=spec))
    write_estimates_csv(ests, out / "result.csv")
    return {f"{e.payoff_id} [{e.mode}]": e.value for e in ests}


def run_sde(cfg, out: Path, seed, threads):
    s = cfg["sde"]
    prob = build_sde(cfg, "sde")
    setup = MonteCarloSetup(prob.uset, prob.grid, s["n_paths"], seed, control_cap=s["control_cap"], threads=threads)
    x = euler_all(prob, setup)
    means = x.mean(axis=1)
    n = prob.coefficients.n
    header = ["t", "scenario_id"] + [f"mean_X_{i + 1}" for i in range(n)] + [f"mean_sq_X_{i + 1}" for i in range(n)]
    rows = []
    sq = (x * x).mean(axis=1)
    for sidx in range(x.shape[0]):
        for k, t in enumerate(prob.grid.times):
            rows.append([t, sidx, *means[sidx, k], *sq[sidx, k]])
    _write_rows(out / "result.csv", header, rows)
    if s["export_path"]:
        # path number export_path - 1 of the driving B under every scenario
        idx = s["export_path"] - 1
        if idx >= setup.n_paths:
            raise ConfigError(f"export_path {s['export_path']} exceeds n_paths", "sde.export_path")
        export_many_csv([setup.bundle(c) for c in setup.controls], out / "paths.csv", idx)
    series = {f"scenario {i}": (prob.grid.times, means[i, :, 0]) for i in range(min(x.shape[0], 6))}
    write_plot(out / "plot.svg", series, title="Euler scheme: path mean per scenario", xlabel="t", ylabel="E[X_1]")
    return {"upper E[X_T,1]": float(means[:, -1, 0].max()), "lower E[X_T,1]": float(means[:, -1, 0].min())}


def run_picard(cfg, out: Path, seed, threads):
    s = cfg["picard"]
    prob = build_sde(cfg, "picard")
    setup = MonteCarloSetup(prob.uset, prob.grid, s["n_paths"], seed, control_cap=s["control_cap"], threads=threads)
    budget = s["memory_budget_mb"] * 2 ** 20
    if prob.regime == "H1H2":
        tr = picard_solve_h2(prob, setup, n_iter=s["n_iter"], tol=s["tol"], memory_budget=budget)
    else:
        tr = picard_solve_h2p(prob, setup, n_outer=s["n_iter"], n_inner=s["n_inner"] or None,
                              tol=s["tol"] or 1e-6, caps=s["caps"], memory_budget=budget)
    env = tr.envelope_sup
    rows = [[m, tr.errors[m], tr.errors_sq[m], tr.errors_abs[m], None if env is None else env[m]]
            for m in range(len(tr.errors))]
    _write_rows(out / "result.csv", ["iteration", "error", "error_sq", "error_abs", "envelope"], rows)
    its = np.arange(len(tr.errors))
    series = {f"e_m ({tr.metric})": (its, tr.errors)}
    if env is not None:
        series["envelope"] = (its, env)
    write_plot(out / "plot.svg", series, title="Picard error vs iteration", xlabel="m", ylabel="e_m", logy=True)
    info = {"metric": tr.metric, "iterations": len(tr.errors), "last error": tr.errors[-1],
            "envelope margin": tr.envelope_margin(), **{f"constant {k}": v for k, v in tr.constants.items()}}
    for r in tr.cap_results:
        info[f"cap {r['cap']:g} sup change"] = r["sup_change"]
    if tr.cap_results and tr.cap_results[0]["cap"] is not None:
        _write_rows(out / "caps.csv", ["cap", "outer_iterations", "final_error", "converged", "sup_change",
                                       "mean_change"],
                    [[r["cap"], len(r["errors"]), r["errors"][-1], int(r["converged"]), r["sup_change"],
                      r["mean_change"]] for r in tr.cap_results])
    return info


def run_bihari(cfg, out: Path, seed, threads):
    s = cfg["bihari"]
    rho = moduli.modulus(s["rho"], "bihari.rho")
    if s["beta_steps"]:
        breaks, vals = [], []
        for item in s["beta_steps"].split(","):
            try:
                b, v = item.split(":")
            except ValueError:
                raise ConfigError("beta_steps entries look like 'start:value'", "bihari.beta_steps") from None
            breaks.append(float(b))
            vals.append(float(v))
        beta = StepFunction(breaks, vals)
    else:
        beta = s["beta"]
    env = BihariEnvelope(rho, beta=beta, anchor=s["anchor"])
    times = np.linspace(0.0, s["t"], s["n_points"]) if s["n_points"] > 1 else np.array([s["t"]])
    rows = []
    for t in times:
        val, over = env.bound(s["a"], t)
        rows.append([t, beta_integral(beta, t), val, int(over)])
    _write_rows(out / "result.csv", ["t", "beta_integral", "bound", "overflow"], rows)
    write_plot(out / "plot.svg", {"v^-1(v(a) + int beta)": (times, [r[2] for r in rows])},
               title=f"Bihari bound, rho = {rho.name}, a = {s['a']:g}", xlabel="t", ylabel="bound")
    return {"bound at t": rows[-1][2], "overflow": bool(rows[-1][3]), "osgood": rho.osgood}


def run_bsde(cfg, out: Path, seed, threads):
    s = cfg["bsde"]
    uset = build_uncertainty(cfg["uncertainty"])
    grid = build_grid(cfg["grid"])
    f, fb, fc = build_driver(s["f"], "bsde.f")
    g, gb, gc = build_driver(s["g"], "bsde.g")
    prob = BsdeProblem(xi=_payoff(s["xi"], "bsde.xi"), grid=grid, uset=uset, f=f, g=g, c_growth=fc + gc,
                       beta_bound=fb + gb)
    res = bsde_solve(prob, n_iter=s["n_iter"], tol=s["tol"], dx_scale=s["dx_scale"])
    rows = []
    for k, layer in enumerate(res.layers):
        xs = res.lattice.states(k)
        for x, y in zip(xs, layer):
            rows.append([k, grid.times[k], x, y])
    _write_rows(out / "result.csv", ["step", "t", "x", "Y"], rows)
    write_plot(out / "plot.svg", {"sup |Y^{m+1} - Y^m|": (np.arange(1, res.stages + 1), res.errors)},
               title="G-BSDE Picard stages", xlabel="stage", ylabel="change", logy=True)
    return {"Y_0": res.y0, "stages": res.stages}


def run_mollify(cfg, out: Path, seed, threads):
    s = cfg["mollify"]
    g = _payoff(s["g"], "mollify.g")
    gw = mollify(g, s["width"], 1, s["quad_points"] or None)
    x = np.linspace(s["x_min"], s["x_max"], s["n_points"])
    vals, smooth = g(x), gw(x)
    _write_rows(out / "result.csv", ["x", "g", "g_w"], zip(x, vals, smooth))
    write_plot(out / "plot.svg", {"g": (x, vals), "g_w": (x, smooth)}, title=f"mollified {s['g']}, w = {s['width']:g}",
               xlabel="x", ylabel="value")
    sup_g = float(np.max(np.abs(vals)))
    return {"sup |g_w - g|": float(np.max(np.abs(smooth - vals))), "Lipschitz bound": gw.lipschitz_bound(sup_g)}


def run_axioms(cfg, out: Path, seed, threads):
    s = cfg["axioms"]
    uset = build_uncertainty(cfg["uncertainty"])
    setup = MonteCarloSetup(uset, build_grid(cfg["grid"]), s["n_paths"], seed, control_cap=s["control_cap"],
                            threads=threads)
    x = setup.estimate(terminal(_payoff(s["payoff_x"], "axioms.payoff_x")), s["payoff_x"])
    y = setup.estimate(terminal(_payoff(s["payoff_y"], "axioms.payoff_y")), s["payoff_y"])
    rep = check_sublinearity(x, y, lam=s["lam"], c=s["c"], tol=s["tol"])
    _write_rows(out / "result.csv", ["axiom", "slack", "passed"],
                [[k, v, int(v >= -s["tol"])] for k, v in rep.slacks.items()])
    if not rep.passed:
        raise NumericalAbort("sublinear-expectation axioms failed on the estimator", stage="axioms",
                             diagnostics=rep.slacks)
    return {"scenarios": len(setup.controls), **rep.slacks}


RUNNERS = {"gheat": run_gheat, "expect": run_expect, "sde": run_sde, "picard": run_picard, "bihari": run_bihari,
           "bsde": run_bsde, "mollify": run_mollify, "axioms": run_axioms}


def _versions() -> list[str]:
    import scipy
    return [f"gsdelab = {__version__}", f"kernel_backend = {kernels.BACKEND}", f"python = {platform.python_version()}",
            f"numpy = {np.__version__}", f"scipy = {scipy.__version__}"]


def resolve_out(cfg: ExperimentConfig, override: str | None, config_path: str) -> Path:
    if override:
        return Path(override)
    if cfg["experiment"]["out"]:
        return Path(cfg["experiment"]["out"])
    base = os.environ.get(ENV_OUT) or "out"
    return Path(base) / Path(config_path).stem


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    exp = cfg["experiment"]
    if args.seed is not None:
        exp["seed"] = args.seed
    if args.threads is not None:
        exp["threads"] = args.threads
    out = resolve_out(cfg, args.out, args.config)
    exp["out"] = str(out)
    out.mkdir(parents=True, exist_ok=True)
    info = RUNNERS[cfg.kind](cfg, out, exp["seed"], exp["threads"])
    with open(out / "manifest.txt", "w") as fh:
        fh.write("# gsdelab run manifest; rerun with: gsdelab run manifest.txt\n")
        fh.write("# " + "\n# ".join(_versions()) + "\n\n")
        fh.write(cfg.resolved_text())
    for k, v in info.items():
        print(f"{k}: {v}")
    print(f"wrote {out / 'result.csv'}")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import SUITES, run_suite

    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r} (known: {', '.join(SUITES)})", "suite")
    results = run_suite(args.suite, progress=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    print()
    print(f"{'crit':>4}  {'check':<58} {'measured':>24} {'target':>20} {'tol':>10}  ok")
    for r in results:
        for row in r.rows:
            print(f"{r.number:>4}  {row['check'][:58]:<58} {_short(row['measured']):>24} {_short(row['target']):>20} "
                  f"{_short(row['tolerance']):>10}  {'yes' if row['ok'] else 'NO'}")
    out = args.out or os.environ.get(ENV_OUT)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        rows = [[r.number, row["check"], row["measured"], row["target"], row["tolerance"], int(row["ok"])]
                for r in results for row in r.rows]
        _write_rows(Path(out) / f"verify_{args.suite}.csv", ["criterion", "check", "measured", "target", "tolerance",
                                                             "ok"], rows)
    if failed:
        print("\nfailing criteria:")
        for r in failed:
            print("  " + r.line())
            for row in r.rows:
                if not row["ok"]:
                    print(f"      {row['check']}: measured {_short(row['measured'])}, target {_short(row['target'])}")
        return 1
    print(f"\nall {len(results)} criteria passed")
    return 0


def _short(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v[:4]) + (", ..." if len(v) > 4 else "") + "]"
    return "" if v is None else str(v)


def cmd_catalog(args) -> int:
    print("moduli (moduli_bihari):")
    for k, (_, arity, doc) in moduli.CATALOG.items():
        print(f"  {k:<18} {doc}")
    print("coefficients (sde / picard: b, sigma, h):")
    for k, (_, arity, doc) in coefficients.CATALOG.items():
        print(f"  {k:<18} {doc}")
    print("payoffs (phi, xi, g, payoffs):")
    for k, (_, arity, doc) in payoffs.PAYOFFS.items():
        print(f"  {k:<18} {doc}")
    print("BSDE drivers (f, g):")
    for k, (arity, doc) in DRIVERS.items():
        print(f"  {k:<18} {doc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gsdelab", description="G-expectation and G-SDE numerical laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--out", help=f"output directory (default: [experiment] out, then ${ENV_OUT}/<config stem>)")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run an acceptance suite: axioms, oracles, envelopes or all")
    v.add_argument("suite")
    v.add_argument("--out", help="directory for verify_<suite>.csv")
    v.set_defaults(func=cmd_verify)
    c = sub.add_parser("catalog", help="list catalog names")
    c.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort at {exc.stage}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
