"""Command line entry point.

    stochhom <command> (--config FILE | --instance NAME) [--output DIR]
    stochhom plot REPORT.csv [--kind line|loglog] [--out FILE.svg]

Commands write CSV reports plus ``summary.txt`` into the output
directory.  Exit status: 0 on success, 1 for configuration or input
errors, 2 for numerical failures.  A failing command leaves no partial
output behind.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .cell import effective_tensor, solve_cell
from .config import ConfigError, RunConfig, parse_config, write_config
from .errors import AssumptionViolation, NumericalFailure, SolverError
from .experiments import (
    converge_study,
    corrector_study,
    khasminskii_test,
    prepare,
    reaction_functional,
    snapshot_grid,
)
from .fast_ou import FastProcess, mixing_curve
from .fine import resolving_points, run_fine
from .mesh import build_grid, norms
from .plotting import emit_plot
from .problems import sine_product, validate

COMMANDS = ("cell", "fine", "averaged", "converge", "mixing", "khasminskii", "corrector", "validate")

HEADERS = {
    "cell": "i,j,abar_ij",
    "fine": "t,x_index,u,v",
    "averaged": "t,x_index,u",
    "converge": "epsilon,replica,sup_l2_error,final_l2_error,energy_sup,grad_energy_int,dudt_energy",
    "mixing": "t,gap,bound",
    "khasminskii": "delta,lhs,stderr",
    "corrector": "epsilon,replica,gap",
}


def _fmt(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def csv_text(header, rows):
    lines = [header]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _points(cfg, inst):
    return cfg.points or resolving_points(min(inst.eps))


def _times(cfg, inst):
    return snapshot_grid(inst.T, cfg.dt, cfg.snapshots)


def _setup(cfg, inst):
    return prepare(inst, cfg.dt, _points(cfg, inst), cfg.cell_resolution, cfg.hermite_order)


def _fast_inputs(inst, points):
    grid = build_grid(inst.dim, points)
    phi = grid.sample(sine_product)
    return grid, inst.noise.discretize(grid), phi, 0.5 * phi, -phi


def cmd_cell(cfg, inst):
    sol = solve_cell(inst.A, cfg.cell_resolution)
    eff = effective_tensor(inst.A, sol)
    d = inst.dim
    rows = [(i + 1, j + 1, eff.matrix[i, j]) for i in range(d) for j in range(d)]
    corr = [(k, j + 1, sol.chi[j, k], sol.chi_adj[j, k]) for j in range(d) for k in range(sol.grid.size)]
    files = {"cell.csv": csv_text(HEADERS["cell"], rows),
             "cell_correctors.csv": csv_text("y_index,component,chi,chi_adj", corr)}
    summary = [
        f"cell resolution = {cfg.cell_resolution}",
        f"effective tensor = {eff.matrix.tolist()!r}",
        f"eigenvalue certificate = [{eff.eig_min!r}, {eff.eig_max!r}] within [m, M] = [{inst.A.m!r}, {inst.A.M!r}]",
        f"cell residual = {sol.residual!r} (adjoint {sol.residual_adj!r})",
    ]
    return files, summary


def cmd_fine(cfg, inst):
    eps = min(inst.eps)
    traj = run_fine(inst, eps, cfg.dt, _points(cfg, inst), _times(cfg, inst), replica=0)
    rows = [(t, i, u[i], v[i]) for t, u, v in zip(traj.times, traj.u, traj.v) for i in range(traj.grid.size)]
    summary = [f"epsilon = {eps!r}", "replica = 0", f"points per axis = {traj.grid.n}"]
    summary += [f"{k} = {v!r}" for k, v in traj.diagnostics.as_dict().items()]
    summary.append(f"energy inequality slack (min) = {traj.diagnostics.energy_margin!r}")
    return {"fine.csv": csv_text(HEADERS["fine"], rows)}, summary


def cmd_averaged(cfg, inst):
    setup = _setup(cfg, inst)
    traj = setup.averaged(tuple(_times(cfg, inst)))
    rows = [(t, i, u[i]) for t, u in zip(traj.times, traj.u) for i in range(traj.grid.size)]
    summary = [
        f"effective tensor = {setup.Abar.matrix.tolist()!r}",
        f"points per axis = {traj.grid.n}",
        f"bound envelope slack (min) = {traj.bound_margin!r}",
    ]
    summary += [f"{k} = {v!r}" for k, v in traj.diagnostics.as_dict().items() if k != "v_energy_sup"]
    return {"averaged.csv": csv_text(HEADERS["averaged"], rows)}, summary


def cmd_converge(cfg, inst):
    setup = _setup(cfg, inst)
    rep = converge_study(inst, inst.eps, cfg.replicas, cfg.dt, tuple(_times(cfg, inst)), setup=setup)
    rows = [
        (r.eps, r.replica, r.sup_l2_error, r.final_l2_error, r.diagnostics["energy_sup"],
         r.diagnostics["grad_energy_int"], r.diagnostics["dudt_energy"])
        for r in rep.records
    ]
    summary = [f"delta_tol = {rep.delta_tol!r}", f"sup norm of averaged solution = {rep.ubar_sup!r}"]
    for e, m, s, p in zip(rep.eps, rep.mean_error, rep.stderr, rep.exceedance):
        summary.append(f"epsilon = {e!r}: mean error = {m!r}, stderr = {s!r}, P(error > delta_tol) = {p!r}")
    summary.append(f"observed rate (log-log slope in epsilon) = {rep.observed_rate!r}")
    for key, vals in rep.diagnostic_table().items():
        summary.append(f"{key} by epsilon = {vals.tolist()!r} (max/min = {vals.max() / vals.min()!r})")
    return {"converge.csv": csv_text(HEADERS["converge"], rows)}, summary


def cmd_mixing(cfg, inst):
    grid, noise, phi, xi, eta = _fast_inputs(inst, cfg.mixing_points)
    proc = FastProcess(grid, noise, cfg.mixing_tau)
    Phi = reaction_functional(inst.alpha, grid, phi, cfg.mixing_eps_cell)
    lip = inst.alpha.lip * norms(grid, phi)[0]
    curve = mixing_curve(proc, Phi, eta, xi, cfg.mixing_times, cfg.mixing_samples, lip, seed=cfg.seed)
    rows = list(zip(curve.t, curve.gap, curve.bound))
    summary = [
        f"tau = {cfg.mixing_tau!r}",
        f"fitted decay rate = {curve.rate!r} (1/tau = {1.0 / cfg.mixing_tau!r})",
        f"resolvable points = {int(curve.resolvable.sum())} of {len(curve.t)}",
        f"max stationary variance, covariance Q/2 = {float(noise.sigma2.max())!r}",
        f"max stationary variance, covariance Q = {float(noise.sigma2_full_q.max())!r}",
    ]
    return {"mixing.csv": csv_text(HEADERS["mixing"], rows)}, summary


def cmd_khasminskii(cfg, inst):
    grid, noise, phi, xi, eta = _fast_inputs(inst, cfg.khasminskii_points)
    rep = khasminskii_test(inst.alpha, noise, xi, eta, phi, grid, cfg.khasminskii_deltas, cfg.khasminskii_samples,
                           cfg.khasminskii_tau, cfg.khasminskii_eps_cell, seed=cfg.seed, order=cfg.hermite_order)
    rows = list(zip(rep.delta, rep.lhs, rep.stderr))
    summary = [
        f"tau = {cfg.khasminskii_tau!r}",
        f"invariant integral = {rep.target!r}",
        f"log-log slope = {rep.slope!r}",
    ]
    return {"khasminskii.csv": csv_text(HEADERS["khasminskii"], rows)}, summary


def cmd_corrector(cfg, inst):
    setup = _setup(cfg, inst)
    rows = corrector_study(inst, inst.eps, cfg.corrector_replicas, setup=setup, snapshot_times=tuple(_times(cfg, inst)))
    summary = []
    for e in inst.eps:
        gaps = [g for ee, _, g in rows if ee == e]
        summary.append(f"epsilon = {e!r}: mean gap = {float(np.mean(gaps))!r}")
    return {"corrector.csv": csv_text(HEADERS["corrector"], rows)}, summary


def cmd_validate(cfg, inst):
    report = validate(inst)
    grid = build_grid(inst.dim, max(31, inst.noise.modes))
    noise = inst.noise.discretize(grid)
    lines = report.lines() + [
        f"max stationary variance, covariance Q/2 = {float(noise.sigma2.max())!r}",
        f"max stationary variance, covariance Q = {float(noise.sigma2_full_q.max())!r}",
    ]
    print("\n".join(lines))
    return {}, lines


HANDLERS = {
    "cell": cmd_cell,
    "fine": cmd_fine,
    "averaged": cmd_averaged,
    "converge": cmd_converge,
    "mixing": cmd_mixing,
    "khasminskii": cmd_khasminskii,
    "corrector": cmd_corrector,
    "validate": cmd_validate,
}


def run_subcommand(name, cfg, outdir=None):
    """Run ``name`` and write its outputs; returns the written paths.

    Nothing is written until the computation has finished, and any file
    written by a failing call is removed again.
    """
    if name not in HANDLERS:
        raise ConfigError(f"unknown command {name!r}")
    inst = cfg.problem()
    files, summary = HANDLERS[name](cfg, inst)
    outdir = Path(outdir or cfg.directory)
    written = []
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        for fname, text in files.items():
            path = outdir / fname
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            written.append(path)
        if cfg.plot:
            for fname in files:
                if fname.split(".")[0] in HEADERS:
                    written.append(emit_plot(outdir / fname))
        head = [f"command = {name}", f"version = {__version__}", f"seed = {cfg.seed}", f"kernel backend = {kernels.BACKEND}"]
        path = outdir / "summary.txt"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(head) + "\n\n[results]\n" + "\n".join(summary) + "\n\n" + write_config(cfg))
        written.append(path)
    except BaseException:
        for path in written:
            Path(path).unlink(missing_ok=True)
        raise
    return written


def build_parser():
    parser = argparse.ArgumentParser(prog="stochhom", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("-c", "--config", help="run configuration file")
        src.add_argument("-i", "--instance", help="built-in instance with default settings")
        p.add_argument("-o", "--output", help="output directory (overrides [output] directory)")
    p = sub.add_parser("plot")
    p.add_argument("report", help="CSV report written by another command")
    p.add_argument("--kind", choices=("line", "loglog"))
    p.add_argument("--out", help="SVG path (default: next to the report)")
    return parser


CONFIG_ERRORS = (ConfigError, AssumptionViolation, KeyError, ValueError, OSError)
NUMERICAL_ERRORS = (SolverError, NumericalFailure, ArithmeticError)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            print(emit_plot(args.report, args.kind, args.out))
            return 0
        cfg = parse_config(args.config) if args.config else RunConfig(instance=args.instance)
        for path in run_subcommand(args.command, cfg, args.output):
            print(path)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except CONFIG_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
