"""Command-line front end.

Subcommands::

    cdac solve CONFIG          exact policy: value/policy CSVs + PPM rasters
    cdac approx CONFIG         fit RBF/GPR model + agreement-vs-exact report
    cdac simulate CONFIG       Monte-Carlo batch for one policy
    cdac compare CONFIG        calibrated multi-policy comparison table
    cdac export-policy CONFIG  policy map (optimal or baseline) as CSV + PPM

Every subcommand takes ``--set section.key=value`` overrides and writes the
fully resolved config next to its outputs, so any run can be reproduced from
its output directory alone.  Exit codes: 0 success, 2 config error, 3
non-convergence, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .approx import (DivergenceError, FactorizationError, approx_policy_map,
                     gpr_value_iteration, policy_agreement,
                     rbf_value_iteration)
from .baselines import ThresholdPolicy, threshold_policy_map
from .backends import default_backend_name
from .config import ConfigError, ExperimentConfig, effective_config_text, load_config
from .grid import SimplexGrid
from .simulate import compare, run_batch
from .solver import ConvergenceError, solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_RUNTIME = 4


def _outdir(cfg: ExperimentConfig, args) -> Path:
    out = Path(args.out) if args.out else Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(effective_config_text(cfg))
    return out


def _solve_exact(cfg: ExperimentConfig):
    grid = SimplexGrid(cfg.solver.m)
    return solve(cfg.task, cfg.costs, grid, tolerance=cfg.solver.tolerance,
                 max_iters=cfg.solver.max_iters, interp=cfg.solver.interp,
                 backend=cfg.solver.backend)


def _print_report(report) -> None:
    status = "converged" if report.converged else "DID NOT CONVERGE"
    print(f"{status} in {report.iterations} sweeps "
          f"(final delta {report.final_delta:.3e}, "
          f"{report.wall_time:.2f}s, backend {report.backend})")


def cmd_solve(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args)
    vf, policy, report = _solve_exact(cfg)
    if "csv" in cfg.output.formats:
        io.write_value_csv(vf, cfg.task, out / "value.csv")
        io.write_policy_csv(policy, out / "policy.csv")
    if "ppm" in cfg.output.formats:
        io.write_policy_rasters(policy, out)
    _print_report(report)
    for a, label in enumerate(cfg.task.action_labels):
        print(f"fixation {label}: stop region {policy.stop_count(a)} cells "
              f"({100 * policy.stop_fraction(a):.1f}%)")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_approx(cfg: ExperimentConfig, args) -> int:
    if cfg.approx_method is None:
        raise ConfigError("approx.method: required for the approx command")
    out = _outdir(cfg, args)
    _, exact_policy, exact_report = _solve_exact(cfg)
    if cfg.approx_method == "rbf":
        model, report = rbf_value_iteration(cfg.task, cfg.costs, cfg.rbf)
    else:
        model, report = gpr_value_iteration(cfg.task, cfg.costs, cfg.gpr)
    io.save_model(model, out / f"model_{cfg.approx_method}.txt")
    approx_pm = approx_policy_map(model, exact_policy.grid)
    agreement = policy_agreement(approx_pm, exact_policy)
    if "csv" in cfg.output.formats:
        lines = ["fixation,agreement"]
        for a, label in enumerate(cfg.task.action_labels):
            lines.append(f"{label},{agreement['per_fixation'][a]!r}")
        lines.append(f"overall,{agreement['overall']!r}")
        (out / "agreement.csv").write_text("\n".join(lines) + "\n")
        io.write_policy_csv(approx_pm, out / "policy_approx.csv")
    if "ppm" in cfg.output.formats:
        io.write_policy_rasters(approx_pm, out, prefix="policy_approx")
    print(f"exact solve: {exact_report.iterations} sweeps")
    _print_report(report)
    print(f"policy agreement with exact on the {cfg.solver.m}-grid: "
          f"{agreement['overall']:.4f}")
    print(f"outputs in {out}")
    if not report.converged:
        raise ConvergenceError("approximate solver did not converge", report)
    return EXIT_OK


def _sim_policy(cfg: ExperimentConfig):
    if cfg.sim.policy == "cdac":
        _, policy, _ = _solve_exact(cfg)
        return policy, None
    if cfg.sim.threshold is None:
        raise ConfigError(
            f"sim.threshold: required for the {cfg.sim.policy} policy")
    return ThresholdPolicy(cfg.sim.policy, cfg.sim.threshold), cfg.sim.threshold


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args)
    policy, threshold = _sim_policy(cfg)
    report = run_batch(policy, cfg.task, cfg.costs, cfg.sim.trials,
                       cfg.sim.seed,
                       initial_fixation=cfg.initial_fixation_index(),
                       max_steps=cfg.sim.max_steps, threads=args.threads)
    if "csv" in cfg.output.formats:
        io.write_batch_csv(cfg.sim.policy, cfg.costs, report,
                           out / "batch.csv", threshold=threshold)
    print(f"{cfg.sim.policy}: accuracy {report.accuracy:.4f} "
          f"(+-{report.se_accuracy:.4f}), steps {report.mean_steps:.3f}, "
          f"switches {report.mean_switches:.3f}, cost {report.mean_cost:.4f}, "
          f"truncated {report.truncated}/{report.trials}")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args)
    cost_grid = [(c, cs) for c in cfg.compare.c_values
                 for cs in cfg.compare.cs_values]
    rows = compare(cfg.compare.policies, cfg.task, cost_grid, cfg.sim.trials,
                   cfg.sim.seed, grid_m=cfg.solver.m,
                   tolerance=cfg.solver.tolerance,
                   max_iters=cfg.solver.max_iters,
                   initial_fixation=cfg.initial_fixation_index(),
                   max_steps=cfg.sim.max_steps,
                   calibration_trials=cfg.compare.calibration_trials,
                   accuracy_tol=cfg.compare.accuracy_tol,
                   backend=cfg.solver.backend, threads=args.threads)
    if "csv" in cfg.output.formats:
        io.write_compare_csv(rows, out / "compare.csv")
    header = (f"{'policy':<12}{'c':>8}{'c_s':>8}{'thresh':>9}{'acc':>9}"
              f"{'steps':>9}{'switch':>9}{'cost':>9}")
    print(header)
    for row in rows:
        thr = f"{row.threshold:.4f}" if row.threshold is not None else "-"
        r = row.report
        flag = " (calibration warning)" if row.calibration_warning else ""
        print(f"{row.policy:<12}{row.c:>8.3f}{row.c_s:>8.3f}{thr:>9}"
              f"{r.accuracy:>9.4f}{r.mean_steps:>9.3f}"
              f"{r.mean_switches:>9.3f}{r.mean_cost:>9.4f}{flag}")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_export_policy(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args)
    if args.from_csv:
        csv = io.read_policy_csv(args.from_csv)
        for a, label in enumerate(csv.fixation_labels):
            io.write_ppm(io.raster_from_csv(csv, a), out / f"policy_{label}.ppm")
        print(f"re-rasterized {args.from_csv} -> {out}")
        return EXIT_OK
    if cfg.sim.policy == "cdac":
        _, policy, _ = _solve_exact(cfg)
        tie_counts = None
    else:
        if cfg.sim.threshold is None:
            raise ConfigError(
                f"sim.threshold: required for the {cfg.sim.policy} policy")
        baseline = ThresholdPolicy(cfg.sim.policy, cfg.sim.threshold)
        policy, tie_counts = threshold_policy_map(
            baseline, cfg.task, SimplexGrid(cfg.solver.m))
    if "csv" in cfg.output.formats:
        io.write_policy_csv(policy, out / "policy.csv")
    if "ppm" in cfg.output.formats:
        io.write_policy_rasters(policy, out)
        if tie_counts is not None:
            io.write_pgm(tie_counts, policy.grid, out / "ties.pgm")
    print(f"policy map for {cfg.sim.policy} written to {out}")
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "approx": cmd_approx,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "export-policy": cmd_export_policy,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdac",
        description="Bayes-risk-optimal active sensing: solvers, baselines, "
                    "approximations, and simulation.")
    parser.add_argument("--version", action="version", version="cdac 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("config", help="path to the INI experiment config")
        sp.add_argument("--set", action="append", default=[], dest="overrides",
                        metavar="SECTION.KEY=VALUE",
                        help="override a config value")
        sp.add_argument("--out", default=None,
                        help="override output.directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for simulation batches "
                             "(results are identical for any value)")
        if name == "export-policy":
            sp.add_argument("--from-csv", default=None,
                            help="re-rasterize an existing policy CSV instead "
                                 "of computing one")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides=args.overrides)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DivergenceError, FactorizationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
