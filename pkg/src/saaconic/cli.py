"""Command-line front end.

Subcommands: ``solve`` (one penalty path with stage telemetry), ``sweep``
(consistency experiment grid), ``certify`` (feasibility certificate),
``phi`` (error-measure estimate at a level), and ``check-grad``
(finite-difference audit of a problem's analytic derivatives).

Exit codes: 0 success, 1 configuration/contract failure, 2 numerical
failure (including a failed gradient audit).  Output lands in ``--out``,
the config's ``run.out``, or ``$SAACONIC_OUT`` (default ``runs``).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import apps
from .config import ConfigError, RunConfig, parse_config
from .errors import InputContractError, NumericalDomainError
from .kkt import kkt_report
from .lab import (
    certify_epsilon_feasibility,
    estimate_error_measure,
    gradient_variance_estimates,
    path_stage_records,
    run_consistency_sweep,
)
from .penalty import recover_multipliers, solve_penalty_path
from .program import derive_seed, estimate_lipschitz, scenario_rng
from .prox import check_gradient
from .report import default_out_dir, write_json, write_records_json, write_sweep_csv


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saaconic",
        description="Sample-average conic-constrained solver and experiment lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="config file path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--gamma-c", type=float, default=None,
                       help="override penalty schedule constant")
        p.add_argument("--gamma-exp", type=float, default=None,
                       help="override penalty schedule exponent")
        p.add_argument("--gamma-stages", default=None,
                       help="override continuation stages, e.g. '2,4,8'")

    add_common(sub.add_parser("solve", help="run one penalty path"))
    add_common(sub.add_parser("sweep", help="run a consistency sweep"))
    add_common(sub.add_parser("certify", help="run a feasibility certificate"))
    phi = sub.add_parser("phi", help="estimate the error measure at a level")
    add_common(phi)
    phi.add_argument("--s", type=float, default=None, help="override the level")

    cg = sub.add_parser("check-grad", help="finite-difference gradient audit")
    cg.add_argument("--problem", required=True, help="problem id")
    cg.add_argument("--seed", type=int, default=0)
    cg.add_argument("--trials", type=int, default=3)
    cg.add_argument("--step", type=float, default=1e-6)
    cg.add_argument("--config", default=None, help="optional config for parameters")
    return parser


def _apply_gamma_overrides(cfg: RunConfig, args) -> RunConfig:
    gamma = cfg.gamma
    if args.gamma_c is not None:
        gamma = replace(gamma, c_gamma=args.gamma_c)
    if args.gamma_exp is not None:
        gamma = replace(gamma, exponent=args.gamma_exp)
    if args.gamma_stages is not None:
        stages = [float(tok) for tok in args.gamma_stages.replace(",", " ").split()]
        gamma = replace(gamma, gamma_stages=stages)
    # re-run the dataclass validation on the overridden values
    gamma = type(gamma)(
        c_gamma=gamma.c_gamma, exponent=gamma.exponent,
        gamma_stages=gamma.gamma_stages, tol_per_stage=gamma.tol_per_stage,
    )
    return replace(cfg, gamma=gamma)


def _out_dir(cfg: RunConfig, args) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.out_dir:
        return Path(cfg.out_dir)
    return default_out_dir()


def _write_records(records, out: Path, stem: str, fmt: str, plots: bool) -> None:
    if fmt == "json":
        write_records_json(records, out / f"{stem}.json")
    else:
        write_sweep_csv(records, out / f"{stem}.csv")
    if plots and records:
        from .plots import emit_plots

        emit_plots(records, out)


def _cmd_solve(cfg: RunConfig, out: Path) -> int:
    program = apps.build_program(cfg.problem_id, cfg.problem_params)
    seed = cfg.seeds[0]
    path = solve_penalty_path(
        program, cfg.n_solve, derive_seed(seed, cfg.n_solve), cfg.gamma,
        tol=cfg.tol, max_iter=cfg.max_iter, accelerate=cfg.accelerate,
    )
    records = path_stage_records(program, path, seed)
    _write_records(records, out, "solve", cfg.fmt, cfg.plots)
    mu = recover_multipliers(program, path.scenarios, path.u, path.gamma_final)
    report = kkt_report(program, path.scenarios, path.u, mu, path.gamma_final)
    variances = gradient_variance_estimates(
        program, path.u, cfg.validate_M, derive_seed(seed, cfg.n_solve, 2),
        gamma=path.gamma_final,
    )
    write_json(
        {
            "problem": cfg.problem_id,
            "N": cfg.n_solve,
            "seed": seed,
            "gamma_final": path.gamma_final,
            "objective": path.result.objective,
            "prox_residual": path.result.prox_residual,
            "iterations": path.result.iterations,
            "converged": path.result.converged,
            "u": path.u,
            "kkt": dict(report.__dict__),
            "gradient_variances": variances,
            "wall_time_ms": path.result.wall_time_ms,
        },
        out / "result.json",
    )
    if cfg.dump_scenarios:
        path.scenarios.to_csv(out / "scenarios.csv")
    return 0


def _cmd_sweep(cfg: RunConfig, out: Path) -> int:
    program = apps.build_program(cfg.problem_id, cfg.problem_params)
    reference = None
    if cfg.reference_n:
        ref_path = solve_penalty_path(
            program, cfg.reference_n, derive_seed(cfg.seeds[0], cfg.reference_n),
            cfg.gamma, tol=cfg.tol, max_iter=cfg.max_iter, accelerate=cfg.accelerate,
        )
        reference = ref_path.u
        write_json(
            {
                "problem": cfg.problem_id,
                "reference_n": cfg.reference_n,
                "opt_value": ref_path.result.objective,
                "converged": ref_path.result.converged,
                "u": ref_path.u,
                "wall_time_ms": ref_path.result.wall_time_ms,
            },
            out / "reference.json",
        )
    records = run_consistency_sweep(
        program, cfg.N_list, cfg.seeds, cfg.method, cfg.gamma, reference,
        tol=cfg.tol, max_iter=cfg.max_iter, accelerate=cfg.accelerate,
        validation_M=cfg.validate_M, rho=cfg.rho,
    )
    _write_records(records, out, "sweep", cfg.fmt, cfg.plots)
    failures = [r for r in records if r.error]
    for rec in failures:
        print(f"cell (N={rec.N}, seed={rec.seed}) failed: {rec.error}", file=sys.stderr)
    return 0


def _cmd_certify(cfg: RunConfig, out: Path) -> int:
    program = apps.build_program(cfg.problem_id, cfg.problem_params)
    estimated = False
    lipschitz = program.lipschitz_G
    if lipschitz is None:
        lipschitz = estimate_lipschitz(program, seed=cfg.seeds[0])
        estimated = True
        print(
            f"no analytic constraint Lipschitz bound; using sampled estimate "
            f"{lipschitz:.6g} (certificate marked heuristic)",
            file=sys.stderr,
        )
    cert = certify_epsilon_feasibility(
        program, cfg.certify_epsilon, cfg.certify_rho, cfg.certify_delta,
        cfg.certify_trials, cfg.seeds[0],
        tol=cfg.tol, max_iter=cfg.max_iter,
        n_cover_points=cfg.certify_cover_points,
        validation_M=cfg.certify_validation_M,
        required_N_override=cfg.certify_required_n_override,
        lipschitz_G=lipschitz, lipschitz_is_estimate=estimated,
    )
    write_json(cert.to_json_dict(), out / "certificate.json")
    print(
        f"required_N={cert.required_N} covering={cert.covering_number} "
        f"rate={cert.empirical_rate:.3f} threshold={cert.threshold:.3f} "
        f"passed={cert.passed}"
    )
    return 0


def _cmd_phi(cfg: RunConfig, out: Path, s_override) -> int:
    program = apps.build_program(cfg.problem_id, cfg.problem_params)
    s = cfg.phi_s if s_override is None else float(s_override)
    est = estimate_error_measure(
        program, s, M=cfg.phi_M, seed=cfg.seeds[0], tol=cfg.phi_tol,
        max_iter=cfg.max_iter, accelerate=cfg.accelerate,
    )
    write_json(
        {
            "problem": cfg.problem_id,
            "s": s,
            "phi": est.value,
            "converged": est.converged,
            "branch_objective": est.branch_objective,
            "branch_penalty": est.branch_penalty,
            "u": est.u,
        },
        out / "phi.json",
    )
    print(f"phi({s:.6g}) = {est.value:.6g} (converged={est.converged})")
    return 0


def _cmd_check_grad(args) -> int:
    params = {}
    if args.config:
        cfg = parse_config(args.config)
        params = cfg.problem_params
        if cfg.problem_id != args.problem:
            raise InputContractError(
                f"config is for problem {cfg.problem_id!r}, not {args.problem!r}"
            )
    program = apps.build_program(args.problem, params)
    worst = 0.0
    pts = program.psi.sample_domain(args.trials, seed=derive_seed(args.seed, 5))
    for t in range(args.trials):
        u = 0.5 * pts[t]  # stay inside the domain so probes remain admissible
        xi = program.sample(scenario_rng(derive_seed(args.seed, 6), t))
        err_j = check_gradient(lambda v: program.j_value_grad(v, xi), u, args.step)
        rng = np.random.default_rng(derive_seed(args.seed, 7, t))
        mu = rng.standard_normal(program.k)

        def paired(v):
            return (
                float(mu @ program.g_value(v, xi)),
                program.g_jacobian_transpose_apply(v, xi, mu),
            )

        err_g = check_gradient(paired, u, args.step)
        worst = max(worst, err_j, err_g)
    print(f"max relative gradient error over {args.trials} probes: {worst:.3e}")
    return 0 if worst <= 1e-4 else 2


def run_command(argv) -> int:
    """Execute a CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "check-grad":
            return _cmd_check_grad(args)
        cfg = parse_config(args.config)
        cfg = _apply_gamma_overrides(cfg, args)
        out = _out_dir(cfg, args)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            return _cmd_solve(cfg, out)
        if args.command == "sweep":
            return _cmd_sweep(cfg, out)
        if args.command == "certify":
            return _cmd_certify(cfg, out)
        if args.command == "phi":
            return _cmd_phi(cfg, out, args.s)
        raise InputContractError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except InputContractError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    except NumericalDomainError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
