"""Experiment drivers: consistency sweeps, the minimax error measure,
covering-number sample-size bounds, and feasibility certification.

Every driver derives its random streams from ``(seed, N, role)`` labels,
so identical inputs reproduce identical outputs; cell failures are
recorded in the output rows rather than aborting a sweep.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputContractError
from .kkt import KktReport, kkt_report
from .penalty import PathResult, PenaltyPathConfig, recover_multipliers, solve_penalty_path
from .program import (
    StochasticProgram,
    _g_jac_t_rows,
    _g_values,
    _j_values_grads,
    derive_seed,
    draw_scenarios,
    validation_estimate,
)
from .prox import solve_composite

SCHEMA_VERSION = "saaconic.v1"


@dataclass
class SweepRecord:
    """One flattened result row per (problem, method, N, seed) cell or
    per continuation stage of a single solve."""

    problem: str
    method: str
    N: int
    seed: int
    stage: int
    gamma: Optional[float]
    opt_value: float
    dist_to_reference: Optional[float]
    stationarity: float
    stationarity_small: float
    complementarity: float
    dual_feasibility: float
    primal_feasibility: float
    multiplier_norm: float
    mean_beta: float
    iterations: int
    converged: bool
    error: str
    wall_time_ms: float

    COLUMNS = (
        "schema", "problem", "method", "N", "seed", "stage", "gamma",
        "opt_value", "dist_to_reference", "stationarity", "stationarity_small",
        "complementarity", "dual_feasibility", "primal_feasibility",
        "multiplier_norm", "mean_beta", "iterations", "converged", "error",
        "wall_time_ms",
    )

    def row(self) -> dict:
        d = {"schema": SCHEMA_VERSION}
        for name in self.COLUMNS[1:]:
            d[name] = getattr(self, name)
        return d


def _record_from_report(problem_id, method, N, seed, stage, gamma, opt_value,
                        dist_ref, report: KktReport, mean_beta, iterations,
                        converged, wall_ms) -> SweepRecord:
    return SweepRecord(
        problem=problem_id, method=method, N=N, seed=seed, stage=stage,
        gamma=gamma, opt_value=opt_value, dist_to_reference=dist_ref,
        stationarity=report.stationarity,
        stationarity_small=report.stationarity_small,
        complementarity=report.complementarity,
        dual_feasibility=report.dual_feasibility,
        primal_feasibility=report.primal_feasibility,
        multiplier_norm=report.multiplier_norm,
        mean_beta=mean_beta, iterations=iterations, converged=converged,
        error="", wall_time_ms=wall_ms,
    )


def _failure_record(problem_id, method, N, seed, message) -> SweepRecord:
    nan = float("nan")
    return SweepRecord(
        problem=problem_id, method=method, N=N, seed=seed, stage=-1,
        gamma=None, opt_value=nan, dist_to_reference=None, stationarity=nan,
        stationarity_small=nan, complementarity=nan, dual_feasibility=nan,
        primal_feasibility=nan, multiplier_norm=nan, mean_beta=nan,
        iterations=0, converged=False, error=message, wall_time_ms=0.0,
    )


def run_consistency_sweep(
    program: StochasticProgram,
    N_list: Sequence[int],
    seeds: Sequence[int],
    method: str,
    config: Optional[PenaltyPathConfig] = None,
    reference=None,
    *,
    tol: Optional[float] = None,
    max_iter: int = 20000,
    accelerate: bool = False,
    validation_M: int = 4096,
    rho: float = 0.0,
) -> list[SweepRecord]:
    """Solve every (N, seed) cell and report optimal values, KKT residuals
    with recovered multipliers, out-of-sample mean penalties, and the
    distance to a reference solution when one is given.

    ``method`` is ``my-path`` (penalty continuation) or ``saa-oracle``
    (the program's exact per-sample solver, where available).
    """
    N_list = [int(N) for N in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise InputContractError("N_list must be strictly increasing")
    if not len(seeds):
        raise InputContractError("seeds must be nonempty")
    if method not in ("my-path", "saa-oracle"):
        raise InputContractError("method must be 'my-path' or 'saa-oracle'")
    if method == "saa-oracle" and program.exact_solver is None:
        raise InputContractError(
            f"program {program.problem_id!r} has no exact solver; use method 'my-path'"
        )
    config = config or PenaltyPathConfig()
    ref = None if reference is None else np.asarray(reference, float)

    records: list[SweepRecord] = []
    for N in N_list:
        for seed in seeds:
            seed = int(seed)
            t0 = time.perf_counter()
            try:
                scen_seed = derive_seed(seed, N)
                if method == "my-path":
                    path = solve_penalty_path(
                        program, N, scen_seed, config, tol=tol,
                        max_iter=max_iter, accelerate=accelerate,
                    )
                    u = path.u
                    gamma = path.gamma_final
                    mu = recover_multipliers(program, path.scenarios, u, gamma)
                    report = kkt_report(program, path.scenarios, u, mu, gamma)
                    opt_value = path.result.objective
                    iters = path.result.iterations
                    converged = path.all_stages_converged
                    stage = len(path.stage_gammas) - 1
                else:
                    scen = draw_scenarios(program, N, scen_seed)
                    sol = program.exact_solver(scen)
                    u = np.asarray(sol.u, float)
                    gamma = None
                    mu = sol.mu_list or [np.zeros(program.k)] * N
                    report = kkt_report(program, scen, u, mu, None)
                    opt_value = sol.value
                    iters = 0
                    converged = True
                    stage = 0
                val = validation_estimate(
                    program, u, validation_M, derive_seed(seed, N, 1), rho
                )
                dist_ref = None if ref is None else float(np.linalg.norm(u - ref))
                wall = 1e3 * (time.perf_counter() - t0)
                records.append(_record_from_report(
                    program.problem_id, method, N, seed, stage, gamma, opt_value,
                    dist_ref, report, val.mean_beta, iters, converged, wall,
                ))
            except Exception as exc:  # cell failures recorded, sweep continues
                records.append(_failure_record(
                    program.problem_id, method, N, seed, f"{type(exc).__name__}: {exc}"
                ))
    return records


def path_stage_records(program: StochasticProgram, path: PathResult,
                       seed: int) -> list[SweepRecord]:
    """Per-stage telemetry rows of one penalty path (for solve reports)."""
    records = []
    for stage, gamma in enumerate(path.stage_gammas):
        res = path.stage_results[stage]
        u = res.u_star
        mu = recover_multipliers(program, path.scenarios, u, gamma)
        report = kkt_report(program, path.scenarios, u, mu, gamma)
        records.append(_record_from_report(
            program.problem_id, "my-path", path.scenarios.N, seed, stage, gamma,
            res.objective, None, report, path.stage_penalties[stage],
            res.iterations, res.converged, res.wall_time_ms,
        ))
    return records


def gradient_variance_estimates(program: StochasticProgram, u, M: int, seed: int,
                                gamma: Optional[float] = None) -> dict:
    """Monte Carlo estimates of the scenario-wise gradient variances of the
    objective integrand and of the penalty composition at a fixed point.

    Diagnostic only (these are the quantities entering the bias/variance
    trade-off behind the fourth-root penalty schedule); nothing downstream
    consumes them.
    """
    if M < 2:
        raise InputContractError("variance estimation needs M >= 2 samples")
    u = program.check_u(u)
    scen = draw_scenarios(program, M, seed)
    _, grads = _j_values_grads(program, scen.xi, u)
    G = _g_values(program, scen.xi, u)
    residual = np.empty_like(G)
    for i in range(M):
        residual[i] = G[i] - program.cone.project(G[i])
    pen_grads = _g_jac_t_rows(program, scen.xi, u, residual)
    out = {
        "var_grad_objective": float(np.mean(np.sum(
            (grads - grads.mean(axis=0)) ** 2, axis=1))),
        "var_grad_penalty": float(np.mean(np.sum(
            (pen_grads - pen_grads.mean(axis=0)) ** 2, axis=1))),
        "M": int(M),
    }
    if gamma is not None:
        out["gamma"] = float(gamma)
    return out


# ---------------------------------------------------------------------------
# Minimax error measure
# ---------------------------------------------------------------------------


@dataclass
class PhiEstimate:
    """Estimated error-measure value at a level s (0 when s is attainable
    by a feasible point).  ``converged`` flags solver trouble."""

    value: float
    converged: bool
    u: np.ndarray
    branch_objective: float
    branch_penalty: float


def estimate_error_measure(
    program: StochasticProgram,
    s: float,
    *,
    M: int = 10_000,
    seed: int = 0,
    tau_stages: Sequence[float] = (1e-1, 1e-2, 1e-3),
    tol: float = 1e-8,
    max_iter: int = 20000,
    accelerate: bool = False,
) -> PhiEstimate:
    """Estimate min over u of max(objective excess over s, mean penalty).

    Expectations use one fixed M-scenario validation sample.  The inner
    minimization smooths the max with a log-sum-exp at temperatures
    ``tau_stages`` (warm-started continuation); the returned value is the
    exact max at the final point, clipped at zero.
    """
    if not math.isfinite(s):
        raise InputContractError("level s must be finite")
    scen = draw_scenarios(program, M, derive_seed(seed, 991))
    alpha = program.psi.quad_weight
    domain = program.psi.without_quad()
    cone = program.cone

    def branches(u):
        vals, grads = _j_values_grads(program, scen.xi, u)
        a = float(vals.mean()) + 0.5 * alpha * float(u @ u) - s
        ga = grads.mean(axis=0) + alpha * u
        G = _g_values(program, scen.xi, u)
        residual = np.empty_like(G)
        pen = 0.0
        for i in range(scen.N):
            residual[i] = G[i] - cone.project(G[i])
            pen += 0.5 * float(residual[i] @ residual[i])
        b = pen / scen.N
        gb = _g_jac_t_rows(program, scen.xi, u, residual).mean(axis=0)
        return a, ga, b, gb

    def smoothed(tau):
        def fun(u):
            a, ga, b, gb = branches(u)
            mx = max(a, b)
            wa = math.exp((a - mx) / tau)
            wb = math.exp((b - mx) / tau)
            z = wa + wb
            return mx + tau * math.log(z), (wa * ga + wb * gb) / z

        return fun

    u = domain.project(np.zeros(program.n))
    converged = True
    for tau in tau_stages:
        res = solve_composite(smoothed(tau), domain, u, tol=tol,
                              max_iter=max_iter, accelerate=accelerate)
        u = res.u_star
        converged = converged and res.converged
    a, _, b, _ = branches(u)
    return PhiEstimate(
        value=max(0.0, a, b), converged=converged, u=u,
        branch_objective=a, branch_penalty=b,
    )


# ---------------------------------------------------------------------------
# Sample-size bound and covering numbers
# ---------------------------------------------------------------------------


def sample_size_for_feasibility(epsilon: float, delta: float, Q: int) -> int:
    """Smallest integer N with N >= (1/epsilon) (ln(1/delta) + ln Q)."""
    if not 0.0 < epsilon < 1.0:
        raise InputContractError("epsilon must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise InputContractError("delta must lie in (0, 1)")
    if Q < 1:
        raise InputContractError("covering number Q must be at least 1")
    return int(math.ceil((math.log(1.0 / delta) + math.log(Q)) / epsilon))


def greedy_covering_number(points, nu: float) -> int:
    """Size of a greedy farthest-point nu-net of the given points.

    Upper-bounds the true covering number of the sampled set; runs until
    every point is within nu of a chosen center.
    """
    if nu <= 0:
        raise InputContractError("nu must be positive")
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.size == 0:
        raise InputContractError("points must be nonempty")
    dmin = np.linalg.norm(pts - pts[0], axis=1)
    count = 1
    while True:
        far = int(np.argmax(dmin))
        if dmin[far] <= nu:
            return count
        count += 1
        dmin = np.minimum(dmin, np.linalg.norm(pts - pts[far], axis=1))


# ---------------------------------------------------------------------------
# Feasibility certification
# ---------------------------------------------------------------------------


@dataclass
class FeasibilityCertificate:
    """Monte Carlo check of the covering-number sample-size rule."""

    epsilon: float
    rho: float
    delta: float
    covering_number: int
    required_N: int
    trials: int
    successes: int
    empirical_rate: float
    sigma_binomial: float
    threshold: float
    passed: bool
    lipschitz_G: float
    lipschitz_source: str
    heuristic: bool
    n_cover_points: int

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


def certify_epsilon_feasibility(
    program: StochasticProgram,
    epsilon: float,
    rho: float,
    delta: float,
    trials: int,
    base_seed: int,
    *,
    config: Optional[PenaltyPathConfig] = None,
    tol: float = 1e-5,
    max_iter: int = 20000,
    accelerate: bool = True,
    n_cover_points: int = 2000,
    validation_M: int = 100_000,
    required_N_override: Optional[int] = None,
    lipschitz_G: Optional[float] = None,
    lipschitz_is_estimate: bool = False,
) -> FeasibilityCertificate:
    """Certify that solutions of N-scenario samples at the prescribed N
    are rho-feasible with probability 1 - epsilon, across independent
    replications.

    Pipeline: cover the observation image of the admissible set by a
    greedy net at radius rho / (2 L), evaluate the sample-size bound, run
    ``trials`` replications (penalty path with a strong final weight so
    the sampled constraints hold to ~1e-4), and validate each solution
    out of sample with M fresh scenarios.  The certificate passes when
    the empirical success rate is at least 1 - delta - 2 sigma_binomial.
    """
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
        raise InputContractError("epsilon and delta must lie in (0, 1)")
    if rho <= 0:
        raise InputContractError("rho must be positive")
    if trials < 20:
        raise InputContractError("need at least 20 trials for a binomial check")
    L = lipschitz_G if lipschitz_G is not None else program.lipschitz_G
    if L is None:
        raise InputContractError(
            "program has no constraint Lipschitz bound; supply lipschitz_G= "
            "or compute one with saaconic.program.estimate_lipschitz(program)"
        )
    pts = program.psi.sample_domain(n_cover_points, seed=derive_seed(base_seed, 7))
    images = np.stack([program.b_apply(pt) for pt in pts])
    Q = greedy_covering_number(images, rho / (2.0 * L))
    required_N = (
        int(required_N_override)
        if required_N_override is not None
        else sample_size_for_feasibility(epsilon, delta, Q)
    )
    if required_N < 1:
        raise InputContractError("required_N must be at least 1")
    config = config or PenaltyPathConfig(gamma_stages=[50.0, 200.0, 1000.0],
                                         tol_per_stage=tol)

    successes = 0
    for t in range(trials):
        path = solve_penalty_path(
            program, required_N, derive_seed(base_seed, t, 2), config,
            tol=tol, max_iter=max_iter, accelerate=accelerate,
        )
        est = validation_estimate(
            program, path.u, validation_M, derive_seed(base_seed, t, 3), rho
        )
        if est.prob_feasible_rho >= 1.0 - epsilon:
            successes += 1
    rate = successes / trials
    sigma = math.sqrt(delta * (1.0 - delta) / trials)
    threshold = 1.0 - delta - 2.0 * sigma
    return FeasibilityCertificate(
        epsilon=epsilon, rho=rho, delta=delta, covering_number=Q,
        required_N=required_N, trials=trials, successes=successes,
        empirical_rate=rate, sigma_binomial=sigma, threshold=threshold,
        passed=rate >= threshold, lipschitz_G=float(L),
        lipschitz_source="estimated" if lipschitz_is_estimate else "supplied",
        heuristic=lipschitz_is_estimate, n_cover_points=n_cover_points,
    )
