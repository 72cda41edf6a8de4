"""Penalty continuation for sample-average problems.

The almost-sure conic constraint is replaced by the smooth quadratic
penalty ``0.5 * dist(G(u, xi), K)^2`` averaged over scenarios and scaled
by a weight ``gamma`` that grows with the sample size like
``c * N**exponent`` (exponent 1/4 by default, which balances the 1/gamma
feasibility bias against the gamma-amplified sampling error).  A path of
increasing weights is solved with warm starts, and per-scenario
multipliers are recovered from the penalty gradient at the final point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputContractError
from .program import (
    ScenarioSet,
    StochasticProgram,
    _g_jac_t_rows,
    _g_values,
    _j_values_grads,
    draw_scenarios,
)
from .prox import SolveResult, solve_composite


@dataclass
class PenaltyPathConfig:
    """Penalty schedule: final weight ``c_gamma * N**exponent``, reached
    through a ladder of continuation stages (defaults to final/8, /4, /2,
    final).  ``tol_per_stage`` is the base solver tolerance; each stage
    runs at ``tol_per_stage / sqrt(gamma)`` since the penalty curvature
    grows with gamma."""

    c_gamma: float = 1.0
    exponent: float = 0.25
    gamma_stages: Optional[Sequence[float]] = None
    tol_per_stage: float = 1e-8

    def __post_init__(self):
        if self.c_gamma <= 0:
            raise InputContractError("c_gamma must be positive")
        if not 0.0 < self.exponent < 1.0:
            raise InputContractError("exponent must lie in (0, 1)")
        if self.tol_per_stage <= 0:
            raise InputContractError("tol_per_stage must be positive")
        if self.gamma_stages is not None:
            stages = [float(g) for g in self.gamma_stages]
            if not stages or any(g <= 0 for g in stages):
                raise InputContractError("gamma stages must be positive")
            if any(b <= a for a, b in zip(stages, stages[1:])):
                raise InputContractError("gamma stages must be strictly increasing")
            self.gamma_stages = stages


def gamma_schedule(N: int, config: PenaltyPathConfig) -> float:
    """Penalty weight for sample size N: ``c_gamma * N**exponent``."""
    if N < 1:
        raise InputContractError("sample size N must be at least 1")
    return config.c_gamma * float(N) ** config.exponent


def assemble_penalized(program: StochasticProgram, scenarios: ScenarioSet, gamma: float):
    """Smooth part of the penalized problem as a value-and-gradient callable.

    value(u)  = mean_i J(u, xi_i) + gamma * mean_i 0.5 dist(G(u, xi_i), K)^2
    grad(u)   = mean_i grad J      + gamma * mean_i D_u G(u, xi_i)^* (G - proj_K G)

    The regularizer is *not* included; it is handled by the prox in the
    solver.
    """
    if gamma <= 0:
        raise InputContractError("penalty weight gamma must be positive")
    cone = program.cone

    def value_grad(u: np.ndarray):
        u = program.check_u(u)
        vals, grads = _j_values_grads(program, scenarios.xi, u)
        G = _g_values(program, scenarios.xi, u)
        residual = np.empty_like(G)
        pen = 0.0
        for i in range(scenarios.N):
            residual[i] = G[i] - cone.project(G[i])
            pen += 0.5 * float(residual[i] @ residual[i])
        pen /= scenarios.N
        value = float(vals.mean()) + gamma * pen
        grad = grads.mean(axis=0)
        if pen > 0.0:  # all residuals vanish on the cone; skip the adjoint pass
            rows = _g_jac_t_rows(program, scenarios.xi, u, residual)
            grad = grad + gamma * rows.mean(axis=0)
        return value, grad

    return value_grad


@dataclass
class PathResult:
    """Final stage result plus per-stage telemetry of a penalty path."""

    result: SolveResult
    gamma_final: float
    scenarios: ScenarioSet
    stage_gammas: list[float] = field(default_factory=list)
    stage_results: list[SolveResult] = field(default_factory=list)
    stage_penalties: list[float] = field(default_factory=list)
    stage_max_violations: list[float] = field(default_factory=list)

    @property
    def u(self) -> np.ndarray:
        return self.result.u_star

    @property
    def all_stages_converged(self) -> bool:
        return all(r.converged for r in self.stage_results)


def solve_penalty_path(
    program: StochasticProgram,
    N: int,
    base_seed: int,
    config: PenaltyPathConfig,
    tol: Optional[float] = None,
    max_iter: int = 20000,
    u0=None,
    accelerate: bool = False,
    scenarios: Optional[ScenarioSet] = None,
) -> PathResult:
    """Draw scenarios once (or reuse a supplied set) and solve the
    penalized problem along the continuation ladder, warm-starting each
    stage from the previous one.

    A non-convergent stage is flagged in the telemetry and the path
    continues.  The final stage runs at ``min(tol, tol/sqrt(gamma))`` so
    the returned result honors the requested tolerance.
    """
    from .program import saa_constraint_residual

    if scenarios is None:
        scenarios = draw_scenarios(program, N, base_seed)
    if tol is None:
        tol = config.tol_per_stage
    gamma_final = (
        config.gamma_stages[-1] if config.gamma_stages else gamma_schedule(N, config)
    )
    stages = (
        list(config.gamma_stages)
        if config.gamma_stages
        else [gamma_final / 8.0, gamma_final / 4.0, gamma_final / 2.0, gamma_final]
    )

    u = program.psi.project(
        np.zeros(program.n) if u0 is None else np.asarray(u0, float)
    )
    stage_results: list[SolveResult] = []
    stage_penalties: list[float] = []
    stage_max_violations: list[float] = []
    total_iters = 0
    t0 = time.perf_counter()
    for stage_idx, gamma in enumerate(stages):
        stage_tol = tol / np.sqrt(gamma)
        if stage_idx == len(stages) - 1:
            stage_tol = min(tol, stage_tol)
        res = solve_composite(
            assemble_penalized(program, scenarios, gamma),
            program.psi,
            u,
            tol=stage_tol,
            max_iter=max_iter,
            accelerate=accelerate,
        )
        u = res.u_star
        total_iters += res.iterations
        max_viol, mean_pen = saa_constraint_residual(program, scenarios, u)
        stage_results.append(res)
        stage_penalties.append(mean_pen)
        stage_max_violations.append(max_viol)

    final = stage_results[-1]
    combined = SolveResult(
        u_star=final.u_star,
        objective=final.objective,
        prox_residual=final.prox_residual,
        iterations=total_iters,
        converged=final.converged,
        step_size_final=final.step_size_final,
        wall_time_ms=1e3 * (time.perf_counter() - t0),
    )
    return PathResult(
        result=combined,
        gamma_final=gamma_final,
        scenarios=scenarios,
        stage_gammas=list(stages),
        stage_results=stage_results,
        stage_penalties=stage_penalties,
        stage_max_violations=stage_max_violations,
    )


def recover_multipliers(
    program: StochasticProgram, scenarios: ScenarioSet, u, gamma: float
) -> list[np.ndarray]:
    """Per-scenario multipliers ``gamma * (G - proj_K G)`` at ``u``.

    Each recovered vector lies in the polar cone (Moreau decomposition),
    so dual feasibility holds by construction; the list scales linearly
    with gamma.
    """
    if gamma <= 0:
        raise InputContractError("penalty weight gamma must be positive")
    u = program.check_u(u)
    G = _g_values(program, scenarios.xi, u)
    return [gamma * program.cone.penalty_grad(G[i]) for i in range(scenarios.N)]
