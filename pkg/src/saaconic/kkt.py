"""KKT residual diagnostics for sample-average problems.

The per-scenario multipliers are never aggregated into an explicit dual
object; the aggregate is represented by its atoms (scenario, multiplier)
and every derived quantity — stationarity via the prox fixed-point
residual, the signed complementarity pairing, polar-cone residuals, and
the atomic dual norm — is computed directly from the atoms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputContractError
from .program import ScenarioSet, StochasticProgram, _g_jac_t_rows, _g_values, _j_values_grads

logger = logging.getLogger(__name__)


@dataclass
class KktReport:
    """Residuals of the sample KKT system at a primal-dual candidate.

    ``stationarity`` is reported at ``probe_step`` and again at 1e-2
    (``stationarity_small``) to expose step-scaling sensitivity of the
    prox fixed-point residual.  ``complementarity`` is the raw signed
    average pairing.  ``duplicate_atoms`` notes repeated scenarios, for
    which the atomic dual-norm identity is only an upper bound.
    """

    stationarity: float
    stationarity_small: float
    complementarity: float
    dual_feasibility: float
    primal_feasibility: float
    multiplier_norm: float
    N: int
    gamma: Optional[float] = None
    probe_step: float = 1.0
    duplicate_atoms: bool = False


def aggregate_multiplier_norm(mu_list) -> float:
    """Dual norm of the scenario-atomic multiplier: mean of atom norms.

    For distinct atoms this equals the operator norm of the averaged
    evaluation functional on continuous test functions (choose a unit
    function peaking along each atom's direction).
    """
    if not len(mu_list):
        raise InputContractError("multiplier list must be nonempty")
    dims = {np.asarray(mu).shape for mu in mu_list}
    if len(dims) != 1:
        raise InputContractError("multiplier vectors must share one dimension")
    return float(np.mean([np.linalg.norm(np.asarray(mu, float)) for mu in mu_list]))


def _kkt_gradient(program: StochasticProgram, scenarios: ScenarioSet, u, mu_list):
    u = program.check_u(u)
    mu = np.asarray(mu_list, float)
    if mu.shape != (scenarios.N, program.k):
        raise InputContractError(
            f"expected {scenarios.N} multipliers of length {program.k}"
        )
    _, grads = _j_values_grads(program, scenarios.xi, u)
    rows = _g_jac_t_rows(program, scenarios.xi, u, mu)
    return u, grads.mean(axis=0) + rows.mean(axis=0)


def stationarity_residual(program: StochasticProgram, scenarios: ScenarioSet, u,
                          mu_list, probe_step: float = 1.0) -> float:
    """Prox fixed-point norm of the Lagrangian gradient at probe step t:

        || u - prox_{t psi}(u - t (mean grad J + mean D_u G^* mu)) || / t

    Zero exactly when the stationarity inclusion holds at ``u``.
    """
    if probe_step <= 0:
        raise InputContractError("probe_step must be positive")
    u, g = _kkt_gradient(program, scenarios, u, mu_list)
    moved = program.psi.prox(u - probe_step * g, probe_step)
    return float(np.linalg.norm(u - moved) / probe_step)


def complementarity(mu_list, g_values) -> float:
    """Signed average pairing (1/N) sum_i <mu_i, G(u, xi_i)>."""
    if len(mu_list) != len(g_values):
        raise InputContractError("multiplier and constraint lists differ in length")
    if not len(mu_list):
        raise InputContractError("multiplier list must be nonempty")
    total = 0.0
    for mu, gv in zip(mu_list, g_values):
        total += float(np.asarray(mu, float) @ np.asarray(gv, float))
    return total / len(mu_list)


def _has_duplicate_atoms(scenarios: ScenarioSet) -> bool:
    rows = {row.tobytes() for row in np.asarray(scenarios.xi)}
    return len(rows) < scenarios.N


def kkt_report(program: StochasticProgram, scenarios: ScenarioSet, u, mu_list,
               gamma: Optional[float] = None, probe_step: float = 1.0) -> KktReport:
    """Assemble all residuals at a primal-dual candidate.

    primal_feasibility is the worst scenario distance to the cone;
    dual_feasibility the worst polar-cone residual over the multipliers.
    """
    u = program.check_u(u)
    G = _g_values(program, scenarios.xi, u)
    dists = [float(np.linalg.norm(G[i] - program.cone.project(G[i])))
             for i in range(scenarios.N)]
    dup = _has_duplicate_atoms(scenarios)
    if dup:
        logger.info(
            "duplicate scenario atoms present; atomic dual norm is an upper bound"
        )
    return KktReport(
        stationarity=stationarity_residual(program, scenarios, u, mu_list, probe_step),
        stationarity_small=stationarity_residual(program, scenarios, u, mu_list, 1e-2),
        complementarity=complementarity(mu_list, list(G)),
        dual_feasibility=max(
            program.cone.polar_residual(np.asarray(mu, float)) for mu in mu_list
        ),
        primal_feasibility=max(dists),
        multiplier_norm=aggregate_multiplier_norm(mu_list),
        N=scenarios.N,
        gamma=gamma,
        probe_step=probe_step,
        duplicate_atoms=dup,
    )
