"""Dual optimal transport on a finite metric space.

The decision is a pair of potential vectors (one value per atom of the
space, stacked), constrained by u1(x1) + u2(x2) <= cost(x1, x2) for every
pair and restricted to a sup-norm box.  A scenario is an independent
draw (x1, x2) from the two marginals; maximizing the expected sum of
potentials is written as minimization of

    J(u, (x1, x2)) = 2 * radius - u1(x1) - u2(x2),

which is nonnegative on the box and has the same minimizers.  Because
the space is finite, the full-support sample-average problem is a small
linear program; :func:`lp_solve` is the exact oracle, and per-scenario
multipliers are reconstructed from the LP constraint duals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..cones import Cone
from ..errors import InputContractError, NumericalDomainError
from ..program import OracleSolution, Regularizer, ScenarioSet, StochasticProgram

DEFAULTS = {
    "m": 5,
    "radius": 2.0,
    "positions": None,   # default: equispaced on [0, 2]
    "distances": None,   # optional explicit metric, overrides positions
    "p1": None,          # default: uniform
    "p2": None,
    "cost_csv": None,    # optional path to an m x m cost matrix
}


def _check_metric(dist: np.ndarray, m: int) -> np.ndarray:
    dist = np.asarray(dist, float)
    if dist.shape != (m, m):
        raise InputContractError("distance matrix shape mismatch")
    if np.any(np.abs(np.diag(dist)) > 1e-12) or not np.allclose(dist, dist.T, atol=1e-12):
        raise InputContractError("distance matrix must be symmetric with zero diagonal")
    if np.any(dist < -1e-12):
        raise InputContractError("distances must be nonnegative")
    # triangle inequality: d(i,k) <= d(i,j) + d(j,k) for every triple
    worst = float(np.max(dist[:, None, :] - dist[:, :, None] - dist[None, :, :]))
    if worst > 1e-9:
        raise InputContractError(
            f"distance matrix violates the triangle inequality (excess {worst:.3g})"
        )
    if dist.max() > 2.0 + 1e-12:
        raise InputContractError("metric space diameter must be at most 2 (rescale)")
    return dist


def _check_cost(cost: np.ndarray, m: int) -> np.ndarray:
    cost = np.asarray(cost, float)
    if cost.shape != (m, m):
        raise InputContractError("cost matrix shape mismatch")
    if np.any(cost < -1e-12):
        raise InputContractError("cost must be nonnegative")
    return cost


def _check_marginal(p, m: int, name: str) -> np.ndarray:
    p = np.full(m, 1.0 / m) if p is None else np.asarray(p, float)
    if p.shape != (m,) or np.any(p < 0):
        raise InputContractError(f"{name} must be a nonnegative vector of length {m}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InputContractError(f"{name} must sum to one")
    return p / p.sum()


def wasserstein1_cdf(positions, p1, p2) -> float:
    """Exact 1-D order-1 transport cost via the CDF-difference integral."""
    positions = np.asarray(positions, float)
    order = np.argsort(positions)
    pos = positions[order]
    c1 = np.cumsum(np.asarray(p1, float)[order])
    c2 = np.cumsum(np.asarray(p2, float)[order])
    return float(np.sum(np.abs(c1[:-1] - c2[:-1]) * np.diff(pos)))


@dataclass
class KantorovichProblem:
    """Validated instance data: atoms with their metric, a nonnegative
    cost, the two marginals, and the sup-norm radius of the potentials."""

    m: int
    positions: np.ndarray
    distances: np.ndarray
    cost: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    radius: float

    def __post_init__(self):
        if self.m < 2:
            raise InputContractError("need at least two atoms")
        if self.radius <= 0:
            raise InputContractError("radius must be positive")
        self.positions = np.asarray(self.positions, float)
        if self.positions.shape != (self.m,):
            raise InputContractError("positions must be a vector of length m")
        self.distances = _check_metric(self.distances, self.m)
        self.cost = _check_cost(self.cost, self.m)
        self.p1 = _check_marginal(self.p1, self.m, "p1")
        self.p2 = _check_marginal(self.p2, self.m, "p2")


def build(params: dict | None = None) -> StochasticProgram:
    p = dict(DEFAULTS)
    p.update(params or {})
    m = int(p["m"])
    positions = (
        np.linspace(0.0, 2.0, max(m, 2)) if p["positions"] is None
        else np.asarray(p["positions"], float)
    )
    distances = (
        np.asarray(p["distances"], float) if p["distances"] is not None
        else np.abs(positions[:, None] - positions[None, :])
    )
    if p["cost_csv"] is not None:
        cost = np.loadtxt(p["cost_csv"], delimiter=",")
    elif p.get("cost") is not None:
        cost = np.asarray(p["cost"], float)
    else:
        cost = distances
    problem = KantorovichProblem(
        m=m, positions=positions, distances=distances, cost=cost,
        p1=p["p1"], p2=p["p2"], radius=float(p["radius"]),
    )
    cost = problem.cost
    p1, p2 = problem.p1, problem.p2
    radius = problem.radius
    shift = 2.0 * radius

    def sample(rng):
        i = rng.choice(m, p=p1)
        j = rng.choice(m, p=p2)
        return np.array([float(i), float(j)])

    def _pair(xi):
        return int(xi[0]), int(xi[1])

    def j_value_grad(u, xi):
        i, j = _pair(xi)
        grad = np.zeros(2 * m)
        grad[i] = -1.0
        grad[m + j] += -1.0
        return shift - u[i] - u[m + j], grad

    def g_value(u, xi):
        i, j = _pair(xi)
        return np.array([u[i] + u[m + j] - cost[i, j]])

    def g_jac_t(u, xi, mu):
        i, j = _pair(xi)
        out = np.zeros(2 * m)
        out[i] = mu[0]
        out[m + j] += mu[0]
        return out

    def j_batch(u, xi_mat):
        i = xi_mat[:, 0].astype(int)
        j = xi_mat[:, 1].astype(int)
        vals = shift - u[i] - u[m + j]
        grads = np.zeros((xi_mat.shape[0], 2 * m))
        rows = np.arange(xi_mat.shape[0])
        grads[rows, i] = -1.0
        np.add.at(grads, (rows, m + j), -1.0)
        return vals, grads

    def g_batch(u, xi_mat):
        i = xi_mat[:, 0].astype(int)
        j = xi_mat[:, 1].astype(int)
        return (u[i] + u[m + j] - cost[i, j])[:, None]

    def g_jac_t_batch(u, xi_mat, mu_mat):
        i = xi_mat[:, 0].astype(int)
        j = xi_mat[:, 1].astype(int)
        mu = np.asarray(mu_mat, float)[:, 0]
        out = np.zeros((xi_mat.shape[0], 2 * m))
        rows = np.arange(xi_mat.shape[0])
        out[rows, i] = mu
        np.add.at(out, (rows, m + j), mu)
        return out

    program = StochasticProgram(
        problem_id="kantorovich",
        n=2 * m,
        k=1,
        cone=Cone.nonpos(1),
        psi=Regularizer.sup_norm_box(2 * m, radius),
        sample=sample,
        j_value_grad=j_value_grad,
        g_value=g_value,
        g_jacobian_transpose_apply=g_jac_t,
        b_apply=lambda u: np.asarray(u, float).copy(),
        # |Delta u1(x1) + Delta u2(x2)| <= sqrt(2) ||Delta u||_2
        lipschitz_G=float(np.sqrt(2.0)),
        j_batch=j_batch,
        g_batch=g_batch,
        g_jac_t_batch=g_jac_t_batch,
        extra={
            "problem": problem, "m": m, "positions": problem.positions,
            "cost": cost, "p1": p1, "p2": p2, "radius": radius, "shift": shift,
        },
    )
    program.exact_solver = lambda scenarios: lp_solve(program, scenarios)
    return program


def lp_solve(program: StochasticProgram, scenarios: ScenarioSet) -> OracleSolution:
    """Exact oracle for the sample-average dual transport problem.

    Minimizes the empirical mean of J over the box subject to the
    sampled pair constraints, as a linear program.  The constraint duals
    of each distinct pair are spread uniformly over its occurrences so
    the returned per-scenario multipliers satisfy the averaged
    stationarity condition exactly.
    """
    m = program.extra["m"]
    cost = program.extra["cost"]
    radius = program.extra["radius"]
    shift = program.extra["shift"]
    pairs = [(int(xi[0]), int(xi[1])) for xi in scenarios.xi]
    counts: dict[tuple[int, int], int] = {}
    for pr in pairs:
        counts[pr] = counts.get(pr, 0) + 1
    distinct = sorted(counts)

    N = scenarios.N
    c_lp = np.zeros(2 * m)
    for (i, j), cnt in counts.items():
        c_lp[i] -= cnt / N
        c_lp[m + j] -= cnt / N
    A = np.zeros((len(distinct), 2 * m))
    b = np.empty(len(distinct))
    for r, (i, j) in enumerate(distinct):
        A[r, i] = 1.0
        A[r, m + j] = 1.0
        b[r] = cost[i, j]
    res = linprog(
        c_lp, A_ub=A, b_ub=b, bounds=[(-radius, radius)] * (2 * m),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10,
                 "dual_feasibility_tolerance": 1e-10},
    )
    if not res.success:
        raise NumericalDomainError(f"transport LP failed: {res.message}")
    duals = -np.asarray(res.ineqlin.marginals, float)  # >= 0 for <= rows
    dual_of = {pr: duals[r] for r, pr in enumerate(distinct)}
    mu_list = [np.array([N * dual_of[pr] / counts[pr]]) for pr in pairs]
    return OracleSolution(u=np.asarray(res.x, float), value=shift + float(res.fun),
                          mu_list=mu_list)
