"""One-dimensional benchmark with closed-form penalty path.

    minimize 0.5 * (u - target)^2   subject to  u <= bound,

with a single deterministic scenario.  For target > bound the penalized
stationarity condition (u - target) + gamma * (u - bound)_+ = 0 gives

    u(gamma) = (target + gamma * bound) / (1 + gamma),

so the whole continuation path, the constraint violation rate
(bound-violation ~ (target - bound)/gamma), and the optimal value are
known exactly.  This is the calibration instance for path-tracking and
error-measure tests.
"""

from __future__ import annotations

import numpy as np

from ..cones import Cone
from ..errors import InputContractError
from ..program import OracleSolution, Regularizer, StochasticProgram

DEFAULTS = {
    "target": 2.0,
    "bound": 1.0,
    "box_radius": 10.0,
    "jitter": 0.0,   # half-width of the uniform shift of the target
}


def path_point(target: float, bound: float, gamma: float) -> float:
    """Closed-form minimizer of the penalized scalar problem."""
    if target <= bound:
        return target
    return (target + gamma * bound) / (1.0 + gamma)


def build(params: dict | None = None) -> StochasticProgram:
    p = dict(DEFAULTS)
    p.update(params or {})
    target = float(p["target"])
    bound = float(p["bound"])
    box_radius = float(p["box_radius"])
    jitter = float(p["jitter"])
    if box_radius <= 0 or abs(target) > box_radius:
        raise InputContractError("box_radius must be positive and contain the target")
    if jitter < 0:
        raise InputContractError("jitter must be nonnegative")

    cone = Cone.nonpos(1)

    def sample(rng):
        if jitter == 0.0:
            return np.zeros(1)
        return np.array([rng.uniform(-jitter, jitter)])

    def j_value_grad(u, xi):
        d = u[0] - target - xi[0]
        return 0.5 * d * d, np.array([d])

    def g_value(u, xi):
        return np.array([u[0] - bound])

    def g_jac_t(u, xi, mu):
        return np.array([mu[0]])

    def j_batch(u, xi_mat):
        d = u[0] - target - xi_mat[:, 0]
        return 0.5 * d * d, d[:, None].copy()

    def g_batch(u, xi_mat):
        return np.full((xi_mat.shape[0], 1), u[0] - bound)

    def g_jac_t_batch(u, xi_mat, mu_mat):
        return np.asarray(mu_mat, float).reshape(-1, 1).copy()

    def exact_solver(scenarios):
        # empirical target mean, clamped at the level constraint
        mean_t = target + float(scenarios.xi[:, 0].mean())
        u_star = min(mean_t, bound)
        value = float(np.mean(0.5 * (u_star - target - scenarios.xi[:, 0]) ** 2))
        mu = max(0.0, mean_t - bound)
        return OracleSolution(
            u=np.array([u_star]),
            value=value,
            mu_list=[np.array([mu])] * scenarios.N,
        )

    return StochasticProgram(
        problem_id="scalar",
        n=1,
        k=1,
        cone=cone,
        psi=Regularizer.sup_norm_box(1, box_radius),
        sample=sample,
        j_value_grad=j_value_grad,
        g_value=g_value,
        g_jacobian_transpose_apply=g_jac_t,
        b_apply=lambda u: np.asarray(u, float).copy(),
        lipschitz_G=1.0,
        exact_solver=exact_solver,
        j_batch=j_batch,
        g_batch=g_batch,
        g_jac_t_batch=g_jac_t_batch,
        extra={"target": target, "bound": bound, "jitter": jitter},
    )


def oracle_value(program: StochasticProgram) -> float:
    """Exact optimal value of the constrained scalar problem
    (uniform target jitter contributes its variance, jitter^2 / 3)."""
    target = program.extra["target"]
    bound = program.extra["bound"]
    jitter = program.extra["jitter"]
    u_star = min(target, bound)
    return 0.5 * (u_star - target) ** 2 + 0.5 * jitter**2 / 3.0
