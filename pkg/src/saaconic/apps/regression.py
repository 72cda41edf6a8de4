"""Least-squares regression over a smoothness ball with a sign constraint.

The decision is a piecewise-linear function on a uniform grid over [0, 1],
constrained to a ball of the discrete first-order Sobolev norm
``(int u^2 + int (u')^2)^(1/2)`` and required to be nonnegative at every
sampled location.  A scenario is a pair (x, y): x uniform on [0, 1] and a
response y supported in [-1, 1] (clipped Gaussian noise around a target
curve; the clipping keeps the response bounded, which is what the
admissible-response assumption needs, and is otherwise a modelling
choice).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..cones import Cone
from ..errors import InputContractError
from ..program import Regularizer, StochasticProgram

DEFAULTS = {
    "n": 64,
    "radius": 2.0,
    "noise": 0.1,
    "target_amp": 0.3,
    "target_offset": 0.02,
}


@dataclass
class RegressionProblem:
    """Validated instance data: grid size, smoothness radius, and the
    response model (clipped Gaussian noise around a sine target)."""

    n: int
    radius: float
    noise: float
    target_amp: float
    target_offset: float
    gram: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.radius <= 0:
            raise InputContractError("radius must be positive")
        if self.n < 3:
            raise InputContractError("grid size n must be at least 3")
        if self.noise < 0:
            raise InputContractError("noise level must be nonnegative")
        self.gram = h1_gram(self.n)

    def target(self, x):
        return target_curve(x, self.target_amp, self.target_offset)


def h1_gram(n: int) -> np.ndarray:
    """Discrete H^1 Gram matrix (P1 mass + stiffness) on n grid nodes."""
    if n < 3:
        raise InputContractError("need at least 3 grid nodes")
    h = 1.0 / (n - 1)
    mass = np.zeros((n, n))
    stiff = np.zeros((n, n))
    for e in range(n - 1):
        mass[e : e + 2, e : e + 2] += (h / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
        stiff[e : e + 2, e : e + 2] += (1.0 / h) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return mass + stiff


def interp_weights(x: np.ndarray, n: int):
    """Hat-function weights of point evaluation: node indices and thetas."""
    h = 1.0 / (n - 1)
    j = np.clip((np.asarray(x, float) / h).astype(int), 0, n - 2)
    theta = np.asarray(x, float) / h - j
    return j, theta


def target_curve(x, amp: float, offset: float):
    return amp * np.sin(2.0 * np.pi * np.asarray(x, float)) + offset


def build(params: dict | None = None) -> StochasticProgram:
    p = dict(DEFAULTS)
    p.update(params or {})
    problem = RegressionProblem(
        n=int(p["n"]), radius=float(p["radius"]), noise=float(p["noise"]),
        target_amp=float(p["target_amp"]), target_offset=float(p["target_offset"]),
    )
    n = problem.n
    noise = problem.noise
    gram = problem.gram

    def sample(rng):
        x = rng.uniform(0.0, 1.0)
        y = np.clip(problem.target(x) + noise * rng.standard_normal(), -1.0, 1.0)
        return np.array([x, y])

    def _eval(u, x):
        j, theta = interp_weights(np.atleast_1d(x), n)
        return u[j] * (1.0 - theta) + u[j + 1] * theta, j, theta

    def j_value_grad(u, xi):
        vals, j, theta = _eval(u, xi[0])
        r = float(vals[0] - xi[1])
        grad = np.zeros(n)
        grad[j[0]] = r * (1.0 - theta[0])
        grad[j[0] + 1] += r * theta[0]
        return 0.5 * r * r, grad

    def g_value(u, xi):
        vals, _, _ = _eval(u, xi[0])
        return np.array([vals[0]])

    def g_jac_t(u, xi, mu):
        j, theta = interp_weights(np.atleast_1d(xi[0]), n)
        out = np.zeros(n)
        out[j[0]] = mu[0] * (1.0 - theta[0])
        out[j[0] + 1] += mu[0] * theta[0]
        return out

    def j_batch(u, xi_mat):
        x, y = xi_mat[:, 0], xi_mat[:, 1]
        j, theta = interp_weights(x, n)
        r = u[j] * (1.0 - theta) + u[j + 1] * theta - y
        grads = np.zeros((xi_mat.shape[0], n))
        rows = np.arange(xi_mat.shape[0])
        grads[rows, j] = r * (1.0 - theta)
        grads[rows, j + 1] += r * theta
        return 0.5 * r * r, grads

    def g_batch(u, xi_mat):
        j, theta = interp_weights(xi_mat[:, 0], n)
        return (u[j] * (1.0 - theta) + u[j + 1] * theta)[:, None]

    def g_jac_t_batch(u, xi_mat, mu_mat):
        j, theta = interp_weights(xi_mat[:, 0], n)
        mu = np.asarray(mu_mat, float)[:, 0]
        rows = np.arange(xi_mat.shape[0])
        out = np.zeros((xi_mat.shape[0], n))
        out[rows, j] = mu * (1.0 - theta)
        out[rows, j + 1] += mu * theta
        return out

    # |u(x) - v(x)| <= max_i |u_i - v_i| <= ||u - v||_2 and B is the nodal
    # identity, so 1.0 bounds the constraint map in the observation metric.
    return StochasticProgram(
        problem_id="regression",
        n=n,
        k=1,
        cone=Cone.nonneg(1),
        psi=Regularizer.sobolev_ball(gram, problem.radius),
        sample=sample,
        j_value_grad=j_value_grad,
        g_value=g_value,
        g_jacobian_transpose_apply=g_jac_t,
        b_apply=lambda u: np.asarray(u, float).copy(),
        lipschitz_G=1.0,
        j_batch=j_batch,
        g_batch=g_batch,
        g_jac_t_batch=g_jac_t_batch,
        extra={"problem": problem, "gram": gram, "noise": noise,
               "target_amp": problem.target_amp,
               "target_offset": problem.target_offset},
    )
