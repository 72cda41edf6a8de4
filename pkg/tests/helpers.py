"""Shared toy programs and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np

from saaconic.cones import Cone
from saaconic.program import Regularizer, StochasticProgram


def finite_atom_program(atoms, probs, box_radius=5.0, coeff=None):
    """2-D quadratic toy with a finite scenario space.

    J(u, xi) = 0.5 * ||u - a(xi)||^2 with per-atom anchors, constraint
    G(u, xi) = c' u - level(xi) <= 0.  Scenario encodes the atom index.
    """
    atoms = np.asarray(atoms, float)          # (m, 2) anchors
    probs = np.asarray(probs, float)
    levels = np.linspace(0.5, 1.5, atoms.shape[0])
    c = np.array([1.0, 0.5]) if coeff is None else np.asarray(coeff, float)

    def sample(rng):
        return np.array([float(rng.choice(atoms.shape[0], p=probs))])

    def j_value_grad(u, xi):
        a = atoms[int(xi[0])]
        d = u - a
        return 0.5 * float(d @ d), d

    def g_value(u, xi):
        return np.array([float(c @ u) - levels[int(xi[0])]])

    def g_jac_t(u, xi, mu):
        return c * mu[0]

    return StochasticProgram(
        problem_id="finite-toy",
        n=2,
        k=1,
        cone=Cone.nonpos(1),
        psi=Regularizer.sup_norm_box(2, box_radius),
        sample=sample,
        j_value_grad=j_value_grad,
        g_value=g_value,
        g_jacobian_transpose_apply=g_jac_t,
        b_apply=lambda u: np.asarray(u, float).copy(),
        lipschitz_G=float(np.linalg.norm(c)),
        extra={"atoms": atoms, "probs": probs, "levels": levels, "coeff": c},
    )


def grid_min_distance(cone_project, r, lo, hi, steps=401):
    """Brute-force min of 0.5*||r - s||^2 over a coordinate grid of the
    feasible region defined by componentwise bounds (independent oracle
    for 1- and 2-D penalty values)."""
    r = np.asarray(r, float)
    axes = [np.linspace(lo[i], hi[i], steps) for i in range(r.size)]
    best = np.inf
    if r.size == 1:
        for s0 in axes[0]:
            best = min(best, 0.5 * (r[0] - s0) ** 2)
    elif r.size == 2:
        s0 = axes[0][:, None]
        s1 = axes[1][None, :]
        best = float(np.min(0.5 * ((r[0] - s0) ** 2 + (r[1] - s1) ** 2)))
    else:
        raise ValueError("grid oracle supports dims 1 and 2")
    return best
