"""Stochastic program abstraction and sample-average assembly.

A :class:`StochasticProgram` bundles the problem data: a per-scenario
objective integrand with gradient, a constraint map into a cone together
with Jacobian-transpose actions, a linear observation operator, a
prox-capable regularizer describing the admissible set, and a scenario
sampler.  Module functions assemble the empirical (sample-average)
objective and constraint residuals and run fresh out-of-sample validation
estimates.

Scenario generation is counter-based: scenario ``i`` of seed ``s`` is
drawn from its own generator derived from ``(s, i)``, so it does not
depend on the sample size or on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri
from scipy.stats import qmc

from .cones import Cone
from .errors import InputContractError, NumericalDomainError

REGULARIZER_KINDS = ("box", "euclidean-ball", "sobolev-ball", "sup-norm-box")


def derive_seed(base_seed: int, *parts: int) -> int:
    """Stable 64-bit sub-seed for a labelled stream under ``base_seed``."""
    ss = np.random.SeedSequence(
        entropy=int(base_seed) % 2**64, spawn_key=tuple(int(p) % 2**32 for p in parts)
    )
    return int(ss.generate_state(1, np.uint64)[0])


def scenario_rng(base_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(base_seed) % 2**64, spawn_key=(int(index),))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# Regularizer
# ---------------------------------------------------------------------------


@dataclass
class Regularizer:
    """Convex regularizer: indicator of a bounded convex set plus an
    optional isotropic quadratic ``0.5 * quad_weight * ||u||^2``.

    All supported domains (boxes, Euclidean balls, quadratic-form balls,
    sup-norm boxes) have exact projections, so the prox

        prox(v, t) = project(v / (1 + t * quad_weight))

    is exact as well.  Exact proxes are what make downstream stationarity
    residuals trustworthy.
    """

    kind: str
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    radius: float | None = None
    gram: np.ndarray | None = None
    quad_weight: float = 0.0
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise InputContractError(f"unknown regularizer kind {self.kind!r}")
        if self.quad_weight < 0:
            raise InputContractError("quad_weight must be nonnegative")
        if self.kind == "box":
            self.lo = np.broadcast_to(np.asarray(self.lo, float), (self.dim,)).copy()
            self.hi = np.broadcast_to(np.asarray(self.hi, float), (self.dim,)).copy()
            if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
                raise InputContractError("box bounds must be finite (bounded domain)")
            if np.any(self.lo > self.hi):
                raise InputContractError("box lower bounds exceed upper bounds")
        elif self.kind in ("euclidean-ball", "sup-norm-box"):
            if self.radius is None or not math.isfinite(self.radius) or self.radius <= 0:
                raise InputContractError("radius must be a finite positive number")
        elif self.kind == "sobolev-ball":
            if self.radius is None or self.radius <= 0:
                raise InputContractError("radius must be a finite positive number")
            gram = np.asarray(self.gram, float)
            if gram.shape != (self.dim, self.dim):
                raise InputContractError("gram matrix shape mismatch")
            if not np.allclose(gram, gram.T, atol=1e-12):
                raise InputContractError("gram matrix must be symmetric")
            w, q = np.linalg.eigh(gram)
            if w.min() <= 0:
                raise InputContractError("gram matrix must be positive definite")
            self.gram = gram
            self._eig = (w, q)

    # -- constructors -------------------------------------------------------

    @classmethod
    def box(cls, lo, hi, quad_weight: float = 0.0) -> "Regularizer":
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        dim = max(lo.size, hi.size)
        return cls("box", dim, lo=lo, hi=hi, quad_weight=quad_weight)

    @classmethod
    def euclidean_ball(cls, dim: int, radius: float, quad_weight: float = 0.0) -> "Regularizer":
        return cls("euclidean-ball", dim, radius=radius, quad_weight=quad_weight)

    @classmethod
    def sup_norm_box(cls, dim: int, radius: float, quad_weight: float = 0.0) -> "Regularizer":
        return cls("sup-norm-box", dim, radius=radius, quad_weight=quad_weight)

    @classmethod
    def sobolev_ball(cls, gram, radius: float, quad_weight: float = 0.0) -> "Regularizer":
        gram = np.asarray(gram, float)
        return cls("sobolev-ball", gram.shape[0], gram=gram, radius=radius,
                   quad_weight=quad_weight)

    # -- geometry ------------------------------------------------------------

    def project(self, v) -> np.ndarray:
        """Exact Euclidean projection onto the domain."""
        v = np.asarray(v, float)
        if v.shape != (self.dim,):
            raise InputContractError(f"expected vector of length {self.dim}")
        if self.kind == "box":
            return np.clip(v, self.lo, self.hi)
        if self.kind == "sup-norm-box":
            return np.clip(v, -self.radius, self.radius)
        if self.kind == "euclidean-ball":
            nrm = np.linalg.norm(v)
            if nrm <= self.radius:
                return v.copy()
            return v * (self.radius / nrm)
        return self._project_ellipsoid(v)

    def _project_ellipsoid(self, v: np.ndarray) -> np.ndarray:
        # Euclidean projection onto {u : u' E u <= radius^2}.  The KKT
        # system u = (I + lam*E)^{-1} v reduces, in the eigenbasis of E,
        # to a scalar monotone equation for the multiplier lam.
        w, q = self._eig
        rho2 = self.radius**2
        z = q.T @ v
        if float(z**2 @ w) <= rho2 * (1 + 1e-14):
            return v.copy()

        def excess(lam: float) -> float:
            s = z / (1.0 + lam * w)
            return float(s**2 @ w) - rho2

        hi = 1.0
        while excess(hi) > 0:
            hi *= 4.0
        lam = brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
        # polish with Newton to machine precision on the active norm
        for _ in range(3):
            s = z / (1.0 + lam * w)
            g = float(s**2 @ w) - rho2
            dg = float(-2.0 * (s**2 * w**2) @ (1.0 / (1.0 + lam * w)))
            if dg == 0.0:
                break
            lam = max(0.0, lam - g / dg)
        return q @ (z / (1.0 + lam * w))

    def domain_norm(self, u) -> float:
        """Norm whose ball defines the domain (for balls); sup-norm/box gap otherwise."""
        u = np.asarray(u, float)
        if self.kind == "euclidean-ball":
            return float(np.linalg.norm(u))
        if self.kind == "sobolev-ball":
            return float(np.sqrt(u @ self.gram @ u))
        if self.kind == "sup-norm-box":
            return float(np.max(np.abs(u))) if u.size else 0.0
        raise InputContractError("domain_norm undefined for box regularizers")

    def contains(self, u, tol: float = 1e-10) -> bool:
        u = np.asarray(u, float)
        return bool(np.linalg.norm(u - self.project(u)) <= tol)

    def prox(self, v, t: float) -> np.ndarray:
        """Exact prox of ``t * psi`` at ``v``."""
        if t < 0:
            raise InputContractError("prox step must be nonnegative")
        return self.project(np.asarray(v, float) / (1.0 + t * self.quad_weight))

    def value(self, u) -> float:
        """psi(u): the quadratic part on the domain, +inf outside (1e-8 slack)."""
        u = np.asarray(u, float)
        if not self.contains(u, tol=1e-8):
            return float("inf")
        return 0.5 * self.quad_weight * float(u @ u)

    def without_quad(self) -> "Regularizer":
        return replace(self, quad_weight=0.0, _eig=self._eig)

    # -- quasi-random domain sampling ---------------------------------------

    def sample_domain(self, m: int, seed: int = 0) -> np.ndarray:
        """Deterministic quasi-random sample of ``m`` points of the domain.

        Boxes use an affine map of a Sobol sequence; balls map Sobol
        points through the inverse-normal radial construction so the
        sample fills the volume instead of piling on the boundary.
        The ``seed`` selects how far the sequence is fast-forwarded.
        """
        if m < 1:
            raise InputContractError("need at least one sample point")
        if self.kind in ("box", "sup-norm-box"):
            eng = qmc.Sobol(d=self.dim, scramble=False)
            eng.fast_forward(1 + (seed % 1024))
            pts01 = eng.random(m)
            if self.kind == "box":
                return self.lo + pts01 * (self.hi - self.lo)
            return -self.radius + pts01 * (2 * self.radius)
        eng = qmc.Sobol(d=self.dim + 1, scramble=False)
        eng.fast_forward(1 + (seed % 1024))
        pts01 = eng.random(m)
        eps = 2.0**-32
        gauss = ndtri(eps + pts01[:, : self.dim] * (1 - 2 * eps))
        dirs = gauss / np.maximum(np.linalg.norm(gauss, axis=1, keepdims=True), 1e-300)
        radii = self.radius * (eps + pts01[:, self.dim] * (1 - 2 * eps)) ** (1.0 / self.dim)
        ball = dirs * radii[:, None]
        if self.kind == "euclidean-ball":
            return ball
        w, q = self._eig
        return ball @ (q * (1.0 / np.sqrt(w))).T


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSet:
    """An i.i.d. sample of scenarios with seed provenance.

    ``xi`` is an (N, d) array, one scenario per row, read-only after
    construction.  Identical ``(base_seed, N)`` reproduce the array
    bit-for-bit, and row ``i`` depends only on ``(base_seed, i)``.
    """

    xi: np.ndarray
    base_seed: int

    def __post_init__(self):
        xi = np.asarray(self.xi, float)
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def N(self) -> int:
        return self.xi.shape[0]

    def __len__(self) -> int:
        return self.N

    def __getitem__(self, i) -> np.ndarray:
        return self.xi[i]

    def to_csv(self, path) -> None:
        """Dump as CSV: index column followed by the scenario components."""
        from .report import format_float

        with open(path, "w", encoding="utf-8") as fh:
            d = self.xi.shape[1]
            fh.write("index," + ",".join(f"xi{j}" for j in range(d)) + "\n")
            for i, row in enumerate(self.xi):
                fh.write(str(i) + "," + ",".join(format_float(v) for v in row) + "\n")


def draw_scenarios(program: "StochasticProgram", N: int, base_seed: int) -> ScenarioSet:
    """Draw an N-scenario i.i.d. sample using per-index sub-seeds."""
    if N < 1:
        raise InputContractError("sample size N must be at least 1")
    rows = [np.asarray(program.sample(scenario_rng(base_seed, i)), float) for i in range(N)]
    return ScenarioSet(xi=np.stack(rows), base_seed=int(base_seed))


# ---------------------------------------------------------------------------
# Stochastic program
# ---------------------------------------------------------------------------


@dataclass
class OracleSolution:
    """Output of an exact per-sample solver (e.g. an LP oracle)."""

    u: np.ndarray
    value: float
    mu_list: list[np.ndarray] | None = None


@dataclass
class StochasticProgram:
    """Problem data for a conically constrained stochastic program.

    Required callables (all pure in their arguments):

    - ``sample(rng) -> xi``: one scenario draw from the given generator.
    - ``j_value_grad(u, xi) -> (float, grad)``: objective integrand; must
      be nonnegative.
    - ``g_value(u, xi) -> r``: constraint image in R^k; feasibility means
      ``r`` lies in ``cone``.
    - ``g_jacobian_transpose_apply(u, xi, mu) -> vec``: action of the
      constraint Jacobian transpose, linear in ``mu``.
    - ``b_apply(u) -> w``: the linear observation operator, exposed for
      diagnostics and covering-number estimates.

    Optional vectorized hooks (``j_batch``, ``g_batch``, ``g_jac_t_batch``)
    accept a full scenario matrix and let hot loops avoid per-scenario
    Python dispatch; the module functions fall back to loops when absent.
    ``exact_solver`` provides a per-sample exact oracle where one exists.
    """

    problem_id: str
    n: int
    k: int
    cone: Cone
    psi: Regularizer
    sample: Callable[[np.random.Generator], np.ndarray]
    j_value_grad: Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]
    g_value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g_jacobian_transpose_apply: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    b_apply: Callable[[np.ndarray], np.ndarray]
    lipschitz_G: Optional[float] = None
    exact_solver: Optional[Callable[[ScenarioSet], OracleSolution]] = None
    j_batch: Optional[Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]] = None
    g_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    g_jac_t_batch: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    extra: dict = field(default_factory=dict)

    def check_u(self, u) -> np.ndarray:
        u = np.asarray(u, float)
        if u.shape != (self.n,):
            raise InputContractError(f"decision vector must have length {self.n}")
        if not np.all(np.isfinite(u)):
            raise InputContractError("decision vector must be finite")
        return u


def _j_values_grads(program: StochasticProgram, xi: np.ndarray, u: np.ndarray):
    """Per-scenario objective values and gradients, (N,) and (N, n)."""
    if program.j_batch is not None:
        vals, grads = program.j_batch(u, xi)
        vals = np.asarray(vals, float)
        grads = np.asarray(grads, float)
    else:
        vals = np.empty(xi.shape[0])
        grads = np.empty((xi.shape[0], program.n))
        for i in range(xi.shape[0]):
            vals[i], grads[i] = program.j_value_grad(u, xi[i])
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise NumericalDomainError(
            f"objective integrand is non-finite at scenario index {int(bad[0])}"
        )
    if not np.all(np.isfinite(grads)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(grads), axis=1))[0])
        raise NumericalDomainError(
            f"objective gradient is non-finite at scenario index {bad}"
        )
    return vals, grads


def _g_values(program: StochasticProgram, xi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Constraint images stacked as an (N, k) matrix."""
    if program.g_batch is not None:
        G = np.asarray(program.g_batch(u, xi), float)
    else:
        G = np.empty((xi.shape[0], program.k))
        for i in range(xi.shape[0]):
            G[i] = program.g_value(u, xi[i])
    if not np.all(np.isfinite(G)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(G), axis=1))[0])
        raise NumericalDomainError(f"constraint map is non-finite at scenario index {bad}")
    return G


def _g_jac_t_rows(program: StochasticProgram, xi: np.ndarray, u: np.ndarray,
                  mu: np.ndarray) -> np.ndarray:
    """Rows D_u G(u, xi_i)^* mu_i, an (N, n) matrix."""
    if program.g_jac_t_batch is not None:
        return np.asarray(program.g_jac_t_batch(u, xi, mu), float)
    rows = np.empty((xi.shape[0], program.n))
    for i in range(xi.shape[0]):
        rows[i] = program.g_jacobian_transpose_apply(u, xi[i], mu[i])
    return rows


def saa_objective(program: StochasticProgram, scenarios: ScenarioSet, u):
    """Empirical mean objective and gradient over the scenario set.

    Excludes the regularizer; raises :class:`NumericalDomainError` naming
    the offending scenario index if an integrand value is non-finite.
    """
    u = program.check_u(u)
    vals, grads = _j_values_grads(program, scenarios.xi, u)
    return float(vals.mean()), grads.mean(axis=0)


def saa_constraint_residual(program: StochasticProgram, scenarios: ScenarioSet, u):
    """(max over scenarios of dist(G, K), mean quadratic penalty)."""
    u = program.check_u(u)
    G = _g_values(program, scenarios.xi, u)
    dists = np.empty(scenarios.N)
    pens = np.empty(scenarios.N)
    for i in range(scenarios.N):
        proj = program.cone.project(G[i])
        diff = G[i] - proj
        dists[i] = np.linalg.norm(diff)
        pens[i] = 0.5 * float(diff @ diff)
    return float(dists.max()), float(pens.mean())


@dataclass(frozen=True)
class ValidationEstimate:
    """Fresh out-of-sample Monte Carlo summary at a fixed decision."""

    mean_j: float
    stderr_j: float
    mean_beta: float
    prob_feasible_rho: float
    rho: float
    M: int


def validation_estimate(program: StochasticProgram, u, M: int, seed: int,
                        rho: float = 0.0) -> ValidationEstimate:
    """Out-of-sample estimates of the objective, the mean penalty, and
    the probability that the constraint image lies within ``rho`` of the
    cone.  ``stderr_j`` is the sample standard deviation over sqrt(M).
    """
    if M < 2:
        raise InputContractError("validation needs M >= 2 samples")
    if rho < 0:
        raise InputContractError("rho must be nonnegative")
    u = program.check_u(u)
    scen = draw_scenarios(program, M, seed)
    vals, _ = _j_values_grads(program, scen.xi, u)
    G = _g_values(program, scen.xi, u)
    dists = np.empty(M)
    pens = np.empty(M)
    for i in range(M):
        proj = program.cone.project(G[i])
        diff = G[i] - proj
        dists[i] = np.linalg.norm(diff)
        pens[i] = 0.5 * float(diff @ diff)
    spread = 0.0 if np.ptp(vals) == 0.0 else float(vals.std(ddof=1))
    return ValidationEstimate(
        mean_j=float(vals.mean()),
        stderr_j=spread / math.sqrt(M),
        mean_beta=float(pens.mean()),
        prob_feasible_rho=float(np.mean(dists <= rho + 1e-12)),
        rho=float(rho),
        M=int(M),
    )


def estimate_lipschitz(program: StochasticProgram, n_pairs: int = 256,
                       seed: int = 0) -> float:
    """Empirical Lipschitz bound of the constraint map in the observation
    metric: the largest sampled difference quotient

        ||G(u) - G(v)|| / ||B u - B v||

    over random domain pairs and scenarios, inflated by 1.5x.  This is a
    heuristic stand-in when no analytic constant is supplied.
    """
    if n_pairs < 1:
        raise InputContractError("need at least one probe pair")
    pts = program.psi.sample_domain(2 * n_pairs, seed=derive_seed(seed, 71))
    best = 0.0
    for t in range(n_pairs):
        u, v = pts[2 * t], pts[2 * t + 1]
        xi = program.sample(scenario_rng(derive_seed(seed, 72), t))
        dw = np.linalg.norm(program.b_apply(u) - program.b_apply(v))
        if dw < 1e-12:
            continue
        dg = np.linalg.norm(
            np.asarray(program.g_value(u, xi)) - np.asarray(program.g_value(v, xi))
        )
        best = max(best, dg / dw)
    if best == 0.0:
        raise NumericalDomainError("all probe pairs were degenerate")
    return 1.5 * best
