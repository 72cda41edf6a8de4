"""Closed convex cones with projections and quadratic penalties.

Supported kinds are the nonnegative/nonpositive orthants, the zero cone,
the free cone (all of R^k), and finite products of those.  Every kind has
an exact, closed-form Euclidean projection, which gives exact distances,
an exact smooth penalty ``0.5 * dist(r, K)**2``, its gradient
``r - project(r)``, and exact polar-cone residuals via the Moreau
decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputContractError

KINDS = ("nonnegative-orthant", "nonpositive-orthant", "zero", "free", "product-of-cones")


@dataclass(frozen=True)
class Cone:
    """Descriptor of a closed convex cone in R^dim.

    Instances are immutable and safe to share across threads.  Use the
    classmethod constructors (:meth:`nonneg`, :meth:`nonpos`, :meth:`zero`,
    :meth:`free`, :meth:`product`) rather than the raw constructor.
    """

    kind: str
    dim: int
    children: tuple["Cone", ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputContractError(f"unknown cone kind {self.kind!r}")
        if self.kind == "product-of-cones":
            if not self.children:
                raise InputContractError("product cone needs at least one child")
            if self.dim != sum(c.dim for c in self.children):
                raise InputContractError(
                    "product cone dim must equal the sum of child dims"
                )
        elif self.children:
            raise InputContractError("only product cones carry children")
        if self.dim < 1:
            raise InputContractError("cone dimension must be positive")

    # -- constructors ------------------------------------------------------

    @classmethod
    def nonneg(cls, dim: int) -> "Cone":
        return cls("nonnegative-orthant", dim)

    @classmethod
    def nonpos(cls, dim: int) -> "Cone":
        return cls("nonpositive-orthant", dim)

    @classmethod
    def zero(cls, dim: int) -> "Cone":
        return cls("zero", dim)

    @classmethod
    def free(cls, dim: int) -> "Cone":
        return cls("free", dim)

    @classmethod
    def product(cls, children) -> "Cone":
        children = tuple(children)
        return cls("product-of-cones", sum(c.dim for c in children), children)

    # -- core operations ---------------------------------------------------

    def _check(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.shape != (self.dim,):
            raise InputContractError(
                f"expected vector of length {self.dim}, got shape {r.shape}"
            )
        return r

    def project(self, r) -> np.ndarray:
        """Euclidean metric projection of ``r`` onto the cone."""
        r = self._check(r)
        if self.kind == "nonnegative-orthant":
            return np.maximum(r, 0.0)
        if self.kind == "nonpositive-orthant":
            return np.minimum(r, 0.0)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "free":
            return r.copy()
        out = np.empty_like(r)
        i = 0
        for child in self.children:
            out[i : i + child.dim] = child.project(r[i : i + child.dim])
            i += child.dim
        return out

    def distance(self, r) -> float:
        """Euclidean distance from ``r`` to the cone."""
        r = self._check(r)
        return float(np.linalg.norm(r - self.project(r)))

    def contains(self, r, tol: float = 1e-12) -> bool:
        return self.distance(r) <= tol

    def penalty(self, r) -> float:
        """Smooth penalty 0.5 * dist(r, K)^2; zero exactly on the cone."""
        r = self._check(r)
        d = r - self.project(r)
        return 0.5 * float(d @ d)

    def penalty_grad(self, r) -> np.ndarray:
        """Gradient of :meth:`penalty`, which is ``r - project(r)``.

        The gradient always lies in the polar cone, so multipliers
        recovered as positive multiples of it are dual feasible.
        """
        r = self._check(r)
        return r - self.project(r)

    def polar(self) -> "Cone":
        """The polar cone {v : <v, x> <= 0 for all x in K}."""
        if self.kind == "nonnegative-orthant":
            return Cone.nonpos(self.dim)
        if self.kind == "nonpositive-orthant":
            return Cone.nonneg(self.dim)
        if self.kind == "zero":
            return Cone.free(self.dim)
        if self.kind == "free":
            return Cone.zero(self.dim)
        return Cone.product(c.polar() for c in self.children)

    def polar_residual(self, mu) -> float:
        """Distance of a candidate multiplier from the polar cone."""
        mu = self._check(mu)
        return self.polar().distance(mu)

    # -- config serialization ----------------------------------------------

    def to_spec(self) -> str:
        """Compact text form, e.g. ``nonneg:2`` or ``product(nonneg:1,nonpos:1)``."""
        short = {
            "nonnegative-orthant": "nonneg",
            "nonpositive-orthant": "nonpos",
            "zero": "zero",
            "free": "free",
        }
        if self.kind == "product-of-cones":
            return "product(" + ",".join(c.to_spec() for c in self.children) + ")"
        return f"{short[self.kind]}:{self.dim}"


def cone_from_spec(text: str) -> Cone:
    """Parse the compact text form produced by :meth:`Cone.to_spec`."""
    text = text.strip()
    if text.startswith("product(") and text.endswith(")"):
        inner = text[len("product(") : -1]
        parts, depth, start = [], 0, 0
        for i, ch in enumerate(inner):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "," and depth == 0:
                parts.append(inner[start:i])
                start = i + 1
        parts.append(inner[start:])
        return Cone.product(cone_from_spec(p) for p in parts if p.strip())
    try:
        name, dim_text = text.split(":")
        dim = int(dim_text)
    except ValueError as exc:
        raise InputContractError(f"cannot parse cone spec {text!r}") from exc
    builders = {
        "nonneg": Cone.nonneg,
        "nonpos": Cone.nonpos,
        "zero": Cone.zero,
        "free": Cone.free,
    }
    if name not in builders:
        raise InputContractError(f"unknown cone kind {name!r} in spec {text!r}")
    return builders[name](dim)
