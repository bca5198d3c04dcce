"""Existence and uniqueness certificates for CP decompositions.

Each check compares a left-hand side with a right-hand side and reports the
verdict together with a signed margin (positive means satisfied with room to
spare). No slack is added to any inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import coherence_metrics as coh
from .tensor_core import CpModel, DomainError

CHECK_NAMES = (
    "kruskal",
    "coherence_kruskal",
    "existence_bound",
    "corollary_bound",
    "spark_recovery",
    "coherence_recovery",
)

_OPS = {
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
}


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    relation: str
    holds: bool
    margin: float

    @classmethod
    def evaluate(cls, name: str, lhs: float, rhs: float, relation: str) -> "Check":
        if name not in CHECK_NAMES:
            raise ValueError(f"unknown check {name!r}")
        holds = bool(_OPS[relation](lhs, rhs))
        margin = rhs - lhs if relation == "<" else lhs - rhs
        return cls(name, float(lhs), float(rhs), relation, holds, float(margin))


def _inv(mu: float) -> float:
    return math.inf if mu == 0.0 else 1.0 / mu


def check_kruskal(krank_u: int, krank_v: int, krank_w: int, r: int) -> Check:
    """``krank(U) + krank(V) + krank(W) >= 2r + 2``."""
    if min(krank_u, krank_v, krank_w, r) < 1:
        raise DomainError("k-ranks and r must be >= 1")
    return Check.evaluate("kruskal", krank_u + krank_v + krank_w, 2 * r + 2, ">=")


def check_coherence_kruskal(mu_u: float, mu_v: float, mu_w: float, r: int) -> Check:
    """``(1/mu_u + 1/mu_v + 1/mu_w) / 2 > r``; zero coherence counts as infinite."""
    for mu in (mu_u, mu_v, mu_w):
        if not 0.0 <= mu <= 1.0:
            raise DomainError(f"coherence must lie in [0, 1], got {mu}")
    lhs = 0.5 * (_inv(mu_u) + _inv(mu_v) + _inv(mu_w))
    return Check.evaluate("coherence_kruskal", lhs, r, ">")


def check_existence_bound(mu_u: float, mu_v: float, mu_w: float, r: int) -> Check:
    """``mu_u * mu_v * mu_w < 1/r``."""
    for mu in (mu_u, mu_v, mu_w):
        if not 0.0 <= mu <= 1.0:
            raise DomainError(f"coherence must lie in [0, 1], got {mu}")
    return Check.evaluate("existence_bound", mu_u * mu_v * mu_w, 1.0 / r, "<")


def check_corollary(mu_u: float, mu_v: float, mu_w: float, r: int) -> Check:
    """``1 / cbrt(mu_u * mu_v * mu_w) > 2r/3``."""
    if min(mu_u, mu_v, mu_w) <= 0.0:
        raise DomainError("coherence caps must be positive")
    lhs = 1.0 / np.cbrt(mu_u * mu_v * mu_w)
    return Check.evaluate("corollary_bound", lhs, 2.0 * r / 3.0, ">")


def _corollary_or_infinite(mu_u, mu_v, mu_w, r) -> Check:
    if min(mu_u, mu_v, mu_w) == 0.0:
        return Check.evaluate("corollary_bound", math.inf, 2.0 * r / 3.0, ">")
    return check_corollary(mu_u, mu_v, mu_w, r)


def check_sparse_recovery_bounds(k: int, *, spark=None, mu=None) -> Check:
    """Sparsest-solution uniqueness bound for a ``k``-sparse coefficient vector.

    With ``spark`` evaluates ``spark/2 >= k``; with ``mu`` evaluates the
    coherence relaxation ``(1 + 1/mu)/2 >= k``. Exactly one must be given.
    """
    if k < 0:
        raise DomainError("sparsity must be >= 0")
    if (spark is None) == (mu is None):
        raise ValueError("pass exactly one of spark= or mu=")
    if spark is not None:
        return Check.evaluate("spark_recovery", 0.5 * spark, k, ">=")
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"coherence must lie in [0, 1], got {mu}")
    return Check.evaluate("coherence_recovery", 0.5 * (1.0 + _inv(mu)), k, ">=")


@dataclass(frozen=True)
class Certificate:
    r: int
    mu_u: float
    mu_v: float
    mu_w: float
    krank_u: int | None
    krank_v: int | None
    krank_w: int | None
    krank_exact: bool
    weights_nonzero: bool
    checks: tuple[Check, ...] = field(default_factory=tuple)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def rank_certified(self) -> bool:
        """True when the coherence condition certifies ``rank(A) == r``."""
        return self.weights_nonzero and self["coherence_kruskal"].holds


def certify_model(
    M: CpModel, tol: float = coh.DEFAULT_TOL, weight_tol: float = 1e-12
) -> Certificate:
    """Evaluate every applicable existence/uniqueness check on ``M``.

    k-ranks are computed exactly up to ``MAX_SEARCH_COLUMNS`` terms; above
    that the integer coherence bound ``ceil(1/mu)`` stands in and
    ``krank_exact`` is False.
    """
    r = M.rank
    mus = [coh.coherence(F) for F in M.factors]
    exact = r <= coh.MAX_SEARCH_COLUMNS
    if exact:
        kranks = [coh.krank(F, tol) for F in M.factors]
    else:
        kranks = [coh.krank_lower_bound(mu, r) for mu in mus]
    checks = (
        check_kruskal(*kranks, r),
        check_coherence_kruskal(*mus, r),
        check_existence_bound(*mus, r),
        _corollary_or_infinite(*mus, r),
    )
    return Certificate(
        r=r,
        mu_u=mus[0],
        mu_v=mus[1],
        mu_w=mus[2],
        krank_u=kranks[0],
        krank_v=kranks[1],
        krank_w=kranks[2],
        krank_exact=exact,
        weights_nonzero=bool(np.all(np.abs(M.weights) > weight_tol)),
        checks=checks,
    )
