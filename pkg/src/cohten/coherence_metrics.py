"""Coherence, spark, Kruskal rank and girth of finite collections of unit vectors.

Collections are passed as ``m x r`` complex matrices whose columns are the
vectors. Spark and k-rank are computed by exhaustive subset search, ordered by
subset size with an early exit on the first dependent subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .tensor_core import DomainError

#: Sentinel returned for the spark (girth) of an independent collection.
INFINITE = math.inf

#: Largest collection accepted by the exhaustive search.
MAX_SEARCH_COLUMNS = 24

DEFAULT_TOL = 1e-9

#: coherences this many ulps below 1 are reported as exactly 1
COLLINEAR_ULPS = 8


class CapacityError(ValueError):
    """Raised when an exhaustive search would be too large."""


def column_set(V, unit_tol: float = 1e-12) -> np.ndarray:
    """Validate ``V`` as a collection of unit column vectors and return it."""
    V = np.asarray(V, dtype=np.complex128)
    if V.ndim == 1:
        V = V[:, None]
    if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] < 1:
        raise DomainError(f"expected a non-empty m x r matrix, got shape {V.shape}")
    norms = np.linalg.norm(V, axis=0)
    bad = np.flatnonzero(np.abs(norms - 1.0) > unit_tol)
    if bad.size:
        raise DomainError(
            f"columns {bad.tolist()} are not unit vectors (norms {norms[bad].tolist()})"
        )
    return V


def normalize_columns(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128)
    return X / np.linalg.norm(X, axis=0)


def gram_offdiag_abs(V) -> np.ndarray:
    """Absolute Gram matrix ``|V^H V|`` with the diagonal zeroed."""
    G = np.abs(V.conj().T @ V)
    np.fill_diagonal(G, 0.0)
    return G


def coherence(V) -> float:
    """Largest ``|<v_p, v_q>|`` over distinct pairs; 0 for a single vector."""
    V = column_set(V)
    if V.shape[1] < 2:
        return 0.0
    mu = float(gram_offdiag_abs(V).max())
    # collinear pairs land a few ulps either side of 1
    if mu > 1.0 - COLLINEAR_ULPS * np.finfo(float).eps:
        return 1.0
    return mu


def _is_dependent(sub: np.ndarray, tol: float) -> bool:
    m, s = sub.shape
    if s > m:
        return True
    sv = np.linalg.svd(sub, compute_uv=False)
    return sv[-1] <= tol * sv[0]


def _check_capacity(r: int):
    if r > MAX_SEARCH_COLUMNS:
        raise CapacityError(
            f"exhaustive spark search limited to {MAX_SEARCH_COLUMNS} columns, got {r}; "
            "use spark_coherence_bounds for a coherence-based lower bound "
            "(krank >= 1/mu) instead"
        )


def spark(V, tol: float = DEFAULT_TOL):
    """Size of the smallest linearly dependent subset, or ``INFINITE``.

    A subset is dependent when its smallest singular value is at most
    ``tol`` times its largest one. Subsets with more columns than the
    ambient dimension are always dependent.
    """
    V = column_set(V)
    m, r = V.shape
    _check_capacity(r)
    for s in range(2, min(r, m + 1) + 1):
        for idx in combinations(range(r), s):
            if _is_dependent(V[:, idx], tol):
                return s
    return INFINITE


def krank(V, tol: float = DEFAULT_TOL) -> int:
    """Largest ``k`` such that every ``k``-subset of columns is independent."""
    V = column_set(V)
    s = spark(V, tol)
    return V.shape[1] if s == INFINITE else s - 1


girth = spark


def spark_coherence_bounds(V):
    """Lower bounds ``(1 + 1/mu, 1/mu)`` on spark and k-rank.

    Returns ``(INFINITE, INFINITE)`` for an orthonormal collection.
    """
    mu = coherence(V)
    if mu == 0.0:
        return INFINITE, INFINITE
    return 1.0 + 1.0 / mu, 1.0 / mu


def krank_lower_bound(mu: float, r: int) -> int:
    """Integer k-rank lower bound ``ceil(1/mu)``, or ``r`` when ``mu == 0``."""
    if mu == 0.0:
        return r
    # absorb rounding when 1/mu is an integer
    return min(r, math.ceil(1.0 / mu - 1e-9))


@dataclass(frozen=True)
class CoherenceReport:
    mu: float
    spark: float | int
    krank: int
    girth: float | int


def coherence_report(V, tol: float = DEFAULT_TOL) -> CoherenceReport:
    V = column_set(V)
    s = spark(V, tol)
    k = V.shape[1] if s == INFINITE else s - 1
    return CoherenceReport(mu=coherence(V), spark=s, krank=k, girth=s)
