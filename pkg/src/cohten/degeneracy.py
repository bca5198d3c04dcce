"""A rank-3 tensor with border rank 2 and the rank-2 sequence converging to it.

With pairs ``(u_i, v_i)`` of independent vectors,

    A   = u1 (x) u2 (x) v3 + u1 (x) v2 (x) u3 + v1 (x) u2 (x) u3
    A_n = n (u1 + v1/n) (x) (u2 + v2/n) (x) (u3 + v3/n) - n u1 (x) u2 (x) u3

``A_n`` has rank at most 2 and tends to ``A``, so ``A`` has no best rank-2
approximation. The weights of the two terms of ``A_n`` grow like ``n`` and
their factors become collinear, which is exactly what a coherence cap rules
out.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .coherence_metrics import coherence
from .solver import InfeasibleError, SolverOptions, als_decompose, constrained_decompose
from .tensor_core import (
    CpModel,
    DimensionError,
    DomainError,
    Tensor3,
    cp_evaluate,
    frobenius_norm,
    outer3,
)

#: Above this ``n`` the sequence is built from the expansion of ``A_n - A``.
N_DIRECT_MAX = 10**9

INDEPENDENCE_TOL = 1e-9


@dataclass(frozen=True)
class DslInstance:
    u: tuple[np.ndarray, np.ndarray, np.ndarray]
    v: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        u = tuple(np.asarray(x, dtype=np.complex128).reshape(-1) for x in self.u)
        v = tuple(np.asarray(x, dtype=np.complex128).reshape(-1) for x in self.v)
        if len(u) != 3 or len(v) != 3:
            raise DimensionError("need three u vectors and three v vectors")
        for i, (a, b) in enumerate(zip(u, v)):
            if a.shape != b.shape or a.size < 2:
                raise DimensionError(f"pair {i}: vectors must share a length >= 2")
            pair = np.stack([a / np.linalg.norm(a), b / np.linalg.norm(b)], axis=1)
            sv = np.linalg.svd(pair, compute_uv=False)
            if not np.all(np.isfinite(sv)) or sv[-1] <= INDEPENDENCE_TOL:
                raise DomainError(f"u{i+1} and v{i+1} must be linearly independent")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def orthonormal(cls, m: int = 2) -> "DslInstance":
        """``u_i = e_1`` and ``v_i = e_2`` in every mode."""
        e1 = np.zeros(m)
        e1[0] = 1.0
        e2 = np.zeros(m)
        e2[1] = 1.0
        return cls((e1, e1, e1), (e2, e2, e2))

    @classmethod
    def random(cls, m: int, rng) -> "DslInstance":
        draw = lambda: rng.standard_normal(m) + 1j * rng.standard_normal(m)  # noqa: E731
        return cls(tuple(draw() for _ in range(3)), tuple(draw() for _ in range(3)))


def dsl_limit(inst: DslInstance) -> Tensor3:
    (u1, u2, u3), (v1, v2, v3) = inst.u, inst.v
    return outer3(u1, u2, v3) + outer3(u1, v2, u3) + outer3(v1, u2, u3)


def dsl_limit_model(inst: DslInstance) -> CpModel:
    """The three-term representation of the limit tensor."""
    (u1, u2, u3), (v1, v2, v3) = inst.u, inst.v
    return CpModel(np.ones(3), np.stack([u1, u1, v1], 1),
                   np.stack([u2, v2, u2], 1), np.stack([v3, u3, u3], 1))


def _difference(inst: DslInstance, n: float) -> Tensor3:
    """``A_n - A`` from its expansion in powers of ``1/n``."""
    (u1, u2, u3), (v1, v2, v3) = inst.u, inst.v
    first = outer3(u1, v2, v3) + outer3(v1, u2, v3) + outer3(v1, v2, u3)
    return first * (1.0 / n) + outer3(v1, v2, v3) * (1.0 / n**2)


def dsl_sequence(inst: DslInstance, n: int) -> Tensor3:
    """The rank-2 tensor ``A_n``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if n > N_DIRECT_MAX:
        return dsl_limit(inst) + _difference(inst, n)
    return cp_evaluate(dsl_sequence_model(inst, n))


def dsl_sequence_model(inst: DslInstance, n: int) -> CpModel:
    """Explicit two-term CP model of ``A_n``."""
    (u1, u2, u3), (v1, v2, v3) = inst.u, inst.v
    a = [u + v / n for u, v in zip((u1, u2, u3), (v1, v2, v3))]
    return CpModel([float(n), -float(n)], np.stack([a[0], u1], 1),
                   np.stack([a[1], u2], 1), np.stack([a[2], u3], 1))


def distance_to_limit(inst: DslInstance, n: int) -> float:
    if n > N_DIRECT_MAX:
        return frobenius_norm(_difference(inst, n))
    return frobenius_norm(dsl_sequence(inst, n) - dsl_limit(inst))


def orthonormal_distance(n: float) -> float:
    """Closed form of ``||A_n - A||`` for the orthonormal instance."""
    return float(np.sqrt(3.0 / n**2 + 1.0 / n**4))


@dataclass(frozen=True)
class SequenceRow:
    n: int
    dist_to_limit: float
    lambda_max_explicit: float
    mu_u: float
    mu_v: float
    mu_w: float


@dataclass
class DegeneracyReport:
    rows: list[SequenceRow]
    unconstrained: tuple | None = None
    constrained: tuple | None = None
    constrained_error: str | None = None

    def to_csv(self) -> str:
        lines = ["n,dist_to_limit,lambda_max_explicit,mu_u,mu_v,mu_w"]
        for r in self.rows:
            lines.append(",".join([str(r.n)] + [f"{x:.17g}" for x in (
                r.dist_to_limit, r.lambda_max_explicit, r.mu_u, r.mu_v, r.mu_w)]))
        return "\n".join(lines) + "\n"


def demo_degeneracy(inst: DslInstance, n_list, opts: SolverOptions,
                    caps=None) -> DegeneracyReport:
    """Tabulate the sequence ``A_n`` and fit rank 2 to the limit tensor.

    The unconstrained fit uses ``opts`` as given; with ``caps`` a second,
    coherence-capped fit is run with the same options.
    """
    rows = []
    for n in n_list:
        M = dsl_sequence_model(inst, n)
        rows.append(SequenceRow(
            n=int(n),
            dist_to_limit=distance_to_limit(inst, n),
            lambda_max_explicit=float(np.abs(M.weights).max()),
            mu_u=coherence(M.U),
            mu_v=coherence(M.V),
            mu_w=coherence(M.W),
        ))
    A = dsl_limit(inst)
    base = replace(opts, rank=2, mu_caps=None)
    report = DegeneracyReport(rows=rows, unconstrained=als_decompose(A, base))
    if caps is not None:
        capped = replace(base, mu_caps=tuple(caps))
        try:
            report.constrained = constrained_decompose(A, capped)
        except InfeasibleError as exc:
            report.constrained_error = str(exc)
    return report
