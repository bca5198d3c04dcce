"""Dense complex order-3 tensors and CP models.

A :class:`Tensor3` wraps an ``(l, m, n)`` complex128 array stored in C order
(``i`` slowest, ``k`` fastest). A :class:`CpModel` holds weights and three
factor matrices with unit-norm columns, representing

    A = sum_p weights[p] * U[:, p] (x) V[:, p] (x) W[:, p].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Columns with a norm below this are considered zero and rejected.
MIN_COLUMN_NORM = 1e-300

#: Tolerance on unit column norms of a constructed model.
UNIT_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when array shapes are incompatible."""


class DomainError(ValueError):
    """Raised when values are outside the domain of an operation."""


@dataclass(frozen=True, eq=False)
class Tensor3:
    """Immutable dense complex tensor of order 3."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.complex128, order="C", copy=True)
        if arr.ndim != 3:
            raise DimensionError(f"expected an order-3 array, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise DimensionError(f"all dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("tensor entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, dims) -> "Tensor3":
        return cls(np.zeros(tuple(dims), dtype=np.complex128))

    def __add__(self, other: "Tensor3") -> "Tensor3":
        _check_same_dims(self, other)
        return Tensor3(self.data + other.data)

    def __sub__(self, other: "Tensor3") -> "Tensor3":
        _check_same_dims(self, other)
        return Tensor3(self.data - other.data)

    def __mul__(self, scalar) -> "Tensor3":
        return Tensor3(self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor3":
        return Tensor3(-self.data)

    def __repr__(self):
        return f"Tensor3(dims={self.dims})"


def _check_same_dims(a: Tensor3, b: Tensor3):
    if a.dims != b.dims:
        raise DimensionError(f"dimension mismatch: {a.dims} vs {b.dims}")


def _as_vector(x, name: str) -> np.ndarray:
    vec = np.asarray(x, dtype=np.complex128).reshape(-1)
    if vec.size < 1:
        raise DimensionError(f"{name} must have length >= 1")
    return vec


def outer3(u, v, w) -> Tensor3:
    """Rank-one tensor with entries ``u[i] * v[j] * w[k]``."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    w = _as_vector(w, "w")
    return Tensor3(np.einsum("i,j,k->ijk", u, v, w))


def frobenius_norm(A: Tensor3) -> float:
    return float(np.linalg.norm(A.data.ravel()))


def frobenius_inner(A: Tensor3, B: Tensor3) -> complex:
    """``sum a_ijk * conj(b_ijk)``; conjugate-linear in ``B``."""
    _check_same_dims(A, B)
    return complex(np.vdot(B.data.ravel(), A.data.ravel()))


@dataclass(frozen=True, eq=False)
class CpModel:
    """Rank-r CP model with unit-norm factor columns.

    Factor columns are normalized on construction and their norms are
    absorbed into ``weights``, so ``CpModel(w, U, V, W)`` represents the same
    tensor as the raw factors passed in.
    """

    weights: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        factors = []
        for name in ("U", "V", "W"):
            mat = np.array(getattr(self, name), dtype=np.complex128, copy=True)
            if mat.ndim == 1:
                mat = mat[:, None]
            if mat.ndim != 2:
                raise DimensionError(f"factor {name} must be a matrix")
            factors.append(mat)
        r = factors[0].shape[1]
        if r < 1:
            raise DimensionError("rank must be >= 1")
        if any(f.shape[1] != r for f in factors):
            raise DimensionError(
                f"factor column counts differ: {[f.shape[1] for f in factors]}"
            )
        weights = np.array(self.weights, dtype=np.complex128, copy=True).reshape(-1)
        if weights.shape != (r,):
            raise DimensionError(f"expected {r} weights, got {weights.shape[0]}")
        if not (np.all(np.isfinite(weights)) and all(np.all(np.isfinite(f)) for f in factors)):
            raise DomainError("model entries must be finite")
        for name, mat in zip(("U", "V", "W"), factors):
            norms = np.linalg.norm(mat, axis=0)
            if np.any(norms < MIN_COLUMN_NORM):
                raise DomainError(f"factor {name} has a zero column")
            # leave already-unit columns bit-identical (file round trips)
            norms = np.where(np.abs(norms - 1.0) <= 4e-16, 1.0, norms)
            mat /= norms
            weights = weights * norms
        for arr in (weights, *factors):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "U", factors[0])
        object.__setattr__(self, "V", factors[1])
        object.__setattr__(self, "W", factors[2])

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.U.shape[0], self.V.shape[0], self.W.shape[0])

    @property
    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.U, self.V, self.W)

    def permuted(self, perm) -> "CpModel":
        perm = np.asarray(perm)
        return CpModel(self.weights[perm], self.U[:, perm], self.V[:, perm], self.W[:, perm])

    def __repr__(self):
        return f"CpModel(rank={self.rank}, dims={self.dims})"


def cp_evaluate(M: CpModel, dims=None) -> Tensor3:
    """Dense tensor ``sum_p weights[p] u_p (x) v_p (x) w_p``."""
    if dims is not None and tuple(dims) != M.dims:
        raise DimensionError(f"model dims {M.dims} do not match requested {tuple(dims)}")
    return Tensor3(np.einsum("p,ip,jp,kp->ijk", M.weights, M.U, M.V, M.W))


def residual(A: Tensor3, M: CpModel) -> float:
    """Frobenius distance between ``A`` and the tensor of ``M``."""
    if A.dims != M.dims:
        raise DimensionError(f"tensor dims {A.dims} do not match model dims {M.dims}")
    return frobenius_norm(A - cp_evaluate(M))
