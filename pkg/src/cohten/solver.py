"""Alternating least squares CP fitting, with optional per-mode coherence caps.

Each sweep updates the three factor matrices in turn. A mode update solves
the linear least-squares problem in the unnormalized factor (Khatri-Rao
structured design matrix, minimum-norm solution), then moves the column
norms into the weights. Without caps every update is an exact block
minimizer, so the residual never increases.

With caps ``(mu1, mu2, mu3)`` each mode update instead minimizes

    ||X_(k) - F K^T||^2 + rho * sum_{p != q} max(0, |<f_p, f_q>| - cap)^2

over the unnormalized factor ``F`` (``f_p`` are its normalized columns),
warm-started from the least-squares solution. ``rho`` grows by
``penalty_growth`` after every sweep that ends infeasible, and only runs
whose final model satisfies the caps are returned.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .coherence_metrics import gram_offdiag_abs
from .tensor_core import CpModel, DimensionError, DomainError, Tensor3, frobenius_norm

logger = logging.getLogger(__name__)

#: Caps are enforced internally this far below the requested value.
PENALTY_MARGIN = 1e-4

#: Slack allowed by the final feasibility filter.
FEASIBILITY_SLACK = 1e-6

_MAX_PENALTY = 1e12

#: Residuals below this fraction of ||A|| count as an exact fit.
EXACT_FIT = 1e-14


class DegenerateInputError(DomainError):
    """Raised for inputs with nothing to fit (e.g. the zero tensor)."""


class InfeasibleError(RuntimeError):
    """No restart produced a model satisfying the coherence caps."""

    def __init__(self, message, model=None, trace=None):
        super().__init__(message)
        self.model = model
        self.trace = trace


@dataclass(frozen=True)
class SolverOptions:
    rank: int
    mu_caps: tuple[float, float, float] | None = None
    max_iter: int = 2000
    rel_tol: float = 1e-8
    penalty_weight: float = 1.0
    penalty_growth: float = 2.0
    restarts: int = 5
    seed: int = 0
    divergence_window: int = 500
    divergence_factor: float = 10.0
    stall_tol: float = 1e-6

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.mu_caps is not None:
            caps = tuple(float(c) for c in self.mu_caps)
            if len(caps) != 3 or not all(0.0 < c <= 1.0 for c in caps):
                raise ValueError(f"mu_caps must be three values in (0, 1], got {self.mu_caps}")
            object.__setattr__(self, "mu_caps", caps)


@dataclass
class SolveTrace:
    """Per-iteration diagnostics of one solver run.

    Row 0 holds the initialization; row ``t`` the state after sweep ``t``.
    """

    iters: list[int] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    lambda_max: list[float] = field(default_factory=list)
    mu_u: list[float] = field(default_factory=list)
    mu_v: list[float] = field(default_factory=list)
    mu_w: list[float] = field(default_factory=list)
    status: str = "max_iter"
    seed_index: int = 0

    def record(self, it, res, lam_max, mus):
        self.iters.append(it)
        self.residual.append(res)
        self.lambda_max.append(lam_max)
        self.mu_u.append(mus[0])
        self.mu_v.append(mus[1])
        self.mu_w.append(mus[2])

    @property
    def initial_residual(self) -> float:
        return self.residual[0]

    @property
    def final_residual(self) -> float:
        return self.residual[-1]

    def to_csv(self) -> str:
        rows = ["iter,residual,lambda_max,mu_u,mu_v,mu_w"]
        for row in zip(self.iters, self.residual, self.lambda_max,
                       self.mu_u, self.mu_v, self.mu_w):
            rows.append(",".join([str(row[0])] + [f"{x:.17g}" for x in row[1:]]))
        return "\n".join(rows) + "\n"


# ----------------------------------------------------------------------------
# linear algebra helpers


def _unfold(X: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(X, mode, 0).reshape(X.shape[mode], -1)


def _khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return (A[:, None, :] * B[None, :, :]).reshape(-1, A.shape[1])


def _design(factors, mode):
    others = [factors[i] for i in range(3) if i != mode]
    return _khatri_rao(*others)


def _mu(F: np.ndarray) -> float:
    if F.shape[1] < 2:
        return 0.0
    return float(min(1.0, gram_offdiag_abs(F).max()))


def _model_tensor(weights, factors):
    return np.einsum("p,ip,jp,kp->ijk", weights, *factors)


def _random_unit(rng, rows, cols):
    Z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    return Z / np.linalg.norm(Z, axis=0)


def _optimal_weights(X, factors):
    """Least-squares weights for fixed unit factors."""
    U, V, W = factors
    H = (U.conj().T @ U) * (V.conj().T @ V) * (W.conj().T @ W)
    b = np.einsum("ijk,ip,jp,kp->p", X, U.conj(), V.conj(), W.conj())
    return np.linalg.lstsq(H.T, b, rcond=None)[0]


def _split_norms(F, rng):
    norms = np.linalg.norm(F, axis=0)
    zero = norms < 1e-300
    if np.any(zero):
        F = F.copy()
        F[:, zero] = _random_unit(rng, F.shape[0], int(zero.sum()))
        norms = np.where(zero, 0.0, norms)
        return F / np.where(zero, 1.0, norms), norms
    return F / norms, norms


# ----------------------------------------------------------------------------
# coherence penalty


def coherence_penalty(F: np.ndarray, cap: float) -> float:
    """``sum_{p != q} max(0, |<f_p, f_q>| - cap)^2`` on normalized columns."""
    Fn = F / np.linalg.norm(F, axis=0)
    excess = np.maximum(gram_offdiag_abs(Fn) - cap, 0.0)
    return float(np.sum(excess**2))


def _penalized_objective(F, Xk, K, rho, cap):
    """Objective and its conjugate Wirtinger gradient for one mode update."""
    R = Xk - F @ K.T
    data = np.vdot(R, R).real
    grad = -(R @ K.conj())

    norms = np.linalg.norm(F, axis=0)
    Fn = F / norms
    C = Fn.conj().T @ Fn  # C[q, p] = <f_p, f_q>
    absC = np.abs(C)
    np.fill_diagonal(absC, 0.0)
    excess = np.maximum(absC - cap, 0.0)
    pen = float(np.sum(excess**2))
    if pen > 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(excess > 0.0, 2.0 * excess / absC, 0.0)
        # d pen / d conj(f_p) = sum_q coef[q, p] * <f_p, f_q> * f_q
        G = Fn @ (coef * C)
        G = G - Fn * np.real(np.sum(Fn.conj() * G, axis=0))
        grad = grad + rho * G / norms
    return data + rho * pen, grad


def _penalized_update(F0, Xk, K, rho, cap):
    shape = F0.shape

    def fun(x):
        F = (x[: x.size // 2] + 1j * x[x.size // 2:]).reshape(shape)
        val, g = _penalized_objective(F, Xk, K, rho, cap)
        # real gradient of a real function is twice the conjugate Wirtinger one
        g = 2.0 * g.ravel()
        return val, np.concatenate([g.real, g.imag])

    x0 = np.concatenate([F0.real.ravel(), F0.imag.ravel()])
    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 200, "gtol": 1e-12, "ftol": 1e-15})
    x = res.x
    return (x[: x.size // 2] + 1j * x[x.size // 2:]).reshape(shape)


# ----------------------------------------------------------------------------
# single run


def _check_input(A: Tensor3, r: int) -> np.ndarray:
    X = A.data
    if not np.all(np.isfinite(X)):
        raise DomainError("tensor entries must be finite")
    if frobenius_norm(A) == 0.0:
        raise DegenerateInputError("cannot decompose the zero tensor")
    l, m, n = X.shape
    if r > min(m * n, l * n, l * m):
        raise DimensionError(
            f"rank {r} exceeds the solvability limit min(mn, ln, lm) = {min(m*n, l*n, l*m)}"
        )
    return X


def _diverging(trace: SolveTrace, opts: SolverOptions) -> bool:
    t = len(trace.residual) - 1
    w = opts.divergence_window
    if t < w + 1:
        return False
    lam = trace.lambda_max
    if lam[t - w] <= 0.0 or lam[t] < opts.divergence_factor * lam[t - w]:
        return False
    prev, cur = trace.residual[t - 1], trace.residual[t]
    return prev > 0.0 and (prev - cur) / prev < opts.stall_tol


def _run(X, opts: SolverOptions, seed_seq, index: int):
    rng = np.random.default_rng(seed_seq)
    l, m, n = X.shape
    r = opts.rank
    caps = opts.mu_caps
    factors = [_random_unit(rng, d, r) for d in (l, m, n)]
    weights = _optimal_weights(X, factors)
    norm_x = float(np.linalg.norm(X))
    rho = opts.penalty_weight * norm_x**2
    eff_caps = None
    if caps is not None:
        eff_caps = [max(c - PENALTY_MARGIN, 0.5 * c) for c in caps]

    def feasible():
        return caps is None or all(
            _mu(F) <= c + FEASIBILITY_SLACK for F, c in zip(factors, caps)
        )

    def resid():
        return float(np.linalg.norm(X - _model_tensor(weights, factors)))

    trace = SolveTrace(seed_index=index)
    trace.record(0, resid(), float(np.abs(weights).max()), [_mu(F) for F in factors])
    for it in range(1, opts.max_iter + 1):
        for mode in range(3):
            K = _design(factors, mode)
            Xk = _unfold(X, mode)
            F = np.linalg.lstsq(K, Xk.T, rcond=None)[0].T
            if eff_caps is not None and r > 1 and coherence_penalty(F, eff_caps[mode]) > 0.0:
                F = _penalized_update(F, Xk, K, rho, eff_caps[mode])
            factors[mode], weights = _split_norms(F, rng)
        res = resid()
        trace.record(it, res, float(np.abs(weights).max()), [_mu(F) for F in factors])
        ok = feasible()
        if not ok:
            rho = min(rho * opts.penalty_growth, _MAX_PENALTY * max(norm_x**2, 1.0))
        if _diverging(trace, opts):
            trace.status = "diverging_weights"
            break
        prev = trace.residual[-2]
        exact = res <= EXACT_FIT * norm_x
        if ok and (exact or abs(prev - res) <= opts.rel_tol * prev):
            trace.status = "converged"
            break
    return CpModel(weights, *factors), trace, feasible()


def _threads() -> int:
    try:
        n = int(os.environ.get("COHTEN_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _solve(A: Tensor3, opts: SolverOptions):
    X = _check_input(A, opts.rank)
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.restarts)
    with ThreadPoolExecutor(max_workers=min(_threads(), opts.restarts)) as pool:
        runs = list(pool.map(lambda a: _run(X, opts, *a), zip(seeds, range(opts.restarts))))
    for model, trace, ok in runs:
        logger.debug("restart %d: residual %.6g status %s feasible %s",
                     trace.seed_index, trace.final_residual, trace.status, ok)
    return runs


def _best(runs):
    # ties resolved by restart index (min is stable)
    return min(runs, key=lambda run: run[1].final_residual)


def als_decompose(A: Tensor3, opts: SolverOptions) -> tuple[CpModel, SolveTrace]:
    """Unconstrained rank-r CP fit; best of ``opts.restarts`` seeded runs."""
    if opts.mu_caps is not None:
        raise ValueError("als_decompose takes no mu_caps; use constrained_decompose")
    model, trace, _ = _best(_solve(A, opts))
    return model, trace


def constrained_decompose(A: Tensor3, opts: SolverOptions) -> tuple[CpModel, SolveTrace]:
    """Rank-r CP fit with ``mu(U) <= mu1``, ``mu(V) <= mu2``, ``mu(W) <= mu3``.

    Raises :class:`InfeasibleError` if no restart ends feasible.
    """
    if opts.mu_caps is None:
        raise ValueError("constrained_decompose requires mu_caps")
    m1, m2, m3 = opts.mu_caps
    if m1 * m2 * m3 >= 1.0 / opts.rank:
        warnings.warn(
            f"coherence caps product {m1*m2*m3:.4g} >= 1/r = {1/opts.rank:.4g}: "
            "a best approximation under these caps is not guaranteed to exist",
            stacklevel=2,
        )
    runs = _solve(A, opts)
    good = [run for run in runs if run[2]]
    if not good:
        model, trace, _ = _best(runs)
        raise InfeasibleError("no restart satisfied the coherence caps", model, trace)
    model, trace, _ = _best(good)
    return model, trace


def decompose(A: Tensor3, opts: SolverOptions) -> tuple[CpModel, SolveTrace]:
    if opts.mu_caps is None:
        return als_decompose(A, opts)
    return constrained_decompose(A, opts)


# ----------------------------------------------------------------------------
# alignment


@dataclass(frozen=True)
class Alignment:
    """Match of model terms onto reference terms.

    ``permutation[p]`` is the index of the model term matched to reference
    term ``p``; ``phases[p]`` the per-mode angles (summing to 0 mod 2 pi)
    that rotate the reference columns onto the matched model columns.
    """

    permutation: tuple[int, ...]
    phases: np.ndarray
    mode_scores: tuple[float, float, float]

    @property
    def score(self) -> float:
        return min(self.mode_scores)


def _wrap(theta):
    # map to (-pi, pi]
    return np.pi - np.mod(np.pi - np.asarray(theta), 2 * np.pi)


def align_models(M: CpModel, M_ref: CpModel) -> Alignment:
    """Greedy term matching by ``|<u,u'>| |<v,v'>| |<w,w'>|``.

    Pairs are taken in order of decreasing score; equal scores go to the
    lexicographically smallest (reference, model) index pair.
    """
    if M.rank != M_ref.rank:
        raise DimensionError(f"rank mismatch: {M.rank} vs {M_ref.rank}")
    if M.dims != M_ref.dims:
        raise DimensionError(f"dims mismatch: {M.dims} vs {M_ref.dims}")
    r = M.rank
    inner = [Fr.conj().T @ F for F, Fr in zip(M.factors, M_ref.factors)]  # [p_ref, q]
    score = np.abs(inner[0]) * np.abs(inner[1]) * np.abs(inner[2])
    # round so that floating noise does not break lexicographic ties
    keyed = np.round(score, 12)
    order = sorted(((-keyed[p, q], p, q) for p in range(r) for q in range(r)))
    perm = [-1] * r
    used = set()
    for _, p, q in order:
        if perm[p] < 0 and q not in used:
            perm[p] = q
            used.add(q)
    phases = np.zeros((r, 3))
    per_mode = np.ones(3)
    for p, q in enumerate(perm):
        th = np.array([np.angle(inner[k][p, q]) for k in range(3)])
        th[2] = -(th[0] + th[1])
        phases[p] = _wrap(th)
        per_mode = np.minimum(per_mode, [abs(inner[k][p, q]) for k in range(3)])
    return Alignment(tuple(perm), phases, tuple(float(s) for s in per_mode))


__all__ = [
    "SolverOptions",
    "SolveTrace",
    "Alignment",
    "DegenerateInputError",
    "InfeasibleError",
    "als_decompose",
    "constrained_decompose",
    "decompose",
    "align_models",
    "coherence_penalty",
]
