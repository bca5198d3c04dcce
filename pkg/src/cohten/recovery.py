"""Map identified CP factors back to source directions and waveforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import GroundTruth
from .solver import align_models
from .tensor_core import CpModel, DimensionError

# flags attached to a direction estimate
ALIASED = "ALIASED"
RESTRICTED = "RESTRICTED"
UNRESOLVED_FLAG = "UNRESOLVED"


@dataclass(frozen=True)
class DirectionEstimate:
    direction: np.ndarray | None
    flags: tuple[str, ...] = ()

    @property
    def resolved(self) -> bool:
        return self.direction is not None


def _span_rank(translations: np.ndarray, tol: float = 1e-9) -> int:
    if translations.shape[0] < 2:
        return 0
    sv = np.linalg.svd(translations[1:], compute_uv=False)
    return int(np.sum(sv > tol * max(sv[0], 1e-300)))


def estimate_direction(v, translations, omega: float, c: float) -> DirectionEstimate:
    """Direction from one column of subarray gains.

    Phases are taken relative to the reference subarray (assumed in
    ``(-pi, pi]``) and ``delta_j . d`` is solved by least squares. When the
    translations span fewer than three dimensions only the component of
    ``d`` inside their span is identifiable; that component is returned,
    normalized, and flagged ``RESTRICTED``.
    """
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    D = np.asarray(translations, dtype=float)
    if D.shape != (v.size, 3):
        raise DimensionError(f"need one translation per gain entry, got {D.shape} for {v.size}")
    k = omega / c
    flags = []
    if np.any(np.linalg.norm(D, axis=1) * k >= np.pi):
        flags.append(ALIASED)
    rank = _span_rank(D)
    if rank < 3:
        flags.append(RESTRICTED)
    if rank == 0:
        return DirectionEstimate(None, tuple(flags + [UNRESOLVED_FLAG]))
    phases = np.angle(v[1:] * np.conj(v[0]))
    d, *_ = np.linalg.lstsq(D[1:] * k, phases, rcond=None)
    norm = np.linalg.norm(d)
    if norm < 1e-9:
        return DirectionEstimate(None, tuple(flags + [UNRESOLVED_FLAG]))
    return DirectionEstimate(d / norm, tuple(flags))


def estimate_directions(M: CpModel, translations, omega: float, c: float):
    return [estimate_direction(M.V[:, p], translations, omega, c) for p in range(M.rank)]


def angle_deg(a, b) -> float:
    cosang = np.clip(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosang)))


def waveform_correlation(x, y) -> float:
    """``|<x, y>| / (|x| |y|)``, clipped into ``[0, 1]``."""
    x = np.asarray(x)
    y = np.asarray(y)
    den = np.linalg.norm(x) * np.linalg.norm(y)
    if den == 0.0:
        return 0.0
    return float(min(1.0, abs(np.vdot(y, x)) / den))


@dataclass(frozen=True)
class SourceEstimate:
    direction: np.ndarray | None
    flags: tuple[str, ...]
    waveform: np.ndarray
    direction_error_deg: float | None = None
    rho: float | None = None


@dataclass(frozen=True)
class RecoveryResult:
    sources: tuple[SourceEstimate, ...]
    permutation: tuple[int, ...]

    def to_dict(self) -> dict:
        out = []
        for p, s in enumerate(self.sources):
            out.append({
                "source": p,
                "model_term": self.permutation[p],
                "direction": None if s.direction is None else [float(x) for x in s.direction],
                "direction_error_deg": s.direction_error_deg,
                "rho": s.rho,
                "flags": list(s.flags),
            })
        return {"sources": out, "permutation": list(self.permutation)}


def model_waveforms(M: CpModel) -> np.ndarray:
    """Waveform estimates ``lambda_p * u_0p * v_0p * w_p``, one per column.

    Referencing to sensor 0 of subarray 0 removes the per-term scaling
    ambiguity; with that sensor at the origin the columns are the source
    envelopes themselves.
    """
    return M.W * (M.weights * M.U[0] * M.V[0])[None, :]


def extract_waveforms(M: CpModel, truth: GroundTruth | None = None,
                      translations=None, omega: float | None = None,
                      c: float | None = None) -> RecoveryResult:
    """Per-source waveforms (and directions, when the geometry is given).

    With ``truth``, model terms are matched to true sources first and each
    estimate carries its waveform correlation ``rho`` and, when directions
    are estimated, the angular error in degrees. Results are listed in the
    truth's source order.
    """
    waves = model_waveforms(M)
    dirs = None
    if translations is not None:
        dirs = estimate_directions(M, translations, omega, c)
    if truth is None:
        perm = tuple(range(M.rank))
    else:
        perm = align_models(M, truth.model).permutation
    sources = []
    for p, q in enumerate(perm):
        d = dirs[q] if dirs is not None else None
        rho = err = None
        if truth is not None:
            rho = waveform_correlation(waves[:, q], truth.envelopes[:, p])
            if d is not None and d.resolved:
                err = angle_deg(d.direction, truth.directions[p])
        sources.append(SourceEstimate(
            direction=None if d is None else d.direction,
            flags=() if d is None else d.flags,
            waveform=waves[:, q],
            direction_error_deg=err,
            rho=rho,
        ))
    return RecoveryResult(tuple(sources), tuple(perm))
