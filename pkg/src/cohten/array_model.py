"""Narrowband multi-subarray measurement synthesis.

A reference subarray of ``l`` sensors at positions ``b_i`` is replicated by
``m`` translations ``delta_j`` (``delta_0 = 0``). Source ``p`` arrives from unit
direction ``d_p`` at range ``R_p`` (or from the far field) and emits the
complex envelope ``sigma_p(k)``. The noiseless measurement is

    s[i, j, k] = sum_p eps(b_i, d_p, R_p) * gain(delta_j, d_p) * sigma_p(k)

which is a rank-r CP model once each factor column is normalized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coherence_metrics import coherence
from .tensor_core import CpModel, DomainError, Tensor3, frobenius_norm

FARFIELD = math.inf


def steering(b, d, R=FARFIELD, omega: float = 1.0, c: float = 1.0) -> complex:
    """Phase response of a sensor at ``b`` to a source in direction ``d``.

    ``exp(1j * omega/c * (b.d - |b x d|^2 / (2R)))``; the curvature term is
    dropped in the far field.
    """
    if omega <= 0 or c <= 0:
        raise DomainError("omega and c must be positive")
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    phase = float(b @ d)
    if R != FARFIELD:
        if not R > 0:
            raise DomainError(f"source range must be positive, got {R}")
        cross = np.cross(b, d)
        phase -= float(cross @ cross) / (2.0 * R)
    return complex(np.exp(1j * (omega / c) * phase))


def subarray_gain(delta, d, omega: float = 1.0, c: float = 1.0) -> complex:
    """Phase factor ``exp(1j * omega/c * delta.d)`` of a translated subarray."""
    if omega <= 0 or c <= 0:
        raise DomainError("omega and c must be positive")
    phase = float(np.asarray(delta, dtype=float) @ np.asarray(d, dtype=float))
    return complex(np.exp(1j * (omega / c) * phase))


@dataclass(frozen=True)
class Source:
    direction: np.ndarray
    envelope: np.ndarray
    range: float = FARFIELD

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float).reshape(-1)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise DomainError(f"source direction must be a unit 3-vector, got {d}")
        if not (self.range == FARFIELD or self.range > 0):
            raise DomainError(f"source range must be positive, got {self.range}")
        env = np.asarray(self.envelope, dtype=np.complex128).reshape(-1)
        if env.size < 1:
            raise DomainError("envelope must have at least one sample")
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "envelope", env)


@dataclass(frozen=True)
class ArrayScenario:
    sensors: np.ndarray
    translations: np.ndarray
    sources: tuple[Source, ...]
    omega: float = 2 * np.pi
    celerity: float = 1.0

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.sensors, dtype=float))
        t = np.atleast_2d(np.asarray(self.translations, dtype=float))
        if b.shape[1] != 3 or b.shape[0] < 1:
            raise DomainError("sensors must be a non-empty list of 3-vectors")
        if t.shape[1] != 3 or t.shape[0] < 1:
            raise DomainError("translations must be a non-empty list of 3-vectors")
        if np.any(t[0] != 0.0):
            raise DomainError("the first translation must be zero (reference subarray)")
        if not self.sources:
            raise DomainError("at least one source is required")
        n = {s.envelope.size for s in self.sources}
        if len(n) != 1:
            raise DomainError(f"all envelopes must have the same length, got {sorted(n)}")
        if self.omega <= 0 or self.celerity <= 0:
            raise DomainError("omega and celerity must be positive")
        object.__setattr__(self, "sensors", b)
        object.__setattr__(self, "translations", t)
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.sensors.shape[0], self.translations.shape[0],
                self.sources[0].envelope.size)

    @property
    def wavenumber(self) -> float:
        return self.omega / self.celerity

    def steering_matrix(self) -> np.ndarray:
        """``l x r`` reference-subarray responses."""
        return np.array([[steering(b, s.direction, s.range, self.omega, self.celerity)
                          for s in self.sources] for b in self.sensors])

    def gain_matrix(self) -> np.ndarray:
        """``m x r`` subarray translation factors."""
        return np.array([[subarray_gain(t, s.direction, self.omega, self.celerity)
                          for s in self.sources] for t in self.translations])

    def envelope_matrix(self) -> np.ndarray:
        return np.stack([s.envelope for s in self.sources], axis=1)


@dataclass(frozen=True)
class GroundTruth:
    model: CpModel
    mu_u: float
    mu_v: float
    mu_w: float
    directions: np.ndarray = field(repr=False)
    envelopes: np.ndarray = field(repr=False)


def synthesize(scn: ArrayScenario, noise_snr_db: float | None = None, seed=None):
    """Measurement tensor and its ground-truth CP model.

    With ``noise_snr_db`` set, white circular complex Gaussian noise is added,
    rescaled so the realized signal-to-noise energy ratio equals the request
    exactly.
    """
    E = scn.steering_matrix()
    G = scn.gain_matrix()
    S = scn.envelope_matrix()
    if np.any(np.linalg.norm(S, axis=0) == 0.0):
        raise DomainError("source envelopes must not be identically zero")
    model = CpModel(np.ones(len(scn.sources)), E, G, S)
    clean = Tensor3(np.einsum("ip,jp,kp->ijk", E, G, S))
    data = clean.data
    if noise_snr_db is not None:
        if not np.isfinite(noise_snr_db):
            raise DomainError("SNR must be finite")
        # independent of the stream scenario_from_dict draws envelopes from
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        shape = data.shape
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        scale = frobenius_norm(clean) / np.linalg.norm(noise) * 10.0 ** (-noise_snr_db / 20.0)
        data = data + scale * noise
    truth = GroundTruth(
        model=model,
        mu_u=coherence(model.U),
        mu_v=coherence(model.V),
        mu_w=coherence(model.W),
        directions=np.stack([s.direction for s in scn.sources]),
        envelopes=S,
    )
    return Tensor3(data), truth


def gaussian_envelope(n: int, rng) -> np.ndarray:
    """Unit-variance circular complex Gaussian series."""
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def sinusoid_envelope(n: int, frequency: float, phase: float = 0.0,
                      amplitude: float = 1.0) -> np.ndarray:
    """``amplitude * exp(1j*(2 pi frequency k + phase))``, frequency in cycles/sample."""
    k = np.arange(n)
    return amplitude * np.exp(1j * (2 * np.pi * frequency * k + phase))


def uniform_linear_sensors(count: int, spacing: float, axis=(1.0, 0.0, 0.0)) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return np.arange(count)[:, None] * spacing * axis[None, :]


# ----------------------------------------------------------------------------
# JSON scenario files


def _envelope_from_spec(spec: dict, n: int, rng) -> np.ndarray:
    kind = spec.get("kind")
    if kind == "gaussian":
        return float(spec.get("amplitude", 1.0)) * gaussian_envelope(n, rng)
    if kind == "sinusoid":
        return sinusoid_envelope(n, float(spec["frequency"]), float(spec.get("phase", 0.0)),
                                 float(spec.get("amplitude", 1.0)))
    if kind == "explicit":
        values = spec["values"]
        env = np.array([complex(re, im) for re, im in values])
        if env.size != n:
            raise DomainError(f"explicit envelope has {env.size} samples, expected {n}")
        return env
    raise DomainError(f"unknown envelope kind {kind!r}")


def scenario_from_dict(obj: dict, seed=None) -> ArrayScenario:
    """Build a scenario; Gaussian envelopes are drawn from ``seed``."""
    n = int(obj["snapshots"])
    rng = np.random.default_rng(seed)
    sources = []
    for src in obj["sources"]:
        rng_value = src.get("range", "farfield")
        R = FARFIELD if rng_value == "farfield" else float(rng_value)
        d = np.asarray(src["direction"], dtype=float)
        sources.append(Source(direction=d / np.linalg.norm(d),
                              envelope=_envelope_from_spec(src["envelope"], n, rng),
                              range=R))
    return ArrayScenario(
        sensors=obj["sensors"],
        translations=obj["translations"],
        sources=tuple(sources),
        omega=float(obj["omega"]),
        celerity=float(obj["celerity"]),
    )


def load_scenario(path, seed=None) -> ArrayScenario:
    return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), seed)


def ground_truth_from_model(model: CpModel, directions) -> GroundTruth:
    """Ground truth rebuilt from a saved model and the true directions.

    Envelopes are recovered as ``lambda_p * u_0p * v_0p * w_p``, exact when
    sensor 0 sits at the origin.
    """
    envelopes = model.W * (model.weights * model.U[0] * model.V[0])[None, :]
    return GroundTruth(
        model=model,
        mu_u=coherence(model.U),
        mu_v=coherence(model.V),
        mu_w=coherence(model.W),
        directions=np.asarray(directions, dtype=float),
        envelopes=envelopes,
    )
