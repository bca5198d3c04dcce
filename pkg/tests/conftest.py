import numpy as np
import pytest

from cohten.array_model import ArrayScenario, Source, gaussian_envelope, uniform_linear_sensors
from cohten.coherence_metrics import coherence

WAVELENGTH = 1.0
OMEGA = 2 * np.pi
CELERITY = 1.0


def random_unit_columns(rng, rows, cols):
    Z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    return Z / np.linalg.norm(Z, axis=0)


def random_orthonormal(rng, rows, cols):
    Z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    return np.linalg.qr(Z)[0]


def low_coherence_columns(rng, rows, cols, cap):
    while True:
        F = random_unit_columns(rng, rows, cols)
        if coherence(F) <= cap:
            return F


def two_source_scenario(rng, snapshots=8):
    """Half-wavelength 4-sensor ULA, 3 subarrays, sources along x and y."""
    sensors = uniform_linear_sensors(4, WAVELENGTH / 2)
    translations = [[0, 0, 0], [WAVELENGTH / 4, 0, 0], [0, WAVELENGTH / 4, 0]]
    sources = (
        Source([1.0, 0.0, 0.0], gaussian_envelope(snapshots, rng)),
        Source([0.0, 1.0, 0.0], gaussian_envelope(snapshots, rng)),
    )
    return ArrayScenario(sensors, translations, sources, OMEGA, CELERITY)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
