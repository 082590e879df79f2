import numpy as np
import pytest

from steadygrad.bath import BathParams
from steadygrad.redfield import ModelParams


@pytest.fixture
def reference_point():
    """beta=0.1, eta=0.01, omega_c=1, s=3, epsilon=0.1, delta=0.1."""
    return ModelParams(0.1, 0.1, BathParams())


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


def random_density(rng, d=2):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
