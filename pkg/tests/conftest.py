import pathlib

import numpy as np
import pytest


def crandn(rng, *shape):
    """Circular complex standard normal draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_stable_matrix(rng, n, radius=0.8):
    """Dense matrix scaled to spectral radius `radius`."""
    A = crandn(rng, n, n)
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    return A * (radius / rho)


def random_eigs(rng, n, radius=0.9, floor=0.05):
    """Eigenvalues uniform in the annulus floor*radius < |z| < radius."""
    mags = radius * np.sqrt(rng.uniform(floor**2, 1.0, n))
    angles = rng.uniform(0.0, 2.0 * np.pi, n)
    return mags * np.exp(1j * angles)


def ut_chol(P):
    """Upper-triangular R with positive diagonal such that P = R R*."""
    n = P.shape[0]
    J = np.eye(n)[::-1]
    L = np.linalg.cholesky(J @ P @ J)
    return J @ L @ J


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def fixture_dir():
    return pathlib.Path(__file__).parent / "data"
