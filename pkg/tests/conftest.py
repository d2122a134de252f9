import numpy as np
import pytest

from otfs_xd.transforms import FrameGeometry


def dense_dft(n):
    """Unitary DFT built entry by entry, independent of the library helpers."""
    F = np.empty((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            F[a, b] = np.exp(-2j * np.pi * a * b / n) / np.sqrt(n)
    return F


def dense_dd_transform(geom):
    return np.kron(dense_dft(geom.N), np.eye(geom.M))


def random_complex(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def geom44():
    return FrameGeometry(4, 4)
