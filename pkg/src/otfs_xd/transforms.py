"""Time <-> delay-Doppler transforms for OTFS frames.

A frame of ``M * N`` samples is laid out block-major: element ``n = i*M + m``
belongs to time block ``i`` (Doppler axis after the transform) and delay lane
``m``.  The transform ``F_N (x) I_M`` is an N-point DFT along each delay lane,
so everything here works on a ``(N, M)`` reshaped view and never builds the
``MN x MN`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Vector length does not match the frame geometry."""


@dataclass(frozen=True)
class FrameGeometry:
    """Frame size: ``M`` delay bins per block and ``N`` blocks (Doppler bins)."""

    M: int
    N: int

    def __post_init__(self):
        if int(self.M) != self.M or int(self.N) != self.N or self.M < 1 or self.N < 1:
            raise ValueError(f"M and N must be positive integers, got M={self.M}, N={self.N}")

    @property
    def size(self) -> int:
        return self.M * self.N

    def split(self, n: int) -> tuple[int, int]:
        """Return ``(block, lane)`` for flat index ``n``."""
        if not 0 <= n < self.size:
            raise IndexError(n)
        return divmod(n, self.M)


def _lanes(v, geom: FrameGeometry) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != geom.size:
        raise DimensionError(f"expected vector of length {geom.size}, got shape {v.shape}")
    return v.reshape(geom.N, geom.M)


def dd_to_time(x, geom: FrameGeometry) -> np.ndarray:
    """OTFS modulation ``s = (F_N^H (x) I_M) x`` with unitary scaling."""
    X = _lanes(x, geom)
    return np.fft.ifft(X, axis=0, norm="ortho").reshape(-1)


def time_to_dd(r, geom: FrameGeometry) -> np.ndarray:
    """OTFS demodulation ``y = (F_N (x) I_M) r``; exact inverse of :func:`dd_to_time`."""
    R = _lanes(r, geom)
    return np.fft.fft(R, axis=0, norm="ortho").reshape(-1)


def _lane_average(v, geom: FrameGeometry) -> np.ndarray:
    V = _lanes(v, geom).astype(float)
    if np.any(V < 0):
        raise ValueError("variances must be nonnegative")
    avg = V.mean(axis=0)
    return np.broadcast_to(avg, (geom.N, geom.M)).reshape(-1).copy()


def variance_time_to_dd(v, geom: FrameGeometry) -> np.ndarray:
    """Diagonal of ``(F_N (x) I_M) diag(v) (F_N^H (x) I_M)``.

    The DFT mixes all blocks of a delay lane with equal weight ``1/N``, so each
    output entry is the lane mean of ``v``; off-diagonal terms are dropped.
    """
    return _lane_average(v, geom)


def variance_dd_to_time(v, geom: FrameGeometry) -> np.ndarray:
    """Diagonal of ``(F_N^H (x) I_M) diag(v) (F_N (x) I_M)`` (same lane mean)."""
    return _lane_average(v, geom)


def dft_matrix(n: int) -> np.ndarray:
    """Dense unitary DFT matrix; for oracles and tiny instances only."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def dd_transform_matrix(geom: FrameGeometry) -> np.ndarray:
    """Dense ``F_N (x) I_M``; for oracles and tiny instances only."""
    return np.kron(dft_matrix(geom.N), np.eye(geom.M))
