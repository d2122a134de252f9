"""Constellations, OTFS framing and the AWGN time-domain channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import BlockChannel
from .transforms import DimensionError, FrameGeometry, dd_to_time


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-energy symbol alphabet with a bijective bit labelling.

    ``labels[j]`` is the integer whose ``bits_per_symbol`` MSB-first bits map
    to ``points[j]``.
    """

    name: str
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        q = len(self.points)
        bps = int(round(np.log2(q)))
        if 2 ** bps != q:
            raise ValueError("constellation size must be a power of two")
        if sorted(int(v) for v in self.labels) != list(range(q)):
            raise ValueError("labels must be a bijection onto 0..2^b-1")
        energy = np.mean(np.abs(self.points) ** 2)
        if not np.isclose(energy, 1.0, atol=1e-12):
            raise ValueError(f"average symbol energy is {energy}, expected 1")

    @property
    def bits_per_symbol(self) -> int:
        return int(round(np.log2(len(self.points))))

    @property
    def size(self) -> int:
        return len(self.points)

    def bit_table(self) -> np.ndarray:
        """``(|A|, b)`` array of the bit pattern of each point."""
        b = self.bits_per_symbol
        shifts = np.arange(b - 1, -1, -1)
        return ((self.labels[:, None] >> shifts) & 1).astype(np.uint8)

    def index_of_label(self) -> np.ndarray:
        inv = np.empty(self.size, dtype=int)
        inv[self.labels] = np.arange(self.size)
        return inv


def qpsk() -> Constellation:
    # Gray: first bit -> sign of I, second bit -> sign of Q; 0 -> +
    labels = np.array([0b00, 0b01, 0b10, 0b11])
    pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
    return Constellation("qpsk", pts, labels)


def bpsk() -> Constellation:
    return Constellation("bpsk", np.array([1.0 + 0j, -1.0 + 0j]), np.array([0, 1]))


def qam16() -> Constellation:
    # per-axis Gray 2-bit mapping 00->+3, 01->+1, 11->-1, 10->-3
    axis = {0b00: 3, 0b01: 1, 0b11: -1, 0b10: -3}
    labels, pts = [], []
    for hi, re in axis.items():
        for lo, im in axis.items():
            labels.append((hi << 2) | lo)
            pts.append(re + 1j * im)
    return Constellation("16qam", np.array(pts) / np.sqrt(10), np.array(labels))


CONSTELLATIONS = {"qpsk": qpsk, "bpsk": bpsk, "16qam": qam16}


def get_constellation(name: str) -> Constellation:
    try:
        return CONSTELLATIONS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; choose from {sorted(CONSTELLATIONS)}") from None


def map_bits(bits, const: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    b = const.bits_per_symbol
    if bits.ndim != 1 or bits.size % b:
        raise DimensionError(f"bit vector length {bits.size} not a multiple of {b}")
    weights = 1 << np.arange(b - 1, -1, -1)
    labels = bits.reshape(-1, b) @ weights
    return const.points[const.index_of_label()[labels]]


def hard_indices(symbols, const: Constellation) -> np.ndarray:
    """Nearest-point index for each symbol."""
    d = np.abs(np.asarray(symbols)[:, None] - const.points[None, :])
    return np.argmin(d, axis=1)


def demap_hard(symbols, const: Constellation) -> np.ndarray:
    """Minimum-distance decisions converted back to bits."""
    return const.bit_table()[hard_indices(symbols, const)].reshape(-1)


@dataclass(frozen=True, eq=False)
class TxFrame:
    bits: np.ndarray
    x_dd: np.ndarray
    s_time: np.ndarray


def make_frame(geom: FrameGeometry, const: Constellation, rng) -> TxFrame:
    bits = rng.integers(0, 2, size=geom.size * const.bits_per_symbol, dtype=np.uint8)
    x = map_bits(bits, const)
    return TxFrame(bits, x, dd_to_time(x, geom))


def complex_noise(shape, N0: float, rng) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with variance ``N0`` per sample."""
    return np.sqrt(N0 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(s, blocks: BlockChannel, N0: float, rng=None) -> np.ndarray:
    """``r_i = H^{i,0} s_i + H^{i,1} s_{(i-1) mod N} + n_i`` for every block."""
    if N0 < 0:
        raise ValueError("N0 must be nonnegative")
    s = np.asarray(s)
    if s.shape != (blocks.geom.size,):
        raise DimensionError(f"expected length {blocks.geom.size}, got {s.shape}")
    r = blocks.apply(s)
    if N0 > 0:
        if rng is None:
            raise ValueError("rng required when N0 > 0")
        r = r + complex_noise(r.shape, N0, rng)
    return r


def snr_to_n0(es_over_n0_db: float) -> float:
    """Noise density for unit-energy symbols at the given Es/N0 in dB."""
    return float(10.0 ** (-es_over_n0_db / 10.0))
