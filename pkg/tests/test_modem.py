import numpy as np
import pytest

from otfs_xd.channel import (ChannelPath, ChannelRealization, build_block_channel,
                             build_time_channel_dense, sample_channel)
from otfs_xd.modem import (apply_channel, demap_hard, get_constellation, make_frame, map_bits,
                           qam16, qpsk, snr_to_n0)
from otfs_xd.transforms import DimensionError, FrameGeometry, dd_to_time


def test_qpsk_gray_points():
    c = qpsk()
    np.testing.assert_allclose(map_bits([0, 0], c), [(1 + 1j) / np.sqrt(2)])
    np.testing.assert_allclose(map_bits([1, 1], c), [(-1 - 1j) / np.sqrt(2)])
    # Gray: neighbours differ in one bit
    pts = map_bits([0, 0, 0, 1, 1, 1, 1, 0], c)
    for a, b in zip(pts, pts[1:]):
        assert np.isclose(abs(a - b), np.sqrt(2))


@pytest.mark.parametrize("name", ["bpsk", "qpsk", "16qam"])
def test_constellations_unit_energy_and_round_trip(rng, name):
    c = get_constellation(name)
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)
    bits = rng.integers(0, 2, 600 * c.bits_per_symbol)
    np.testing.assert_array_equal(demap_hard(map_bits(bits, c), c), bits)


def test_16qam_gray_neighbours():
    c = qam16()
    tab = c.bit_table()
    d = np.abs(c.points[:, None] - c.points[None, :])
    dmin = d[d > 0].min()
    for a, b in zip(*np.where(np.isclose(d, dmin))):
        assert np.sum(tab[a] != tab[b]) == 1


def test_map_bits_rejects_bad_length():
    with pytest.raises(DimensionError):
        map_bits([0, 1, 1], qpsk())
    with pytest.raises(ValueError):
        get_constellation("8psk")


def test_frame_consistency(rng):
    g = FrameGeometry(4, 3)
    fr = make_frame(g, qpsk(), rng)
    np.testing.assert_allclose(fr.x_dd, map_bits(fr.bits, qpsk()))
    np.testing.assert_allclose(fr.s_time, dd_to_time(fr.x_dd, g))


def test_noiseless_identity_channel(rng):
    g = FrameGeometry(4, 4)
    bc = build_block_channel(ChannelRealization((ChannelPath(1.0, 0, 0),), g))
    s = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    np.testing.assert_array_equal(apply_channel(s, bc, 0.0), s)


def test_apply_channel_matches_dense_oracle(rng):
    g = FrameGeometry(4, 4)
    for seed in range(100):
        ch = sample_channel(g, 3, 3, 1.5, seed)
        s = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        r = apply_channel(s, build_block_channel(ch), 0.0)
        assert np.max(np.abs(r - build_time_channel_dense(ch) @ s)) < 1e-12


def test_noise_statistics(rng):
    g = FrameGeometry(64, 32)
    bc = build_block_channel(ChannelRealization((ChannelPath(1.0, 0, 0),), g))
    r = apply_channel(np.zeros(2048, dtype=complex), bc, 1.0, rng)
    assert np.mean(np.abs(r) ** 2) == pytest.approx(1.0, rel=0.05)
    assert np.var(r.real) == pytest.approx(0.5, rel=0.1)


def test_apply_channel_errors(rng):
    bc = build_block_channel(ChannelRealization((ChannelPath(1.0, 0, 0),), FrameGeometry(2, 2)))
    with pytest.raises(DimensionError):
        apply_channel(np.zeros(3), bc, 0.0)
    with pytest.raises(ValueError):
        apply_channel(np.zeros(4), bc, -1.0, rng)


def test_snr_to_n0():
    assert snr_to_n0(0) == 1.0
    assert snr_to_n0(10) == pytest.approx(0.1)
    assert snr_to_n0(12) == pytest.approx(0.0631, abs=5e-5)
