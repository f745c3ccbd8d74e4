import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jfsce.errors import BoundaryRangeError, ParameterError
from jfsce.signal_model import (
    QPSK_POINTS, Cir, DelayModel, FrameConfig, NoiseSpec, build_combined_channel, channel_output,
    complex_noise, reference_cir, generate_qpsk, random_sparse_cir, snr_to_noise_var,
)


def direct_output(x, h, boundary):
    """Sample-by-sample sum over the physical channel delayed by ``boundary``."""
    y = np.zeros(len(x), dtype=complex)
    for n in range(len(x)):
        for l, hl in enumerate(h):
            j = n - boundary - l
            if 0 <= j < len(x):
                y[n] += x[j] * hl
    return y


def test_frame_lengths():
    cfg = FrameConfig(M=1000, L=100, NE=148)
    assert cfg.M_tilde == 1247
    assert FrameConfig(M=100, L=5, NE=43, P=10).M_bar == 1047


@pytest.mark.parametrize("kw", [dict(M=0, L=1, NE=1), dict(M=1, L=-1, NE=1), dict(M=1, L=0, NE=0)])
def test_frame_rejects_bad_sizes(kw):
    with pytest.raises(ParameterError):
        FrameConfig(**kw)


def test_reference_support():
    h = build_combined_channel(reference_cir(), 500, 1000)
    assert h.length == 1100
    assert h.support.tolist() == [500, 507, 514, 533, 549, 551, 569, 573, 589, 600]
    assert h.taps[514] == 0.9


def test_zero_delay_and_unit_channel():
    h = Cir(np.array([0.3, -1.0, 0.5j]))
    out = build_combined_channel(h, 0, 6).taps
    np.testing.assert_array_equal(out, np.r_[h.taps, np.zeros(5)])
    np.testing.assert_array_equal(build_combined_channel(Cir(np.array([1.0])), 2, 3).taps, [0, 0, 1])


@pytest.mark.parametrize("boundary", [-1, 1000])
def test_boundary_range(boundary):
    with pytest.raises(BoundaryRangeError):
        build_combined_channel(reference_cir(), boundary, 1000)


def test_delay_model():
    d = DelayModel(D=3 * 100 + 42, M=100)
    assert (d.m, d.boundary) == (3, 42)
    assert d.m * d.M + d.boundary == d.D


def test_impulse_response():
    h = build_combined_channel(reference_cir(), 37, 200)
    x = np.zeros(h.length, dtype=complex)
    x[0] = 1.0
    np.testing.assert_allclose(channel_output(x, h), h.taps, atol=0)


@settings(max_examples=40, deadline=None)
@given(
    L=st.integers(0, 12),
    M=st.integers(1, 40),
    data=st.data(),
)
def test_combined_channel_matches_direct_sum(L, M, data):
    seed = data.draw(st.integers(0, 2**32 - 1))
    boundary = data.draw(st.integers(0, M - 1))
    rng = np.random.default_rng(seed)
    h = Cir(rng.standard_normal(L + 1) + 1j * rng.standard_normal(L + 1))
    htilde = build_combined_channel(h, boundary, M)
    assert htilde.length == M + L
    assert np.count_nonzero(htilde.taps) == np.count_nonzero(h.taps)
    assert np.all(htilde.taps[:boundary] == 0) and np.all(htilde.taps[boundary + L + 1:] == 0)
    x = generate_qpsk(3 * (M + L) + 5, rng)
    y = channel_output(x, htilde)
    assert np.max(np.abs(y - direct_output(x, h.taps, boundary))) < 1e-12


def test_history_is_prefix():
    rng = np.random.default_rng(3)
    h = rng.standard_normal(6) + 0j
    full = generate_qpsk(40, rng)
    whole = channel_output(full, h)
    part = channel_output(full[20:], h, history=full[:20])
    np.testing.assert_allclose(part, whole[20:], atol=1e-14)


def test_noise_variance():
    z = channel_output(np.zeros(100_000), np.zeros(3), NoiseSpec(0.3, seed=5))
    assert abs(np.var(z) - 0.3) < 0.05 * 0.3
    parts = complex_noise(200_000, 2.0, 1)
    assert abs(np.var(parts.real) - 1.0) < 0.02 and abs(np.var(parts.imag) - 1.0) < 0.02


def test_snr_convention():
    assert snr_to_noise_var(20.0) == pytest.approx(0.01)
    assert NoiseSpec.from_snr_db(0.0).variance == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        NoiseSpec(-1.0)


def test_qpsk_properties():
    s = generate_qpsk(4, 9)
    np.testing.assert_allclose(np.abs(s), 1.0)
    np.testing.assert_array_equal(generate_qpsk(50, 7), generate_qpsk(50, 7))
    many = generate_qpsk(100_000, 21)
    for p in QPSK_POINTS:
        assert abs(np.mean(np.isclose(many, p)) - 0.25) < 0.01


def test_random_sparse_cir():
    h = random_sparse_cir(100, 10, 4)
    assert h.L == 100 and h.k == 10
    with pytest.raises(ParameterError):
        random_sparse_cir(5, 7, 0)


def test_cir_is_read_only():
    h = reference_cir()
    with pytest.raises(ValueError):
        h.taps[0] = 1.0
