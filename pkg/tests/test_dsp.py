import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nkpa_twin.dsp import (
    QuadratureStream,
    StreamingFir,
    convolve_valid,
    design_fir,
    filter_stream,
    identity_filter,
    translate,
    translate_samples,
)
from nkpa_twin.errors import DomainError, LengthError

FS = 100e6


def test_translate_sign_pattern():
    x, p = translate_samples(np.array([3, 5, 7, 11], dtype=np.int16))
    assert x.tolist() == [3, -7]
    assert p.tolist() == [-5, 11]
    assert x.dtype == np.int64


def test_translate_zero_and_odd():
    q = translate(np.zeros(8), fs=FS)
    assert not q.x.any() and not q.p.any()
    assert q.fs_effective == FS / 2
    with pytest.raises(LengthError):
        translate(np.zeros(7), fs=FS)


def test_translate_recovers_constant_quadratures():
    # V = Re[(X + iP) e^{iωt}] with ω = 2π fs/4, sampled at t = n/fs
    n = np.arange(4096)
    X, P = 0.7, -0.2
    v = np.real((X + 1j * P) * np.exp(1j * np.pi * n / 2))
    q = translate(v, fs=FS)
    assert np.allclose(q.x, X, atol=1e-12)
    assert np.allclose(q.p, P, atol=1e-12)


def test_aliased_75mhz_carrier_translates_like_25mhz():
    n = np.arange(4096)
    A = 0.5
    v = A * np.cos(2 * np.pi * 75e6 * n / FS)
    q = translate(v, fs=FS)
    assert np.allclose(q.x, A, atol=1e-9)
    assert np.allclose(q.p, 0.0, atol=1e-9)


@given(st.integers(1, 40).map(lambda k: 2 * k), st.data())
def test_translate_chunked_equals_whole(n_pairs, data):
    v = data.draw(arrays(np.int16, 2 * n_pairs, elements=st.integers(-127, 127)))
    cut = data.draw(st.integers(0, n_pairs))
    x, p = translate_samples(v)
    x1, p1 = translate_samples(v[: 2 * cut], 0)
    x2, p2 = translate_samples(v[2 * cut:], cut)
    assert np.array_equal(np.concatenate([x1, x2]), x)
    assert np.array_equal(np.concatenate([p1, p2]), p)


def test_nominal_design_properties():
    f = design_fir(200, 25e6, 0.86e6, FS)
    assert np.array_equal(f.taps, f.taps[::-1])
    assert f.group_delay == 100
    assert abs(f.response_db(25e6)[0]) < 0.1
    assert f.response_db(0.0)[0] < -40
    assert f.response_db(FS / 2)[0] < -40


def test_lowpass_design_and_two_tone_rejection():
    f = design_fir(200, 0.0, 0.86e6, 50e6)
    assert abs(f.response_db(0.0)[0]) < 0.1
    # two-sided bandwidth: the band edge sits at bandwidth / 2
    assert f.response_db(0.43e6)[0] == pytest.approx(-6.0, abs=1.0)
    assert f.response_db(3 * 0.86e6)[0] < -40
    fb = design_fir(200, 10e6, 0.86e6, 50e6)
    assert fb.response_db(10e6 + 3 * 0.86e6)[0] < -40


def test_group_delay_from_phase():
    f = design_fir(200, 0.0, 2e6, 50e6)
    # taps are symmetric about the center tap, so the center-referenced response is real
    h = f.response(np.linspace(0, 1e6, 20))
    assert np.max(np.abs(h.imag)) < 1e-12


@pytest.mark.parametrize(
    "kwargs",
    [dict(order=201), dict(order=0), dict(bandwidth=0.0), dict(bandwidth=30e6),
     dict(center=24.9e6, bandwidth=1e6), dict(center=0.2e6, bandwidth=1e6)],
)
def test_invalid_designs(kwargs):
    base = dict(order=200, center=0.0, bandwidth=1e6, fs=50e6)
    base.update(kwargs)
    with pytest.raises(DomainError):
        design_fir(**base)


def test_white_noise_passband_width():
    f = design_fir(200, 0.0, 4e6, 50e6)
    rng = np.random.default_rng(1)
    y = convolve_valid(f.taps, rng.standard_normal(2**18))
    spectrum = np.abs(np.fft.rfft(y[: len(y) // 1024 * 1024].reshape(-1, 1024), axis=1)) ** 2
    psd = spectrum.mean(axis=0)
    freqs = np.fft.rfftfreq(1024, 1 / 50e6)
    half = psd >= psd[0] / 2
    edge = freqs[np.argmin(half)]
    assert edge == pytest.approx(2e6, rel=0.1)


def test_identity_filter_and_short_stream():
    q = QuadratureStream(np.arange(10.0), np.arange(10.0), 50e6)
    assert filter_stream(identity_filter(50e6), q) is q
    with pytest.raises(LengthError):
        filter_stream(design_fir(200, 0.0, 1e6, 50e6), q)


def test_filter_stream_trims_and_tracks_delay():
    f = design_fir(20, 0.0, 5e6, 50e6)
    rng = np.random.default_rng(2)
    q = QuadratureStream(rng.standard_normal(500), rng.standard_normal(500), 50e6)
    out = filter_stream(f, q)
    assert len(out) == 500 - 20
    assert out.t0 == 10


@given(st.lists(st.integers(0, 300), min_size=0, max_size=6))
@settings(max_examples=40)
def test_streaming_fir_matches_whole_convolution(cuts):
    taps = design_fir(40, 0.0, 3e6, 50e6).taps
    data = np.random.default_rng(3).standard_normal(300)
    edges = sorted(set([0, 300] + cuts))
    s = StreamingFir(taps)
    got = np.concatenate([s.push(data[a:b]) for a, b in zip(edges[:-1], edges[1:])])
    assert np.array_equal(got, convolve_valid(taps, data))
