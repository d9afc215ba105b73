"""Frequency translation and Hann-windowed FIR filtering of digitized records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import windows

from .errors import DomainError, LengthError


@dataclass(frozen=True)
class QuadratureStream:
    """Baseband quadratures at ``fs_effective`` (half the digitizer rate).

    ``t0`` is the time of sample 0 in units of the stream's own sample
    interval, relative to the start of the original record; filtering shifts it
    by the group delay so ON and OFF stay aligned.
    """

    x: np.ndarray
    p: np.ndarray
    fs_effective: float
    t0: float = 0.0

    def __post_init__(self):
        if len(self.x) != len(self.p):
            raise LengthError("x and p must have equal length")

    def __len__(self):
        return len(self.x)

    @property
    def envelope(self):
        return self.x + 1j * self.p

    def power(self):
        """Instantaneous power ``X² + P²``; integer dtype is preserved."""
        return self.x * self.x + self.p * self.p


def _signs(n, start):
    # (-1)^k for absolute pair index k = start .. start+n-1
    return 1 - 2 * ((np.arange(start, start + n)) & 1)


def translate_samples(samples, start_pair=0):
    """Undo the alternating signs of a 4x-oversampled carrier.

    ``start_pair`` is the absolute index of the first (X, P) pair, so streams
    can be translated chunk by chunk.
    """
    v = np.asarray(samples)
    if v.ndim != 1 or len(v) % 2:
        raise LengthError(f"record length must be even, got {v.shape}")
    s = _signs(len(v) // 2, start_pair)
    if not np.issubdtype(v.dtype, np.floating):
        v = v.astype(np.int64)
        s = s.astype(np.int64)
    return v[0::2] * s, -v[1::2] * s


def translate(record, fs=None):
    """Map a record with a carrier at fs/4 (aliased IF) to quadratures.

    Even samples carry ``X (-1)^{n/2}`` and odd samples ``P (-1)^{(n+1)/2}``.
    Accepts a :class:`VoltageRecord` or a bare sample array plus ``fs``.
    """
    samples = getattr(record, "samples", record)
    fs = getattr(record, "fs", fs)
    if fs is None:
        raise DomainError("sample rate required")
    x, p = translate_samples(samples)
    return QuadratureStream(x, p, fs / 2.0)


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    order: int
    center: float
    bandwidth: float
    fs: float

    @property
    def group_delay(self):
        return self.order / 2

    def response(self, freqs):
        """Complex frequency response at ``freqs`` (Hz), phase-referenced to the center tap."""
        k = np.arange(self.order + 1) - self.order / 2
        w = 2 * np.pi * np.atleast_1d(freqs)[:, None] / self.fs
        return (self.taps[None, :] * np.exp(-1j * w * k[None, :])).sum(axis=1)

    def response_db(self, freqs):
        return 20 * np.log10(np.abs(self.response(freqs)))


def _lowpass(cutoff, fs, k):
    fc = cutoff / fs
    return 2 * fc * np.sinc(2 * fc * k)


def design_fir(order=200, center=0.0, bandwidth=0.86e6, fs=50e6):
    """Windowed-sinc bandpass with a Hann window of ``order + 1`` taps.

    ``center = 0`` gives a lowpass passing ``±bandwidth/2`` (the two-sided
    bandwidth of a baseband envelope). Taps are scaled to unit gain at ``center``.
    """
    if order < 2 or order % 2:
        raise DomainError("order must be a positive even integer")
    if not 0 < bandwidth < fs / 2:
        raise DomainError("bandwidth must lie in (0, fs/2)")
    lo = center - bandwidth / 2
    hi = center + bandwidth / 2
    if center < 0 or hi >= fs / 2 or (lo < 0 and center != 0):
        raise DomainError(f"band edges [{lo}, {hi}] Hz invalid for fs={fs}")
    k = np.arange(order + 1) - order / 2
    ideal = _lowpass(hi, fs, k) - _lowpass(lo, fs, k)
    taps = ideal * windows.hann(order + 1, sym=True)
    taps = 0.5 * (taps + taps[::-1])
    f = FirFilter(taps, order, center, bandwidth, fs)
    gain = np.abs(f.response(center))[0]
    return FirFilter(taps / gain, order, center, bandwidth, fs)


def identity_filter(fs):
    """Zero-order pass-through filter."""
    return FirFilter(np.array([1.0]), 0, 0.0, fs / 2, fs)


def convolve_valid(taps, data):
    # np.convolve evaluates every output as a dot over a fixed window, so the
    # value of a sample does not depend on where a chunk boundary falls
    return np.convolve(np.asarray(data, dtype=np.float64), taps, mode="valid")


def filter_stream(f: FirFilter, q: QuadratureStream) -> QuadratureStream:
    """Filter both quadratures and keep only the fully-overlapped region."""
    if len(q) < len(f.taps):
        raise LengthError(f"stream of {len(q)} samples shorter than {len(f.taps)} taps")
    if f.order == 0 and f.taps[0] == 1.0:
        return q
    return QuadratureStream(
        convolve_valid(f.taps, q.x),
        convolve_valid(f.taps, q.p),
        q.fs_effective,
        q.t0 + f.group_delay,
    )


class StreamingFir:
    """Overlap-save FIR that produces exactly the ``valid`` output of the whole stream."""

    def __init__(self, taps):
        self.taps = np.asarray(taps, dtype=np.float64)
        self._hist = np.empty(0)

    def push(self, chunk):
        data = np.concatenate([self._hist, np.asarray(chunk, dtype=np.float64)])
        keep = len(self.taps) - 1
        if len(data) <= keep:
            self._hist = data
            return np.empty(0)
        out = convolve_valid(self.taps, data)
        self._hist = data[len(data) - keep:] if keep else np.empty(0)
        return out
