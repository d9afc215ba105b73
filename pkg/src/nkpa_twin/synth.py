"""Synthetic digitizer records for the ON/OFF measurement chain.

Chain per record: correlated envelope pair -> white chain noise -> carrier
modulation at the IF -> analog bandpass -> uniform quantizer.

Envelope samples are a classical stand-in for the measured field. They carry
``vacuum_noise`` extra quanta per mode with the same spectrum as the signal,
which is what makes a non-classical cross moment representable by ordinary
random numbers; ON and OFF records carry the same amount, so it cancels in the
ON/OFF estimators. By default the smallest sufficient amount is used; set
``vacuum_noise=1.0`` for a full quantum of heterodyne noise.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .dsp import convolve_valid, design_fir
from .errors import DomainError, UnphysicalStateError
from .quantum import GaussianTwoModeMoments

TARGET_RMS_FRACTION = 0.15


@dataclass(frozen=True)
class SynthConfig:
    """Source statistics plus the lumped measurement chain.

    ``gamma_c`` is the decay rate (1/s) of the pair correlation
    ``g²(τ) − 1 ∝ e^{−γc|τ|}``; field amplitudes decay at ``γc/2``.
    ``n_added`` is white noise in quanta per envelope sample (bandwidth ``fs``).
    ``line_gain=None`` picks the gain that puts the filtered ON voltage at
    ``TARGET_RMS_FRACTION`` of full scale. ``bw_analog=None`` removes the analog filter.
    ``vacuum_noise=None`` resolves to :func:`minimal_vacuum_noise` of ``moments``.
    """

    moments: GaussianTwoModeMoments
    gamma_c: float = 5.90e6
    n_added: float = 10.0
    line_gain: float | None = None
    f_if: float = 75e6
    f_center: float = 74.6e6
    bw_analog: float | None = 3.88e6
    fs: float = 100e6
    full_scale: float = 0.04
    bits: int = 8
    record_len: int = 2**18
    seed: int = 0
    vacuum_noise: float | None = None
    analog_order: int = 200

    def __post_init__(self):
        if self.bw_analog is not None and not self.fs > 2 * self.bw_analog:
            raise DomainError("fs must exceed twice the analog bandwidth")
        if not 0 < self.f_if < self.fs:
            raise DomainError("f_if must lie in (0, fs)")
        if self.record_len <= 0 or self.record_len % 2:
            raise DomainError("record_len must be a positive even number")
        if self.n_added < 0:
            raise DomainError("n_added must be non-negative")
        if self.line_gain is not None and not self.line_gain > 0:
            raise DomainError("line_gain must be positive")
        if not 2 <= self.bits <= 16:
            raise DomainError("bits must lie in [2, 16]")
        if not self.gamma_c > 0:
            raise DomainError("gamma_c must be positive")
        if self.vacuum_noise is not None and self.vacuum_noise < 0:
            raise DomainError("vacuum_noise must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must fit in 64 bits")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def as_dict(self):
        d = dataclasses.asdict(self)
        m = self.moments
        d["moments"] = {
            "n_a": m.n_a,
            "n_b": m.n_b,
            "m_ab": [complex(m.m_ab).real, complex(m.m_ab).imag],
            "c_ab": [complex(m.c_ab).real, complex(m.c_ab).imag],
        }
        return d

    def digest(self) -> bytes:
        """SHA-256 over every field except the seed."""
        d = self.as_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(blob.encode()).digest()

    def analog_filter(self):
        if self.bw_analog is None:
            return None
        return design_fir(self.analog_order, alias_frequency(self.f_center, self.fs), self.bw_analog, self.fs)

    def resolved_vacuum_noise(self):
        if self.vacuum_noise is not None:
            return self.vacuum_noise
        return minimal_vacuum_noise(self.moments)

    def resolved_line_gain(self):
        if self.line_gain is not None:
            return self.line_gain
        var = expected_voltage_variance(self, 1.0)
        return (TARGET_RMS_FRACTION * self.full_scale) ** 2 / var


def alias_frequency(f, fs):
    return abs(f - fs * round(f / fs))


@dataclass(frozen=True)
class EnvelopePair:
    a: np.ndarray
    b: np.ndarray
    dt: float

    def __len__(self):
        return len(self.a)


@dataclass
class VoltageRecord:
    """One digitized channel. ``samples`` are int codes (or floats before quantization)."""

    samples: np.ndarray
    fs: float
    tag: str
    seed_used: int
    config_hash: bytes
    bits: int = 8

    def __post_init__(self):
        if self.tag not in ("ON", "OFF"):
            raise DomainError(f"tag must be ON or OFF, got {self.tag!r}")

    def __eq__(self, other):
        if not isinstance(other, VoltageRecord):
            return NotImplemented
        return (
            self.fs == other.fs
            and self.tag == other.tag
            and self.seed_used == other.seed_used
            and self.config_hash == other.config_hash
            and self.bits == other.bits
            and self.samples.dtype == other.samples.dtype
            and np.array_equal(self.samples, other.samples)
        )

    def scaled(self, alpha):
        return dataclasses.replace(self, samples=self.samples * alpha)


def envelope_covariance(moments: GaussianTwoModeMoments, vacuum_noise=1.0):
    """Real covariance of ``(Re a, Im a, Re b, Im b)`` for the sampled envelope."""
    v = moments.covariance() - 0.5 * np.eye(4) + vacuum_noise * np.eye(4)
    return 0.5 * v


def minimal_vacuum_noise(moments: GaussianTwoModeMoments):
    """Smallest shared noise (quanta per mode) that makes ``moments`` samplable.

    Zero for classical states; ``√(n(n+1)) − n`` for a two-mode squeezed vacuum.
    """
    normal = moments.covariance() - 0.5 * np.eye(4)
    return max(0.0, -float(np.linalg.eigvalsh(normal).min()))


def _sqrt_psd(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, u = np.linalg.eigh(cov)
        if w.min() < -1e-12 * max(1.0, w.max()):
            raise UnphysicalStateError(
                "moments are not representable by a classical envelope; "
                "raise vacuum_noise"
            ) from None
        return u * np.sqrt(np.clip(w, 0, None))


def synth_envelopes(cfg: SynthConfig, n=None, rng=None) -> EnvelopePair:
    """Stationary complex Gaussian envelopes with exponentially decaying lag moments.

    Discrete Ornstein-Uhlenbeck recursion ``z_{k+1} = ρ z_k + √(1−ρ²) L w_k`` with
    ``ρ = exp(−γc dt / 2)`` and ``L Lᵀ`` the target covariance.
    """
    cfg.moments.check_physical()
    n = cfg.record_len if n is None else n
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    dt = 1.0 / cfg.fs
    L = _sqrt_psd(envelope_covariance(cfg.moments, cfg.resolved_vacuum_noise()))
    rho = math.exp(-0.5 * cfg.gamma_c * dt)
    z = L @ rng.standard_normal((4, n))
    if n > 1:
        z[:, 1:], _ = lfilter(
            [math.sqrt(1.0 - rho * rho)], [1.0, -rho], z[:, 1:], axis=1, zi=rho * z[:, :1]
        )
    return EnvelopePair(z[0] + 1j * z[1], z[2] + 1j * z[3], dt)


def add_chain_noise(pair: EnvelopePair, n_added, line_gain, rng=None) -> EnvelopePair:
    """Add independent white noise of ``n_added`` quanta per mode, then scale by √line_gain."""
    if n_added < 0:
        raise DomainError("n_added must be non-negative")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    a, b = pair.a, pair.b
    if n_added > 0:
        s = math.sqrt(n_added / 2.0)
        w = rng.standard_normal((4, len(pair)))
        a = a + s * (w[0] + 1j * w[1])
        b = b + s * (w[2] + 1j * w[3])
    g = math.sqrt(line_gain)
    if g != 1.0:
        a, b = g * a, g * b
    return EnvelopePair(a, b, pair.dt)


def _carrier(n, f_if, fs):
    idx = np.arange(n, dtype=np.float64)
    phase = 2 * np.pi * np.mod(idx * f_if, fs) / fs
    return np.cos(phase), np.sin(phase)


def upconvert(pair: EnvelopePair, f_if, fs):
    """``V_n = X_n cos(2π f n/fs) + P_n sin(2π f n/fs)`` for both channels.

    At the nominal IF of 0.75 fs the carrier aliases to −fs/4, and this sign
    choice makes translation return ``X + iP`` unchanged.
    """
    c, s = _carrier(len(pair), f_if, fs)
    return pair.a.real * c + pair.a.imag * s, pair.b.real * c + pair.b.imag * s


@dataclass
class ClipStats:
    samples: int = 0
    clipped: int = 0

    @property
    def fraction(self):
        return self.clipped / self.samples if self.samples else 0.0


def quantize(v, full_scale, bits, stats: ClipStats | None = None):
    """Mid-tread quantizer with symmetric clamp at ``±(2^{bits−1} − 1)``."""
    if not 2 <= bits <= 16:
        raise DomainError("bits must lie in [2, 16]")
    half = 2 ** (bits - 1)
    top = half - 1
    raw = np.rint(np.asarray(v, dtype=np.float64) / full_scale * half)
    if stats is not None:
        stats.samples += raw.size
        stats.clipped += int(np.count_nonzero(np.abs(raw) > top))
    return np.clip(raw, -top, top).astype(np.int16)


def lsb(full_scale, bits):
    return full_scale / 2 ** (bits - 1)


def expected_voltage_variance(cfg: SynthConfig, line_gain=None, moments=None):
    """Exact per-channel variance of the pre-quantizer voltage (larger of a, b)."""
    g = cfg.resolved_line_gain() if line_gain is None else line_gain
    m = cfg.moments if moments is None else moments
    colored = max(m.n_a, m.n_b) + cfg.resolved_vacuum_noise()
    f = cfg.analog_filter()
    if f is None:
        return 0.5 * g * (colored + cfg.n_added)
    h = f.taps
    d = np.arange(-(len(h) - 1), len(h))
    acf = np.correlate(h, h, "full")
    rho = math.exp(-0.5 * cfg.gamma_c / cfg.fs)
    carrier = np.cos(2 * np.pi * cfg.f_if / cfg.fs * d)
    colored_gain = float(np.sum(acf * rho ** np.abs(d) * carrier))
    return 0.5 * g * (colored * colored_gain + cfg.n_added * float(np.sum(h * h)))


def buffer_seed(master_seed, index):
    """64-bit seed for buffer ``index``; independent of scheduling order."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _chain(cfg: SynthConfig, moments, seed_used, tag_code, quantized, stats):
    ss = np.random.SeedSequence([seed_used, tag_code])
    env_ss, noise_ss = ss.spawn(2)
    f = cfg.analog_filter()
    pad = 0 if f is None else f.order
    n = cfg.record_len + pad
    tag_cfg = cfg.replace(moments=moments, vacuum_noise=cfg.resolved_vacuum_noise())
    env = synth_envelopes(tag_cfg, n, np.random.default_rng(env_ss))
    # opposite-side LOs invert the idler spectrum relative to the signal
    env = EnvelopePair(env.a, np.conj(env.b), env.dt)
    env = add_chain_noise(env, cfg.n_added, cfg.resolved_line_gain(), np.random.default_rng(noise_ss))
    va, vb = upconvert(env, cfg.f_if, cfg.fs)
    if f is not None:
        va = convolve_valid(f.taps, va)
        vb = convolve_valid(f.taps, vb)
    if quantized:
        return quantize(va, cfg.full_scale, cfg.bits, stats), quantize(vb, cfg.full_scale, cfg.bits, stats)
    return va, vb


def make_record_pair(cfg: SynthConfig, index=0, quantized=True, stats=None, on_moments=None):
    """ON and OFF records of buffer ``index``: ``((on_a, on_b), (off_a, off_b))``.

    OFF keeps the whole chain (vacuum share, chain noise, gain, filters) but
    carries no source photons and no cross moment. ``on_moments`` swaps the
    source of the ON records while leaving the chain as configured.
    """
    seed_used = buffer_seed(cfg.seed, index)
    digest = cfg.digest()
    on_m = cfg.moments if on_moments is None else on_moments
    off_m = GaussianTwoModeMoments(0.0, 0.0)
    out = []
    for tag, code, m in (("ON", 1, on_m), ("OFF", 0, off_m)):
        va, vb = _chain(cfg, m, seed_used, code, quantized, stats)
        out.append(tuple(VoltageRecord(v, cfg.fs, tag, seed_used, digest, cfg.bits) for v in (va, vb)))
    return out[0], out[1]


def measure_quantization_snr(bits, n=65536, cycles=1021, amplitude=None):
    """Spectral SNR (dB) of a quantized full-scale sine.

    ``cycles`` coprime with ``n`` keeps the sampling coherent and spreads the
    quantization error across bins.
    """
    fs_v = 1.0
    half = 2 ** (bits - 1)
    amp = (half - 1) / half * fs_v if amplitude is None else amplitude
    t = np.arange(n)
    v = amp * np.sin(2 * np.pi * cycles * t / n + 0.1)
    codes = quantize(v, fs_v, bits).astype(np.float64) * lsb(fs_v, bits)
    spectrum = np.abs(np.fft.rfft(codes)) ** 2
    signal = spectrum[cycles]
    noise = spectrum[1:].sum() - signal
    return 10 * np.log10(signal / noise)
