"""Streaming lagged power moments and the ON/OFF g² estimators.

Lagged sums are defined as ``S_xy[L] = Σ_t n_x(t + L) n_y(t)`` over every ``t``
with both indices inside the stream, so lag ``L`` has ``N − |L|`` terms. Sums
are formed block by block with blocks aligned to absolute sample index, which
makes the result independent of how the stream was chunked.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dsp import FirFilter, StreamingFir, translate_samples
from .errors import AlignmentError, LengthError, PartitionError, SubtractionError

ESTIMATORS = ("paper", "rederived")
BLOCK = 16384
PRODUCTS = ("ab", "aa", "bb")


class _Sum:
    """Neumaier-compensated vector sum; exact for integer dtypes."""

    __slots__ = ("s", "c")

    def __init__(self, s, c=None):
        self.s = s
        self.c = c if c is not None else (None if _is_int(s) else np.zeros_like(s))

    def add(self, v):
        if self.c is None:
            self.s = self.s + v
            return
        t = self.s + v
        big = np.abs(self.s) >= np.abs(v)
        self.c = self.c + np.where(big, (self.s - t) + v, (v - t) + self.s)
        self.s = t

    def value(self):
        if self.c is None:
            return self.s
        return self.s + self.c

    def copy(self):
        return _Sum(np.copy(self.s), None if self.c is None else np.copy(self.c))


def _is_int(a):
    return np.issubdtype(np.asarray(a).dtype, np.integer)


@dataclass
class TagMoments:
    """Raw sums for one tag (ON or OFF)."""

    lagged: dict
    sum_a: _Sum
    sum_b: _Sum
    counts: np.ndarray
    n: int = 0

    @classmethod
    def empty(cls, max_lag, integer):
        dtype = np.int64 if integer else np.float64
        zeros = lambda shape: np.zeros(shape, dtype=dtype)  # noqa: E731
        return cls(
            lagged={k: _Sum(zeros(2 * max_lag + 1)) for k in PRODUCTS},
            sum_a=_Sum(zeros(())),
            sum_b=_Sum(zeros(())),
            counts=np.zeros(2 * max_lag + 1, dtype=np.int64),
        )

    def merged(self, other):
        out = TagMoments(
            lagged={k: self.lagged[k].copy() for k in PRODUCTS},
            sum_a=self.sum_a.copy(),
            sum_b=self.sum_b.copy(),
            counts=self.counts + other.counts,
            n=self.n + other.n,
        )
        for k in PRODUCTS:
            out.lagged[k].add(other.lagged[k].value())
        out.sum_a.add(other.sum_a.value())
        out.sum_b.add(other.sum_b.value())
        return out

    def mean_a(self):
        return float(self.sum_a.value()) / self.n

    def mean_b(self):
        return float(self.sum_b.value()) / self.n

    def lagged_mean(self, key):
        return self.lagged[key].value().astype(np.float64) / self.counts


@dataclass
class MomentAccumulator:
    """Lagged power moments for ON and OFF data on a common lag grid."""

    max_lag: int
    dt: float
    on: TagMoments
    off: TagMoments
    n_buffers: int = 0

    @classmethod
    def empty(cls, max_lag, dt, integer=False):
        return cls(
            max_lag,
            dt,
            TagMoments.empty(max_lag, integer),
            TagMoments.empty(max_lag, integer),
        )

    @property
    def lag_index(self):
        return np.arange(-self.max_lag, self.max_lag + 1)

    @property
    def lags(self):
        return self.lag_index * self.dt

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.max_lag != self.max_lag or other.dt != self.dt:
            raise AlignmentError("accumulators use different lag grids")
        return MomentAccumulator(
            self.max_lag,
            self.dt,
            self.on.merged(other.on),
            self.off.merged(other.off),
            self.n_buffers + other.n_buffers,
        )

    @classmethod
    def merge_all(cls, accs):
        accs = list(accs)
        total = accs[0]
        for acc in accs[1:]:
            total = total.merge(acc)
        return total


class _TagStream:
    """Block-aligned lag accumulation for one tag's pair of power streams."""

    def __init__(self, moments: TagMoments, max_lag, block):
        self.m = moments
        self.M = max_lag
        self.B = block
        self.a = self.b = None
        self.start = -max_lag  # absolute index of buffer element 0
        self.next = 0  # first unprocessed block start
        self.total = 0

    def push(self, pa, pb):
        if len(pa) != len(pb):
            raise AlignmentError("channel a and b chunks differ in length")
        if self.b is None:
            z = np.zeros(self.M, dtype=pa.dtype)
            self.a, self.b = z, z.copy()
        self.a = np.concatenate([self.a, pa])
        self.b = np.concatenate([self.b, pb])
        self.total += len(pa)
        end = self.start + len(self.a)
        while end >= self.next + self.B + self.M:
            self._block(self.B)
        self._trim()

    def finish(self):
        if self.b is None:
            return
        z = np.zeros(self.M, dtype=self.a.dtype)
        self.a = np.concatenate([self.a, z])
        self.b = np.concatenate([self.b, z])
        while self.next < self.total:
            self._block(min(self.B, self.total - self.next))
        counts = self.total - np.abs(np.arange(-self.M, self.M + 1))
        if np.any(counts <= 0):
            raise LengthError(f"stream of {self.total} samples too short for max lag {self.M}")
        self.m.counts = self.m.counts + counts
        self.m.n += self.total

    def _block(self, b):
        lo = self.next - self.M - self.start
        wa = self.a[lo:lo + b + 2 * self.M]
        wb = self.b[lo:lo + b + 2 * self.M]
        ya = wa[self.M:self.M + b]
        yb = wb[self.M:self.M + b]
        va = sliding_window_view(wa, b)
        vb = sliding_window_view(wb, b)
        self.m.lagged["ab"].add(va @ yb)
        self.m.lagged["aa"].add(va @ ya)
        self.m.lagged["bb"].add(vb @ yb)
        self.m.sum_a.add(ya.sum())
        self.m.sum_b.add(yb.sum())
        self.next += b

    def _trim(self):
        drop = self.next - self.M - self.start
        if drop > 0:
            self.a = self.a[drop:]
            self.b = self.b[drop:]
            self.start += drop


class BufferCorrelator:
    """Translate → FIR → power → lagged moments for one ON/OFF buffer, streamed.

    Feed chunks of the four records (ON a, ON b, OFF a, OFF b) with
    :meth:`push`; :meth:`finish` returns the buffer's :class:`MomentAccumulator`.
    With no filter and integer codes the whole path stays in exact int64.
    """

    def __init__(self, fs, fir: FirFilter | None = None, max_lag=100, block=BLOCK, integer=None):
        self.fs_eff = fs / 2.0
        self.fir = fir if fir is not None and fir.order > 0 else None
        self.max_lag = max_lag
        self.block = block
        self.integer = integer
        self._pairs = 0
        self._firs = None
        self._streams = None
        self.acc = None

    def _setup(self, dtype_is_int):
        integer = self.integer if self.integer is not None else (dtype_is_int and self.fir is None)
        self.acc = MomentAccumulator.empty(self.max_lag, 1.0 / self.fs_eff, integer)
        self.acc.n_buffers = 1
        self._streams = {
            "on": _TagStream(self.acc.on, self.max_lag, self.block),
            "off": _TagStream(self.acc.off, self.max_lag, self.block),
        }
        if self.fir is not None:
            self._firs = [StreamingFir(self.fir.taps) for _ in range(8)]
        self._integer = integer

    def push(self, on_a, on_b, off_a, off_b):
        chunks = [np.asarray(c) for c in (on_a, on_b, off_a, off_b)]
        n = len(chunks[0])
        if any(len(c) != n for c in chunks):
            raise AlignmentError("ON/OFF chunks must share one length")
        if n % 2:
            raise LengthError("chunk length must be even")
        if self.acc is None:
            self._setup(all(_is_int(c) for c in chunks))
        powers = []
        for i, c in enumerate(chunks):
            x, p = translate_samples(c, self._pairs)
            if self._firs is not None:
                x = self._firs[2 * i].push(x)
                p = self._firs[2 * i + 1].push(p)
            elif not self._integer:
                x = x.astype(np.float64)
                p = p.astype(np.float64)
            powers.append(x * x + p * p)
        self._pairs += n // 2
        self._streams["on"].push(powers[0], powers[1])
        self._streams["off"].push(powers[2], powers[3])
        return self

    def finish(self) -> MomentAccumulator:
        for s in self._streams.values():
            s.finish()
        return self.acc


def _samples(r):
    return getattr(r, "samples", r)


def correlate_buffer(on_pair, off_pair, fs, fir=None, max_lag=100, chunk=None):
    """Moments of one buffer: ``on_pair``/``off_pair`` are ``(channel a, channel b)``.

    Items may be :class:`~nkpa_twin.synth.VoltageRecord` objects or sample
    arrays (integer codes or pre-quantization voltages).
    """
    arrays = [_samples(r) for r in (*on_pair, *off_pair)]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise AlignmentError("ON and OFF records must have equal length")
    corr = BufferCorrelator(fs, fir, max_lag)
    step = n if chunk is None else chunk
    if step % 2:
        raise LengthError("chunk must be even")
    for s in range(0, n, step):
        corr.push(*(a[s:s + step] for a in arrays))
    return corr.finish()


# --- estimators -------------------------------------------------------------


def _signal_means(acc: MomentAccumulator):
    on_a, on_b = acc.on.mean_a(), acc.on.mean_b()
    off_a, off_b = acc.off.mean_a(), acc.off.mean_b()
    for ch, on, off in (("a", on_a, off_a), ("b", on_b, off_b)):
        if not on - off > 0:
            raise SubtractionError(
                f"channel {ch}: ON mean power {on!r} does not exceed OFF {off!r}",
                on_mean=on,
                off_mean=off,
            )
    return on_a, on_b, off_a, off_b


def g2_cross(acc: MomentAccumulator):
    """Noise-subtracted cross correlation ``g²_ab(τ)`` on the accumulator's lag grid."""
    on_a, on_b, off_a, off_b = _signal_means(acc)
    num = acc.on.lagged_mean("ab") - on_a * off_b - off_a * on_b + off_a * off_b
    return num / ((on_a - off_a) * (on_b - off_b))


def g2_auto(acc: MomentAccumulator, mode="a", estimator="rederived"):
    """Noise-subtracted auto correlation for ``mode`` in ``{"a", "b"}``.

    ``estimator="paper"`` ends the numerator with ``−2⟨nⁿ⟩⟨n_ON⟩``;
    ``"rederived"`` uses ``−2⟨nⁿ⟩⟨nˢ⟩``, which is what the term-by-term
    expansion of the ON moment implies.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    on_a, on_b, off_a, off_b = _signal_means(acc)
    on, off = (on_a, off_a) if mode == "a" else (on_b, off_b)
    key = "aa" if mode == "a" else "bb"
    sig = on - off
    last = on if estimator == "paper" else sig
    num = (
        acc.on.lagged_mean(key)
        - sig * off
        - off * sig
        - acc.off.lagged_mean(key)
        - 2.0 * off * last
    )
    return num / sig**2


def estimate(acc: MomentAccumulator, estimator="rederived"):
    """``(g2_ab, g2_aa, g2_bb)`` arrays for one accumulator."""
    return (
        g2_cross(acc),
        g2_auto(acc, "a", estimator),
        g2_auto(acc, "b", estimator),
    )


COLUMNS = ("lag_s", "g2_ab", "g2_ab_err", "g2_aa", "g2_aa_err", "g2_bb", "g2_bb_err")


@dataclass
class CorrelationResult:
    lags: np.ndarray
    g2_ab: np.ndarray
    g2_aa: np.ndarray
    g2_bb: np.ndarray
    err_ab: np.ndarray
    err_aa: np.ndarray
    err_bb: np.ndarray
    n_buffers: int
    n_segments: int
    estimator: str = "rederived"
    meta: dict = field(default_factory=dict)

    def zero_index(self):
        return int(np.argmin(np.abs(self.lags)))

    def at_zero(self):
        """:class:`CorrelationTriple` at τ = 0 with segment σ."""
        from .quantum import CorrelationTriple

        i = self.zero_index()
        return CorrelationTriple(
            float(self.g2_aa[i]),
            float(self.g2_bb[i]),
            float(self.g2_ab[i]),
            float(self.err_aa[i]),
            float(self.err_bb[i]),
            float(self.err_ab[i]),
        )

    def to_text(self):
        out = io.StringIO()
        header = dict(self.meta)
        header.update(
            estimator=self.estimator,
            n_buffers=self.n_buffers,
            n_segments=self.n_segments,
        )
        for k in sorted(header):
            out.write(f"# {k} = {header[k]}\n")
        out.write("# " + ",".join(COLUMNS) + "\n")
        cols = (self.lags, self.g2_ab, self.err_ab, self.g2_aa, self.err_aa, self.g2_bb, self.err_bb)
        for row in zip(*cols):
            out.write(",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text):
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                body = line[1:].strip()
                if " = " in body:
                    k, v = body.split(" = ", 1)
                    meta[k] = v
                continue
            if line.strip():
                rows.append([float(v) for v in line.split(",")])
        arr = np.array(rows).reshape(-1, len(COLUMNS))
        estimator = meta.pop("estimator", "rederived")
        n_buffers = int(meta.pop("n_buffers", 0))
        n_segments = int(meta.pop("n_segments", 0))
        return cls(
            arr[:, 0], arr[:, 1], arr[:, 3], arr[:, 5], arr[:, 2], arr[:, 4], arr[:, 6],
            n_buffers, n_segments, estimator, meta,
        )


def segment_stats(per_buffer, n_segments=10, estimator="rederived"):
    """Pool per-buffer accumulators and attach segment error bars.

    Buffers are split, in order, into ``n_segments`` equal groups. Each group's
    moments are pooled and turned into g²; the error bar is the sample standard
    deviation of those segment values. The central value is the g² of all
    buffers' moments pooled together.
    """
    per_buffer = list(per_buffer)
    nb = len(per_buffer)
    if n_segments < 1 or nb == 0 or nb % n_segments:
        raise PartitionError(f"{nb} buffers cannot form {n_segments} equal segments")
    size = nb // n_segments
    segs = [
        estimate(MomentAccumulator.merge_all(per_buffer[i * size:(i + 1) * size]), estimator)
        for i in range(n_segments)
    ]
    total = MomentAccumulator.merge_all(per_buffer)
    central = estimate(total, estimator)
    if n_segments > 1:
        errs = [np.std([s[k] for s in segs], axis=0, ddof=1) for k in range(3)]
    else:
        errs = [np.zeros_like(c) for c in central]
    return CorrelationResult(
        total.lags, central[0], central[1], central[2], errs[0], errs[1], errs[2],
        nb, n_segments, estimator,
    )
