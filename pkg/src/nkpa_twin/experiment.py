"""Synthesize, correlate and fit one configuration point in memory."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from .correlator import correlate_buffer, segment_stats
from .dsp import design_fir
from .fitting import fit_decay
from .synth import SynthConfig, make_record_pair


def digital_filter(bandwidth, fs, order=200, center=0.0):
    """Digital FIR on the translated stream (which runs at ``fs / 2``)."""
    return design_fir(order, center, bandwidth, fs / 2.0)


@dataclass(frozen=True)
class BufferJob:
    synth: SynthConfig
    bandwidth: float | None
    fir_order: int = 200
    fir_center: float = 0.0
    max_lag: int = 100
    chunk: int | None = 65536
    quantized: bool = True
    on_moments: object = None
    scale: float = 1.0

    def fir(self):
        if self.bandwidth is None:
            return None
        return digital_filter(self.bandwidth, self.synth.fs, self.fir_order, self.fir_center)


def buffer_moments(job: BufferJob, index: int, fir=None):
    on, off = make_record_pair(job.synth, index, quantized=job.quantized, on_moments=job.on_moments)
    arrays = [r.samples for r in (*on, *off)]
    if job.scale != 1.0:
        arrays = [a * job.scale for a in arrays]
    fir = job.fir() if fir is None else fir
    return correlate_buffer(arrays[:2], arrays[2:], job.synth.fs, fir, job.max_lag, job.chunk)


def _worker(job, index):
    return buffer_moments(job, index)


def run_buffers(job: BufferJob, n_buffers, parallel=1):
    """Per-buffer accumulators in index order; results do not depend on ``parallel``."""
    if parallel <= 1:
        fir = job.fir()
        return [buffer_moments(job, i, fir) for i in range(n_buffers)]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(partial(_worker, job), range(n_buffers)))


def run_point(job: BufferJob, n_buffers, n_segments=10, estimator="rederived", parallel=1):
    accs = run_buffers(job, n_buffers, parallel)
    return segment_stats(accs, n_segments, estimator)


def run_bandwidths(job: BufferJob, bandwidths, n_buffers, n_segments=10, estimator="rederived"):
    """Correlate the same records at several digital bandwidths; ``{bandwidth: result}``."""
    firs = {bw: replace(job, bandwidth=bw).fir() for bw in bandwidths}
    accs = {bw: [] for bw in bandwidths}
    for i in range(n_buffers):
        on, off = make_record_pair(job.synth, i, quantized=job.quantized, on_moments=job.on_moments)
        arrays = [r.samples for r in (*on, *off)]
        for bw, fir in firs.items():
            accs[bw].append(correlate_buffer(arrays[:2], arrays[2:], job.synth.fs, fir, job.max_lag, job.chunk))
    return {bw: segment_stats(a, n_segments, estimator) for bw, a in accs.items()}


def fit_result(result, max_decays=2.0, angular=True):
    """Decay fit of a result's cross-correlation curve with its segment error bars."""
    err = np.where(result.err_ab > 0, result.err_ab, np.nan)
    ok = np.isfinite(err)
    return fit_decay(result.lags[ok], result.g2_ab[ok], err[ok], angular=angular, max_decays=max_decays)
