import numpy as np

from nkpa_twin.experiment import BufferJob, digital_filter, fit_result, run_bandwidths, run_buffers, run_point
from nkpa_twin.quantum import tms_vacuum_moments
from nkpa_twin.synth import SynthConfig

CFG = SynthConfig(moments=tms_vacuum_moments(0.1), record_len=8192, n_added=1.0)


def test_digital_filter_runs_at_half_rate():
    f = digital_filter(3.88e6, 100e6)
    assert f.fs == 50e6 and f.center == 0.0 and f.order == 200


def test_parallel_matches_serial():
    job = BufferJob(CFG, 3.88e6, max_lag=20)
    serial = run_buffers(job, 3)
    para = run_buffers(job, 3, parallel=2)
    for s, p in zip(serial, para):
        assert np.array_equal(s.on.lagged["ab"].value(), p.on.lagged["ab"].value())
        assert np.array_equal(s.off.lagged["aa"].value(), p.off.lagged["aa"].value())


def test_shared_records_match_separate_runs():
    job = BufferJob(CFG, None, max_lag=20)
    both = run_bandwidths(job, (3.88e6, 0.86e6), 4, 2)
    for bw, res in both.items():
        alone = run_point(BufferJob(CFG, bw, max_lag=20), 4, 2)
        assert np.array_equal(res.g2_ab, alone.g2_ab)
        assert np.array_equal(res.err_bb, alone.err_bb)


def test_fit_result_uses_segment_errors():
    res = run_point(BufferJob(CFG.replace(n_added=0.0), 3.88e6, max_lag=60), 4, 2)
    f = fit_result(res, 2.0)
    assert f.gamma_c > 0 and f.pair_rate_R > 0
