import math

import pytest

from nkpa_twin.config import DESK_SCALE, PAPER_SCALE, load_config, parse_config
from nkpa_twin.errors import ConfigError
from nkpa_twin.quantum import gain_from_g2_model


def test_defaults_resolve():
    cfg = parse_config()
    assert cfg.gain == 1.1 and cfg.eta == 0.72
    assert (cfg.n_buffers, cfg.synth.record_len) == DESK_SCALE
    assert cfg.synth.gamma_c == 5.90e6
    assert cfg.pipeline.estimator == "rederived"
    assert cfg.pipeline.fit_max_decays == 2.0
    assert cfg.drive is None
    assert cfg.squeeze.gain == pytest.approx(1.1)
    assert cfg.synth.moments.n_a == pytest.approx(0.1)


def test_theory_gains_invert_model():
    cfg = parse_config()
    assert cfg.theory_gains()[0] == pytest.approx(gain_from_g2_model(2.21, 0.72))
    assert len(cfg.theory_gains()) == 7


def test_overrides_and_full_size_run():
    ov = {"synth.n_buffers": PAPER_SCALE[0], "synth.record_len": PAPER_SCALE[1], "run.seed": 7}
    cfg = parse_config("", ov)
    assert (cfg.n_buffers, cfg.synth.record_len) == PAPER_SCALE
    assert cfg.seed == 7 and cfg.synth.seed == 7


def test_to_text_roundtrip():
    cfg = parse_config("[drive]\ngain = 1.3\n[synth]\nbw_analog = none\n")
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()


def test_with_gain_rebuilds_source():
    cfg = parse_config().with_gain(1.4)
    assert cfg.gain == 1.4
    assert cfg.synth.moments.n_a == pytest.approx(0.4)


def test_drive_overrides_gain():
    # r = K A1 A2 / kappa = 110 kHz * 100 / 22 MHz = 0.5
    cfg = parse_config("[drive]\nA1 = 10\nA2 = 10\n")
    assert cfg.drive is not None
    assert cfg.squeeze.r == pytest.approx(0.5)
    assert cfg.gain == pytest.approx(math.cosh(0.5) ** 2)


@pytest.mark.parametrize(
    "text, field",
    [
        ("[bogus]\nx = 1\n", "bogus"),
        ("[synth]\nfoo = 1\n", "synth.foo"),
        ("[synth]\nbits = eight\n", "synth.bits"),
        ("[drive]\neta = 1.5\n", "drive.eta"),
        ("[drive]\ngain = 0.9\n", "drive.gain"),
        ("[pipeline]\nestimator = fancy\n", "pipeline.estimator"),
        ("[pipeline]\nsegments = 1\n", "pipeline.segments"),
        ("[pipeline]\nbandwidth = 30e6\n", "pipeline.bandwidth"),
        ("[pipeline]\nfir_order = 201\n", "pipeline.fir_order"),
        ("[sweep]\nkind = power\nvalues = 1.0\n", "sweep.values"),
        ("[sweep]\nkind = phase\n", "sweep.kind"),
        ("[theory]\ng2_targets = 1.5\n", "theory.g2_targets"),
        ("[synth]\nbits = 1\n", "synth"),
        ("[run]\nseed = -1\n", "run.seed"),
        ("[drive]\nA1 = 1e30\nA2 = 1e30\n", "drive"),
        ("not an ini", "<file>"),
    ],
)
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "nope.ini")
    assert info.value.field == "<file>"
