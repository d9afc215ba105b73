"""Experiment configuration: INI-style ``[section]`` / ``key = value`` files.

Every key has a default; omitted keys take it. :func:`load_config` resolves
and validates everything up front, reporting problems as
:class:`~nkpa_twin.errors.ConfigError` with a ``section.key`` path.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError, NkpaError
from .quantum import (
    DeviceParams,
    PumpDrive,
    SqueezeParams,
    gain_from_g2_model,
    tms_moments,
)
from .synth import SynthConfig

DESK_SCALE = (50, 2**18)
PAPER_SCALE = (500, 2**21)
SWEEP_KINDS = ("power", "bandwidth", "detuning")
ESTIMATORS = ("paper", "rederived")

# default g²_ab(0) values for the theory table; gains follow from the model at eta
THEORY_G2 = "2.21, 3.0, 4.0, 5.5, 7.5, 9.5, 11.91"


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


def _floats(s):
    return tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _seed(s):
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return v


# section -> key -> (parser, default text)
SCHEMA = {
    "device": {
        "f0": (float, "7.359e9"),
        "kappa_ex": (float, repr(2 * math.pi * 20e6)),
        "kappa_in": (float, repr(2 * math.pi * 2e6)),
        "kerr_K": (float, repr(2 * math.pi * 110e3)),
    },
    "drive": {
        "gain": (float, "1.1"),
        "eta": (float, "0.72"),
        "A1": (float, "0"),
        "A2": (float, "0"),
        "phi1": (float, "0"),
        "phi2": (float, "0"),
        "Delta": (float, repr(2 * math.pi * 57e6)),
        "power": (float, "0"),
    },
    "synth": {
        "n_thermal": (float, "0"),
        "gamma_c": (float, "5.90e6"),
        "n_added": (float, "10"),
        "line_gain": (_opt_float, "none"),
        "f_if": (float, "75e6"),
        "f_center": (float, "74.6e6"),
        "bw_analog": (_opt_float, "3.88e6"),
        "fs": (float, "100e6"),
        "full_scale": (float, "0.04"),
        "bits": (int, "8"),
        "record_len": (int, str(DESK_SCALE[1])),
        "n_buffers": (int, str(DESK_SCALE[0])),
        "vacuum_noise": (_opt_float, "none"),
        "analog_order": (int, "200"),
        "quantized": (_bool, "true"),
    },
    "pipeline": {
        "fir_order": (int, "200"),
        "fir_center": (float, "0"),
        "bandwidth": (float, "3.88e6"),
        "max_lag": (int, "100"),
        "segments": (int, "10"),
        "estimator": (str, "rederived"),
        "chunk": (int, "65536"),
        "fit_max_decays": (_opt_float, "2"),
    },
    "theory": {
        "g2_targets": (_floats, THEORY_G2),
        "n_max": (int, "6"),
    },
    "sweep": {
        "kind": (str, "power"),
        "values": (_floats, "1.05, 1.1, 1.2, 1.4"),
    },
    "run": {
        "seed": (_seed, "0"),
        "out": (str, "out"),
        "parallel": (int, "1"),
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    fir_order: int = 200
    fir_center: float = 0.0
    bandwidth: float = 3.88e6
    max_lag: int = 100
    segments: int = 10
    estimator: str = "rederived"
    chunk: int = 65536
    fit_max_decays: float | None = 2.0


@dataclass(frozen=True)
class SweepConfig:
    kind: str = "power"
    values: tuple = (1.05, 1.1, 1.2, 1.4)


@dataclass(frozen=True)
class ExperimentConfig:
    device: DeviceParams
    drive: PumpDrive | None
    gain: float
    eta: float
    n_thermal: float
    synth: SynthConfig
    n_buffers: int
    quantized: bool
    pipeline: PipelineConfig
    sweep: SweepConfig
    theory_g2: tuple
    n_max: int
    seed: int
    out: str
    parallel: int = 1
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def squeeze(self):
        if self.drive is not None:
            return SqueezeParams.from_drive(self.device, self.drive)
        return SqueezeParams.from_gain(self.gain, self.device.kappa)

    def theory_gains(self):
        return [gain_from_g2_model(g, self.eta) for g in self.theory_g2]

    def with_gain(self, gain):
        """Copy with the source re-derived for a new gain (drive overridden)."""
        moments = tms_moments(SqueezeParams.from_gain(gain).r, self.n_thermal)
        return replace(self, drive=None, gain=gain, synth=self.synth.replace(moments=moments))

    def to_text(self):
        """Canonical INI text of the fully resolved configuration."""
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for k in keys:
                lines.append(f"{k} = {self.raw[sec][k]}")
            lines.append("")
        return "\n".join(lines)


def _parse(parser):
    values = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section")
    for sec, keys in SCHEMA.items():
        got = dict(parser[sec]) if parser.has_section(sec) else {}
        lower = {k.lower(): k for k in keys}
        for k in got:
            if k not in lower:
                raise ConfigError(f"{sec}.{k}", "unknown key")
        values[sec] = {}
        for k, (conv, default) in keys.items():
            text = got.get(k.lower(), default)
            try:
                values[sec][k] = (conv(text), text.strip())
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{sec}.{k}", f"cannot parse {text!r}: {exc}") from None
    return values


def _check(path, ok, message):
    if not ok:
        raise ConfigError(path, message)


def _build(values, overrides):
    v = {sec: {k: val for k, (val, _) in keys.items()} for sec, keys in values.items()}
    raw = {sec: {k: txt for k, (_, txt) in keys.items()} for sec, keys in values.items()}
    for path, value in overrides.items():
        sec, key = path.split(".")
        v[sec][key] = value
        raw[sec][key] = str(value)

    def guarded(path, fn):
        try:
            return fn()
        except (NkpaError, ArithmeticError) as exc:
            raise ConfigError(path, str(exc) or type(exc).__name__) from None

    d = v["device"]
    device = guarded("device", lambda: DeviceParams(d["f0"], d["kappa_ex"], d["kappa_in"], d["kerr_K"]))
    dr = v["drive"]
    _check("drive.eta", 0 < dr["eta"] <= 1, "must lie in (0, 1]")
    pumped = dr["A1"] * dr["A2"] > 0 or dr["power"] > 0
    drive = None
    gain = dr["gain"]
    if pumped:
        drive = guarded("drive", lambda: PumpDrive(
            dr["A1"], dr["A2"], dr["phi1"], dr["phi2"], dr["Delta"], dr["power"]))
        gain = guarded("drive", lambda: SqueezeParams.from_drive(device, drive).gain)
        _check("drive", math.isfinite(gain), "drive produces a non-finite gain")
    _check("drive.gain", gain >= 1, "must be >= 1")

    s = v["synth"]
    _check("synth.n_thermal", s["n_thermal"] >= 0, "must be non-negative")
    _check("synth.n_buffers", s["n_buffers"] >= 1, "must be >= 1")
    moments = guarded("drive.gain", lambda: tms_moments(SqueezeParams.from_gain(gain).r, s["n_thermal"]))
    synth = guarded("synth", lambda: SynthConfig(
        moments=moments,
        gamma_c=s["gamma_c"], n_added=s["n_added"], line_gain=s["line_gain"],
        f_if=s["f_if"], f_center=s["f_center"], bw_analog=s["bw_analog"], fs=s["fs"],
        full_scale=s["full_scale"], bits=s["bits"], record_len=s["record_len"],
        seed=v["run"]["seed"], vacuum_noise=s["vacuum_noise"], analog_order=s["analog_order"],
    ))

    p = v["pipeline"]
    _check("pipeline.estimator", p["estimator"] in ESTIMATORS, f"must be one of {ESTIMATORS}")
    _check("pipeline.fir_order", p["fir_order"] >= 2 and p["fir_order"] % 2 == 0, "must be an even integer >= 2")
    _check("pipeline.bandwidth", 0 < p["bandwidth"] < s["fs"] / 4, "must lie in (0, fs/4)")
    _check("pipeline.max_lag", p["max_lag"] >= 0, "must be non-negative")
    _check("pipeline.max_lag", p["max_lag"] < s["record_len"] // 2 - p["fir_order"], "too large for record_len")
    _check("pipeline.segments", 2 <= p["segments"] <= s["n_buffers"], "must lie in [2, n_buffers]")
    _check("pipeline.chunk", p["chunk"] > 0 and p["chunk"] % 2 == 0, "must be a positive even integer")
    _check("pipeline.fit_max_decays", p["fit_max_decays"] is None or p["fit_max_decays"] > 0, "must be positive")
    pipeline = PipelineConfig(**p)

    sw = v["sweep"]
    _check("sweep.kind", sw["kind"] in SWEEP_KINDS, f"must be one of {SWEEP_KINDS}")
    _check("sweep.values", len(sw["values"]) >= 1, "needs at least one value")
    if sw["kind"] == "power":
        _check("sweep.values", all(g > 1 for g in sw["values"]), "power sweep values are gains and must exceed 1")
    else:
        _check("sweep.values", all(x >= 0 for x in sw["values"]), "must be non-negative")
    if sw["kind"] == "bandwidth":
        _check("sweep.values", all(0 < x < s["fs"] / 4 for x in sw["values"]), "bandwidths must lie in (0, fs/4)")
    sweep = SweepConfig(sw["kind"], sw["values"])

    th = v["theory"]
    _check("theory.g2_targets", all(g > 2 for g in th["g2_targets"]), "model targets must exceed 2")
    _check("theory.n_max", th["n_max"] >= 0, "must be non-negative")
    r = v["run"]
    _check("run.parallel", r["parallel"] >= 1, "must be >= 1")

    return ExperimentConfig(
        device=device, drive=drive, gain=gain, eta=dr["eta"], n_thermal=s["n_thermal"],
        synth=synth, n_buffers=s["n_buffers"], quantized=s["quantized"], pipeline=pipeline,
        sweep=sweep, theory_g2=th["g2_targets"], n_max=th["n_max"],
        seed=r["seed"], out=r["out"], parallel=r["parallel"], raw=raw,
    )


def parse_config(text="", overrides=None):
    """Resolve config ``text`` plus ``{"section.key": value}`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None
    return _build(_parse(parser), dict(overrides or {}))


def load_config(path=None, overrides=None):
    if path is None:
        return parse_config("", overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"{path}: {exc.strerror}") from None
    return parse_config(text, overrides)
