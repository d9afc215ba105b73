"""Command line entry point: ``nkpa-twin {theory,synth,correlate,fit,sweep}``."""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .config import DESK_SCALE, PAPER_SCALE, ExperimentConfig, load_config
from .correlator import CorrelationResult, correlate_buffer, segment_stats
from .errors import (
    ConfigError,
    DigestMismatchError,
    NkpaError,
    ProvenanceError,
    UndefinedCorrelationError,
)
from .experiment import BufferJob, digital_filter, fit_result, run_point
from .fitting import detuning_sweep_model, effective_gain
from .quantum import (
    SqueezeParams,
    classical_bound_margin,
    classical_bound_sigma,
    g2_model_gain,
    tms_fock_probs,
    tms_moments,
    wick_g2,
)
from .records import read_records, write_records
from .synth import make_record_pair

MANIFEST = "manifest.txt"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# --- theory -----------------------------------------------------------------


def theory_table(cfg: ExperimentConfig) -> str:
    sq = cfg.squeeze
    lines = [
        f"# kerr_K_rad_s = {cfg.device.kerr_K!r}",
        f"# kappa_rad_s = {cfg.device.kappa!r}",
        f"# drive_epsilon_rad_s = {abs(sq.epsilon)!r}",
        f"# drive_gain = {sq.gain!r}",
        f"# drive_r = {sq.r!r}",
        f"# eta = {cfg.eta!r}",
        f"# n_thermal_input = {cfg.n_thermal!r}",
    ]
    cols = ["label", "gain", "r", "epsilon_rad_s", "model_g2_ab", "wick_g2_ab", "wick_g2_aa",
            "wick_g2_bb", "bound_margin"] + [f"p{n}" for n in range(cfg.n_max + 1)]
    lines.append("# " + ",".join(cols))
    rows = [("zero_drive", 1.0), ("configured", sq.gain)]
    rows += [(f"target_{g!r}", G) for g, G in zip(cfg.theory_g2, cfg.theory_gains())]
    for label, G in rows:
        r = SqueezeParams.from_gain(G).r
        model = g2_model_gain(G, cfg.eta) if G > 1 else "undefined"
        try:
            t = wick_g2(tms_moments(r, cfg.n_thermal))
            wick = [t.g2_ab, t.g2_aa, t.g2_bb, classical_bound_margin(t)]
        except UndefinedCorrelationError:
            wick = ["undefined"] * 4
        probs = tms_fock_probs(r, cfg.n_max)
        vals = [label, G, r, r * cfg.device.kappa, model, *wick, *map(float, probs)]
        lines.append(",".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def cmd_theory(cfg, args):
    text = theory_table(cfg)
    _write(os.path.join(cfg.out, "theory.csv"), text)
    sys.stdout.write(text)
    return 0


# --- synth ------------------------------------------------------------------


def _synth_one(cfg: ExperimentConfig, index):
    on, off = make_record_pair(cfg.synth, index, quantized=True)
    name = f"buffer_{index:05d}.nkpa"
    path = os.path.join(cfg.out, "records", name)
    write_records(path, [*on, *off])
    return index, os.path.join("records", name), on[0].seed_used, _sha256(path)


def cmd_synth(cfg, args):
    os.makedirs(os.path.join(cfg.out, "records"), exist_ok=True)
    if cfg.parallel > 1:
        with ProcessPoolExecutor(cfg.parallel) as pool:
            entries = list(pool.map(_synth_one, [cfg] * cfg.n_buffers, range(cfg.n_buffers)))
    else:
        entries = [_synth_one(cfg, i) for i in range(cfg.n_buffers)]
    head = [
        f"config_digest = {cfg.synth.digest().hex()}",
        f"master_seed = {cfg.seed}",
        f"n_buffers = {cfg.n_buffers}",
        f"record_len = {cfg.synth.record_len}",
        f"fs = {cfg.synth.fs!r}",
        "# index,file,seed,sha256",
    ]
    body = [f"{i},{p},{s},{h}" for i, p, s, h in entries]
    _write(os.path.join(cfg.out, MANIFEST), "\n".join(head + body) + "\n")
    _write(os.path.join(cfg.out, "config.ini"), cfg.to_text())
    print(f"wrote {len(entries)} buffers to {os.path.join(cfg.out, 'records')}")
    return 0


# --- correlate --------------------------------------------------------------


def read_manifest(path):
    meta, entries = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if " = " in line:
                k, v = line.split(" = ", 1)
                meta[k] = v
            else:
                i, f, s, h = line.split(",")
                entries.append((int(i), f, int(s), h))
    return meta, entries


def load_buffer(root, entry, digest):
    """Records of one manifest entry as ``((on_a, on_b), (off_a, off_b))``."""
    index, rel, seed, sha = entry
    path = os.path.join(root, rel)
    if _sha256(path) != sha:
        raise ProvenanceError(f"{path}: contents do not match manifest checksum")
    try:
        recs = read_records(path, expected_digest=digest)
    except DigestMismatchError as exc:
        raise ProvenanceError(f"{path}: {exc}") from None
    on = [r for r in recs if r.tag == "ON"]
    off = [r for r in recs if r.tag == "OFF"]
    if len(on) != 2 or len(off) != 2:
        raise ProvenanceError(f"{path}: need 2 ON and 2 OFF records, found {len(on)} ON and {len(off)} OFF")
    if any(r.seed_used != seed for r in recs):
        raise ProvenanceError(f"{path}: record seed differs from manifest")
    return tuple(on), tuple(off)


def correlate_dir(cfg: ExperimentConfig, root, estimators):
    meta, entries = read_manifest(os.path.join(root, MANIFEST))
    digest = cfg.synth.digest()
    if meta.get("config_digest") != digest.hex():
        raise ProvenanceError(
            f"records in {root} were made with config digest {meta.get('config_digest')}, "
            f"current config has {digest.hex()}"
        )
    if meta.get("master_seed") != str(cfg.seed):
        raise ProvenanceError(
            f"records in {root} were made with master seed {meta.get('master_seed')}, "
            f"current config has {cfg.seed}"
        )
    p = cfg.pipeline
    fir = digital_filter(p.bandwidth, cfg.synth.fs, p.fir_order, p.fir_center)
    accs = []
    for entry in entries:
        on, off = load_buffer(root, entry, digest)
        accs.append(correlate_buffer(on, off, cfg.synth.fs, fir, p.max_lag, p.chunk))
    out = {}
    for est in estimators:
        res = segment_stats(accs, p.segments, est)
        res.meta.update(
            config_digest=digest.hex(), master_seed=meta.get("master_seed"),
            bandwidth_hz=repr(p.bandwidth), fir_order=p.fir_order,
        )
        out[est] = res
    return out


def _estimators(args, cfg):
    if args.estimator == "both":
        return ("rederived", "paper")
    return (args.estimator or cfg.pipeline.estimator,)


def cmd_correlate(cfg, args):
    root = args.records or cfg.out
    ests = _estimators(args, cfg)
    results = correlate_dir(cfg, root, ests)
    for est, res in results.items():
        name = "correlation.csv" if len(ests) == 1 else f"correlation_{est}.csv"
        _write(os.path.join(cfg.out, name), res.to_text())
        t = res.at_zero()
        print(f"{est}: g2_ab(0) = {t.g2_ab:.4f} +- {t.sigma_ab:.4f}, "
              f"margin = {classical_bound_margin(t):.4f} +- {classical_bound_sigma(t):.4f}")
    return 0


# --- fit --------------------------------------------------------------------

FIT_COLUMNS = ("source", "gamma_c_per_s", "gamma_c_hz", "pair_rate_R", "ratio",
               "sigma_gamma_c", "sigma_R", "residual_norm")


def fit_summary_row(source, f):
    vals = (source, f.gamma_c, f.gamma_c_hz, f.pair_rate_R, f.ratio,
            f.sigma_gamma_c, f.sigma_R, f.residual_norm)
    return ",".join(_fmt(v) for v in vals)


def cmd_fit(cfg, args):
    inputs = args.input or [os.path.join(cfg.out, "correlation.csv")]
    reports, rows = [], ["# " + ",".join(FIT_COLUMNS)]
    for path in inputs:
        with open(path, encoding="utf-8") as fh:
            res = CorrelationResult.from_text(fh.read())
        f = fit_result(res, cfg.pipeline.fit_max_decays)
        reports.append(f"[{os.path.basename(path)}]\n" + f.report())
        rows.append(fit_summary_row(os.path.basename(path), f))
    _write(os.path.join(cfg.out, "fit_report.txt"), "\n".join(reports))
    _write(os.path.join(cfg.out, "fit_summary.csv"), "\n".join(rows) + "\n")
    sys.stdout.write("\n".join(reports))
    return 0


# --- sweep ------------------------------------------------------------------

SWEEP_COLUMNS = ("kind", "value", "gain", "bandwidth_hz", "g2_ab0", "g2_ab0_err", "g2_aa0",
                 "g2_bb0", "bound_margin", "bound_sigma", "gamma_c_per_s", "pair_rate_R",
                 "ratio", "model_g2_ab0", "status")


def point_seed(master, index):
    """Per-point master seed; depends only on the point's position in the list."""
    ss = np.random.SeedSequence([int(master), 0x5EED, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _point_config(cfg: ExperimentConfig, index, value):
    """(config, digital bandwidth, model g² label) for one sweep point."""
    kind = cfg.sweep.kind
    bw = cfg.pipeline.bandwidth
    if kind == "power":
        pc = cfg.with_gain(value)
        model = g2_model_gain(value, cfg.eta)
    elif kind == "bandwidth":
        # every bandwidth looks at the same synthetic source
        pc, bw = cfg, value
        model = g2_model_gain(cfg.gain, cfg.eta) if cfg.gain > 1 else float("nan")
    else:
        pc = cfg.with_gain(effective_gain(value, cfg.gain, cfg.device.kappa))
        model = float(detuning_sweep_model([value], cfg.gain, cfg.eta, cfg.device.kappa)[0])
    if kind != "bandwidth":
        pc = replace(pc, synth=pc.synth.replace(seed=point_seed(cfg.seed, index)))
    return pc, bw, model


def sweep_point(cfg: ExperimentConfig, index, value, estimator):
    base = [cfg.sweep.kind, value]
    try:
        pc, bw, model = _point_config(cfg, index, value)
        p = cfg.pipeline
        job = BufferJob(pc.synth, bw, p.fir_order, p.fir_center, p.max_lag, p.chunk, cfg.quantized)
        res = run_point(job, cfg.n_buffers, p.segments, estimator)
        t = res.at_zero()
        f = fit_result(res, p.fit_max_decays)
        vals = base + [pc.gain, bw, t.g2_ab, t.sigma_ab, t.g2_aa, t.g2_bb,
                       classical_bound_margin(t), classical_bound_sigma(t),
                       f.gamma_c, f.pair_rate_R, f.ratio, model, "ok"]
    except (NkpaError, ArithmeticError) as exc:
        msg = f"error {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        vals = base + [""] * (len(SWEEP_COLUMNS) - 3) + [msg]
    return ",".join(_fmt(v) for v in vals)


def sweep_table(cfg: ExperimentConfig, estimator=None):
    est = estimator or cfg.pipeline.estimator
    values = cfg.sweep.values
    n = len(values)
    if cfg.parallel > 1 and n > 1:
        with ProcessPoolExecutor(min(cfg.parallel, n)) as pool:
            rows = list(pool.map(sweep_point, [cfg] * n, range(n), values, [est] * n))
    else:
        rows = [sweep_point(cfg, i, v, est) for i, v in enumerate(values)]
    head = [f"# kind = {cfg.sweep.kind}", f"# estimator = {est}", f"# master_seed = {cfg.seed}"]
    if cfg.sweep.kind == "detuning":
        head.append("# model_g2_ab0 uses a Lorentzian-scaled gain (extrapolation model)")
    head.append("# " + ",".join(SWEEP_COLUMNS))
    return "\n".join(head + rows) + "\n"


def cmd_sweep(cfg, args):
    est = None if args.estimator in (None, "both") else args.estimator
    text = sweep_table(cfg, est)
    _write(os.path.join(cfg.out, f"sweep_{cfg.sweep.kind}.csv"), text)
    sys.stdout.write(text)
    return 0


# --- entry ------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--paper-scale", action="store_true",
                        help=f"{PAPER_SCALE[0]} buffers of {PAPER_SCALE[1]} samples "
                             f"instead of {DESK_SCALE[0]} x {DESK_SCALE[1]}")
    common.add_argument("--estimator", choices=("paper", "rederived", "both"))
    common.add_argument("--parallel", type=int, metavar="N")
    p = argparse.ArgumentParser(prog="nkpa-twin", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("theory", parents=[common], help="closed-form table")
    sub.add_parser("synth", parents=[common], help="write ON/OFF record files")
    c = sub.add_parser("correlate", parents=[common], help="correlate record files")
    c.add_argument("--records", help="directory holding manifest.txt (default: --out)")
    f = sub.add_parser("fit", parents=[common], help="fit correlation files")
    f.add_argument("input", nargs="*", help="correlation files (default: OUT/correlation.csv)")
    sub.add_parser("sweep", parents=[common], help="run the configured sweep")
    return p


COMMANDS = {"theory": cmd_theory, "synth": cmd_synth, "correlate": cmd_correlate,
            "fit": cmd_fit, "sweep": cmd_sweep}


def overrides_from_args(args):
    ov = {}
    if args.seed is not None:
        ov["run.seed"] = args.seed
    if args.out is not None:
        ov["run.out"] = args.out
    if args.parallel is not None:
        ov["run.parallel"] = args.parallel
    if args.estimator in ("paper", "rederived"):
        ov["pipeline.estimator"] = args.estimator
    if args.paper_scale:
        ov["synth.n_buffers"], ov["synth.record_len"] = PAPER_SCALE
    return ov


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides_from_args(args))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NkpaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
