"""``trajalign`` command-line pipeline.

Subcommands, one per stage::

    trajalign synth   --out DIR [--n --d --layers --dim --coupled-layer --noise --seed]
    trajalign encode  --manifest M --out DIR [--outer-folds --inner-folds --alphas --seed --jobs]
    trajalign repsim  --manifest M --predicted P --out DIR [--window --stride --rdm-metric]
    trajalign ltc     --manifest M --out DIR [--window --stride --beta --alpha-penalty ...]
    trajalign report  --out DIR STAGE_DIR...

Exit codes: 0 success, 2 usage, 3 I/O, 4 data/shape, 5 numeric failure.
``TRAJALIGN_OUT`` sets the default output directory.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels, ltc, repsim
from .encoding import DEFAULT_ALPHA_GRID, EncodingConfig, nested_cv_encode
from .errors import InvalidConfig, ShapeMismatch, TrajAlignError
from .ingest import (
    SynthConfig,
    atomic_write_text,
    load_manifest,
    read_tensor,
    write_csv,
    write_synth_dataset,
    write_tensor,
)

log = logging.getLogger("trajalign")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, payload):
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    atomic_write_text(path, text + "\n")


def _out_dir(args):
    out = args.out or os.environ.get("TRAJALIGN_OUT") or "trajalign_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _positive(name, value):
    if value is None or value < 1:
        raise UsageError(f"{name} must be a positive integer, got {value}")


# -- synth -------------------------------------------------------------------------

def cmd_synth(args):
    cfg = SynthConfig(
        n=args.n, d=args.d, layers=args.layers, dim=args.dim,
        coupled_layer=args.coupled_layer, noise_sigma=args.noise, seed=args.seed,
        channels=args.channels,
    )
    if not 0 <= cfg.coupled_layer < cfg.layers:
        raise UsageError(f"--coupled-layer {cfg.coupled_layer} must be in [0, --layers {cfg.layers})")
    if cfg.channels is not None and (cfg.channels < 1 or cfg.d % cfg.channels):
        raise UsageError(f"--channels {cfg.channels} must divide --d {cfg.d}")
    for flag, val in (("--n", cfg.n), ("--d", cfg.d), ("--layers", cfg.layers), ("--dim", cfg.dim)):
        _positive(flag, val)
    if cfg.noise_sigma < 0:
        raise UsageError("--noise must be nonnegative")
    try:
        cfg.validate()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from exc
    manifest = write_synth_dataset(_out_dir(args), cfg)
    log.info("wrote %s", manifest.path)
    return EXIT_OK


# -- encode ---------------------------------------------------------------------------

def _parse_alphas(text):
    if text is None:
        return DEFAULT_ALPHA_GRID
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"--alphas: {exc}") from exc


def cmd_encode(args):
    cfg = EncodingConfig(args.outer_folds, args.inner_folds, _parse_alphas(args.alphas), args.seed)
    try:
        cfg.validate()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from exc
    ds = load_manifest(args.manifest)
    out = _out_dir(args)
    report = nested_cv_encode(ds.embedding, ds.signal, cfg, n_jobs=args.jobs)

    layer_names = ds.manifest.layer_names or [f"layer{i}" for i in range(ds.embedding.layer_count)]
    payload = report.to_dict()
    payload.update({
        "schema": "trajalign.encoding_report/1",
        "manifest": str(args.manifest),
        "n_samples": ds.signal.n_samples,
        "n_features": ds.signal.data.shape[1],
        "layer_names": layer_names,
        "sample_ids": ds.signal.sample_ids,
        "fold_method": "xoshiro256** Fisher-Yates shuffle then contiguous blocks",
        "ridge": "centered features/targets, unpenalized intercept",
        "backend": kernels.BACKEND,
    })
    write_json(out / "encoding_report.json", payload)
    cols = ["layer", "layer_name", "mse", "r", "rsa", "rdm_pearson", "cka"]
    write_csv(out / "encoding_layers.csv", cols,
              [[s["layer"], layer_names[s["layer"]]] + [s[k] for k in cols[2:]] for s in report.layers])
    cell_cols = ["layer", "fold", "alpha", "n_test", "mse", "r", "rsa", "rdm_pearson", "cka", "skipped_columns"]
    write_csv(out / "encoding_cells.csv", cell_cols, [[c[k] for k in cell_cols] for c in report.cells])
    layer = report.best_layer if args.predict_layer is None else args.predict_layer
    if not 0 <= layer < ds.embedding.layer_count:
        raise UsageError(f"--predict-layer {layer} out of range")
    pred = report.predictions[layer].reshape(ds.signal.n_samples, len(ds.signal.channels), ds.signal.n_times)
    write_tensor(out / "predicted.trjl", pred)
    log.info("best layer %d", report.best_layer)
    return EXIT_OK


# -- repsim -------------------------------------------------------------------------------

def _predicted_epochs(path, ds):
    pred = read_tensor(path).astype(np.float64)
    epochs = ds.signal.epochs
    if pred.ndim == 2:
        pred = pred.reshape(epochs.shape) if pred.size == epochs.size else pred
    if pred.shape != epochs.shape:
        raise ShapeMismatch(f"predicted tensor {pred.shape} does not match signal {epochs.shape}")
    return pred


def cmd_repsim(args):
    ds = load_manifest(args.manifest)
    out = _out_dir(args)
    obs_ep = ds.signal.epochs
    pred_ep = _predicted_epochs(args.predicted, ds)
    n = obs_ep.shape[0]
    obs, pred = obs_ep.reshape(n, -1), pred_ep.reshape(n, -1)

    rdm_obs = repsim.compute_rdm(obs, args.rdm_metric)
    rdm_pred = repsim.compute_rdm(pred, args.rdm_metric)
    ids = ds.signal.sample_ids
    for name, rdm in (("rdm_observed.csv", rdm_obs), ("rdm_predicted.csv", rdm_pred)):
        write_csv(out / name, ["sample_id"] + ids, [[sid, *row] for sid, row in zip(ids, rdm.distances)])

    cols = repsim.column_pearsons(pred, obs)
    summary = {
        "schema": "trajalign.repsim_summary/1",
        "manifest": str(args.manifest),
        "predicted": str(args.predicted),
        "mse": repsim.mse(pred, obs),
        "r": float(np.nanmean(cols)) if np.any(np.isfinite(cols)) else None,
        "skipped_columns": int(np.sum(~np.isfinite(cols))),
        "rdm_metric": args.rdm_metric,
        "rsa": _guard(lambda: repsim.rsa_score(rdm_obs, rdm_pred)),
        "rdm_pearson": _guard(lambda: repsim.rdm_pearson(rdm_obs, rdm_pred)),
        "cka": _guard(lambda: repsim.cka(pred, obs)),
        "window": args.window,
        "stride": args.stride,
        "channels": ds.channels,
        "backend": kernels.BACKEND,
    }

    times = [f"t{j}" for j in range(ds.signal.n_times)]
    st = repsim.st_correlation(obs_ep, pred_ep, ds.channels, times)
    write_csv(out / "st_map.csv", ["channel", "time_bin", "r"],
              [[c, t, st.values[i, j]] for i, c in enumerate(st.channels) for j, t in enumerate(st.time_bins)])
    summary["st_skipped_cells"] = [[st.channels[i], st.time_bins[j]] for i, j in st.skipped]
    if ds.coordinates is not None:
        write_csv(out / "channel_coords.csv", ["channel", "x", "y", "z"],
                  [[c, *map(float, xyz)] for c, xyz in zip(ds.channels, ds.coordinates)])

    rows, windows = [], []
    for system, ep in (("observed", obs_ep), ("predicted", pred_ep)):
        for cm in repsim.functional_connectivity(ep, args.window, args.stride, ds.channels):
            if system == "observed":
                windows.append([cm.window_start, cm.window_end])
            for i, a in enumerate(cm.channels):
                for j, b in enumerate(cm.channels):
                    rows.append([system, cm.window_start, cm.window_end, a, b, cm.values[i, j]])
    write_csv(out / "connectivity.csv", ["system", "window_start", "window_end", "row", "col", "value"], rows)
    summary["windows"] = windows
    write_json(out / "repsim_summary.json", summary)
    return EXIT_OK


def _guard(fn):
    try:
        return fn()
    except TrajAlignError as exc:
        log.warning("metric undefined: %s", exc)
        return None


# -- ltc -----------------------------------------------------------------------------------

def _dra_configs(args):
    variants = ("convex", "l2") if args.normalization == "both" else (args.normalization,)
    cfgs = []
    for v in variants:
        cfg = ltc.DraConfig(args.beta, args.alpha_penalty, args.epsilon, v,
                            not args.no_clamp, args.common_dim)
        try:
            cfg.validate()
        except InvalidConfig as exc:
            raise UsageError(str(exc)) from exc
        cfgs.append(cfg)
    return cfgs


def cmd_ltc(args):
    cfgs = _dra_configs(args)
    if args.mi_bins is not None and args.mi_bins < 2:
        raise UsageError("--mi-bins must be at least 2")
    if not args.entropy_alpha > 0:
        raise UsageError("--entropy-alpha must be positive")
    ds = load_manifest(args.manifest)
    out = _out_dir(args)
    E, Ee = ltc.build_trajectory(ds.signal, "time", "sample", args.window, args.stride)
    L, Le = ltc.build_trajectory(ds.embedding, "layer", "sample")
    if ds.manifest.layer_names:
        L.step_labels = list(ds.manifest.layer_names)

    prof = {
        "eeg": ltc.profile_trajectory(E, Ee, args.entropy_alpha, args.mi_bins, args.epsilon),
        "llm": ltc.profile_trajectory(L, Le, args.entropy_alpha, args.mi_bins, args.epsilon),
    }
    traj = {"eeg": E, "llm": L}
    for system, p in prof.items():
        d = p.to_dict()
        d.update({"schema": "trajalign.trajectory_profile/1", "system": system,
                  "axis": traj[system].axis, "step_labels": traj[system].step_labels})
        write_json(out / f"profile_{system}.json", d)

    align = ltc.align_profiles(prof["eeg"], prof["llm"])
    write_json(out / "alignment.json", dict(align.to_dict(), schema="trajalign.alignment_profile/1"))

    dra_out = {"schema": "trajalign.dra_report/1", "variants": {}}
    for cfg in cfgs:
        res = ltc.dra_report(E, L, cfg, Ee, Le)
        dra_out["variants"][cfg.normalization] = res.to_dict()
    if args.predicted:
        pred_ep = _predicted_epochs(args.predicted, ds)
        P, Pe = ltc.build_trajectory(pred_ep, "time", "sample", args.window, args.stride)
        dra_out["encoding_space"] = {
            cfg.normalization: ltc.dra_report(E, P, cfg, Ee, Pe).to_dict() for cfg in cfgs
        }
    dra_out["gaussians"] = "per-step sample mean and covariance from the ensembles, regularized by eps*I"
    dra_out["delta_first_step"] = "first-step difference reuses the second step's difference"
    write_json(out / "dra.json", dra_out)

    rows = []
    for system, p in prof.items():
        for k, v in enumerate(p.pca1):
            rows.append([k, system, traj[system].step_labels[k], v])
    write_csv(out / "pca1.csv", ["step", "system", "label", "pca1"], rows)

    long_rows = []
    for system, p in prof.items():
        for name in ltc.TrajectoryProfile.SERIES:
            for k, v in enumerate(p.series(name)):
                long_rows.append([k, system, name, v if np.isfinite(v) else ""])
    write_csv(out / "series.csv", ["step", "system", "metric", "value"], long_rows)

    config = {
        "window": args.window, "stride": args.stride, "entropy_alpha": args.entropy_alpha,
        "mi_bins": args.mi_bins, "epsilon": args.epsilon,
        "dra": [c.to_dict() for c in cfgs], "manifest": str(args.manifest),
        "predicted": str(args.predicted) if args.predicted else None,
        "backend": kernels.BACKEND,
    }
    write_json(out / "ltc_config.json", config)
    return EXIT_OK


# -- report -------------------------------------------------------------------------------------

STAGE_FILES = {
    "encode": "encoding_report.json",
    "repsim": "repsim_summary.json",
    "ltc_alignment": "alignment.json",
    "ltc_dra": "dra.json",
    "ltc_profile_eeg": "profile_eeg.json",
    "ltc_profile_llm": "profile_llm.json",
}


def cmd_report(args):
    summary = {"schema": "trajalign.report/1", "stages": {}}
    for stage_dir in args.stages:
        for key, name in STAGE_FILES.items():
            path = Path(stage_dir) / name
            if path.exists():
                summary["stages"][key] = json.loads(path.read_text())
    if not summary["stages"]:
        raise FileNotFoundError("no stage outputs found in " + ", ".join(args.stages))
    enc = summary["stages"].get("encode")
    if enc:
        best = enc["best_layer"]
        summary["headline"] = {"best_layer": best, **{k: enc["layers"][best][k] for k in ("mse", "r", "rsa", "cka")}}
    write_json(_out_dir(args) / "report.json", summary)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="trajalign", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, manifest=True):
        if manifest:
            sp.add_argument("--manifest", required=True)
        sp.add_argument("--out", default=None, help="output directory (default $TRAJALIGN_OUT)")

    s = sub.add_parser("synth", help="write a synthetic coupled dataset")
    common(s, manifest=False)
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--d", type=int, default=16)
    s.add_argument("--layers", type=int, default=8)
    s.add_argument("--dim", type=int, default=32)
    s.add_argument("--coupled-layer", type=int, default=3)
    s.add_argument("--noise", type=float, default=0.5)
    s.add_argument("--channels", type=int, default=None,
                   help="signal channels (must divide --d); default: largest divisor <= sqrt(d)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("encode", help="nested-CV layerwise ridge encoding")
    common(e)
    e.add_argument("--outer-folds", type=int, default=5)
    e.add_argument("--inner-folds", type=int, default=5)
    e.add_argument("--alphas", default=None, help="comma-separated ascending ridge penalties")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--predict-layer", type=int, default=None,
                   help="layer whose out-of-fold predictions go to predicted.trjl (default: best)")
    e.set_defaults(func=cmd_encode)

    r = sub.add_parser("repsim", help="RDM/RSA/CKA, channel-time map, connectivity")
    common(r)
    r.add_argument("--predicted", required=True)
    r.add_argument("--window", type=int, default=1)
    r.add_argument("--stride", type=int, default=1)
    r.add_argument("--rdm-metric", choices=("euclidean", "cosine"), default="euclidean")
    r.set_defaults(func=cmd_repsim)

    t = sub.add_parser("ltc", help="latent trajectory comparison and DRA")
    common(t)
    t.add_argument("--predicted", default=None, help="predicted signal tensor for encoding-space DRA")
    t.add_argument("--window", type=int, default=1)
    t.add_argument("--stride", type=int, default=1)
    t.add_argument("--beta", type=float, default=1.0)
    t.add_argument("--alpha-penalty", type=float, default=1.0)
    t.add_argument("--epsilon", type=float, default=1e-8)
    t.add_argument("--normalization", choices=("convex", "l2", "both"), default="convex")
    t.add_argument("--no-clamp", action="store_true")
    t.add_argument("--common-dim", type=int, default=None)
    t.add_argument("--entropy-alpha", type=float, default=1.0)
    t.add_argument("--mi-bins", type=int, default=None)
    t.set_defaults(func=cmd_ltc)

    rp = sub.add_parser("report", help="merge stage outputs into report.json")
    rp.add_argument("stages", nargs="+")
    rp.add_argument("--out", default=None)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"trajalign {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrajAlignError as exc:
        print(f"trajalign {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"trajalign {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"trajalign {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
