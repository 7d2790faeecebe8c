"""Command-line entry point: prepare / train / roc / sweep / simulate / energy / online.

Each run is driven by a JSON config file; ``--set section.key=value`` flags
override individual entries (flags win).  Every output artifact embeds the
sha256 hash of the effective config for provenance.  Exit codes: 0 success,
2 input/data error, 3 training error, 4 evaluation/simulation error.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys

import numpy as np

from . import data, energy, evaluation, hdc, training
from .errors import (ManifestError, TrainingError, UnsupportedCodecError,
                     WavFormatError)
from .frontend import load_wav, resample_linear, segment
from .model import SensorModel
from .pipeline import PipelineConfig, run_stream
from .quantization import quantize_int8

EXIT_DATA_ERROR = 2
EXIT_TRAINING_ERROR = 3
EXIT_EVAL_ERROR = 4

DEFAULT_CONFIG = {
    "paths": {"dataset_root": "dataset", "output_dir": "out"},
    "dataset": {"mode": "synthetic", "n_segments": 400, "p_aoi": 0.1,
                "sample_rate": 22050, "segment_seconds": 1.0, "seed": 0,
                "positive_class": "gun_shot",
                "train_folds": [1, 2, 3, 4, 5, 6, 7, 8],
                "val_folds": [9], "test_folds": [10],
                "oversample_ratio": 0.5},
    "frontend": {"frame_size": 512, "hop": 256},
    "convnet": {"num_layers": 3, "epochs": 8, "lr": 0.01, "batch_size": 32, "seed": 0},
    "hdc": {"dim": 10000, "alpha": 0.05, "seed": 0, "retrain_epochs": 20},
    "pipeline": {"buffer_capacity": 4, "target_fpr": 0.05, "dedupe": True},
    "energy": {"e_edge": 0.05, "e_comm": 2.0, "e_cloud": 8.0, "e_edge_comp": 0.1,
               "compression_ratio": 0.5, "p_aoi": 0.01, "accelerator_factor": 23.6,
               "p_aoi_grid": [0.01, 0.05, 0.1, 0.2]},
    "stream": {"n_segments": 500, "p_aoi": 0.05, "seed": 1, "drift_at": None,
               "drift_carrier_hz": 1200.0, "drift_amplitude": None},
    "sweep": {"thresholds": [round(-1.0 + 0.1 * i, 2) for i in range(21)]},
    "online": {"feedback_period": 100, "feedback_budget": 20, "window": 100},
}


def load_config(path=None, overrides=()):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        with open(path) as f:
            user = json.load(f)
        for section, values in user.items():
            cfg.setdefault(section, {}).update(values)
    for item in overrides:
        key, _, raw = item.partition("=")
        section, _, name = key.partition(".")
        if not name or section not in cfg:
            raise ValueError(f"bad override {item!r}; expected section.key=value")
        cfg[section][name] = json.loads(raw)
    return cfg


def config_hash(cfg) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _out(cfg, name):
    out_dir = os.environ.get("HDSENSE_OUTPUT_DIR", cfg["paths"]["output_dir"])
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _write_summary(cfg, name, payload):
    payload = dict(payload)
    payload["config_hash"] = config_hash(cfg)
    path = _out(cfg, name)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _load_dataset_segments(cfg):
    """Segments per split from the prepared manifest (synthetic or real)."""
    d = cfg["dataset"]
    root = cfg["paths"]["dataset_root"]
    manifest = data.load_manifest(os.path.join(root, "metadata.csv"), root,
                                  positive_class=d["positive_class"])
    plan = data.SplitPlan(train_folds=frozenset(d["train_folds"]),
                          val_folds=frozenset(d["val_folds"]),
                          test_folds=frozenset(d["test_folds"]),
                          oversample_to_ratio=d["oversample_ratio"])
    splits = data.split_manifest(manifest, plan)
    out = []
    for entries in splits:
        segs = []
        for e in entries:
            samples, rate = load_wav(e.path)
            samples = resample_linear(samples, rate, d["sample_rate"])
            seg = segment(samples, d["sample_rate"], d["segment_seconds"],
                          label=e.aoi, source_id=e.path)[0]
            segs.append(seg)
        out.append(segs)
    return tuple(out)


def _stream_segments(cfg):
    s = cfg["stream"]
    d = cfg["dataset"]
    return data.synth_dataset(s["n_segments"], s["p_aoi"], seed=s["seed"],
                              sample_rate=d["sample_rate"],
                              segment_seconds=d["segment_seconds"],
                              drift_at=s["drift_at"],
                              drift_carrier_hz=s["drift_carrier_hz"],
                              drift_amplitude=s.get("drift_amplitude"))


def _train_settings(cfg) -> training.TrainSettings:
    c, h, f, p = cfg["convnet"], cfg["hdc"], cfg["frontend"], cfg["pipeline"]
    return training.TrainSettings(
        num_conv_layers=c["num_layers"], epochs=c["epochs"], lr=c["lr"],
        batch_size=c["batch_size"], conv_seed=c["seed"], dim=h["dim"],
        alpha=h["alpha"], hdc_seed=h["seed"], retrain_epochs=h["retrain_epochs"],
        frame_size=f["frame_size"], hop=f["hop"],
        t_score=p.get("t_score"), target_fpr=p.get("target_fpr"))


def _energy_params(cfg) -> energy.EnergyParams:
    e = cfg["energy"]
    return energy.EnergyParams(e_edge=e["e_edge"], e_comm=e["e_comm"],
                               e_cloud=e["e_cloud"], e_edge_comp=e["e_edge_comp"],
                               compression_ratio=e["compression_ratio"],
                               p_aoi=e["p_aoi"],
                               accelerator_factor=e["accelerator_factor"])


def _load_model(cfg) -> SensorModel:
    path = _out(cfg, "model.bin")
    if not os.path.exists(path):
        raise FileNotFoundError(f"trained model not found at {path}; run `train` first")
    return SensorModel.load(path)


def _pipeline_config(cfg, model: SensorModel) -> PipelineConfig:
    p = cfg["pipeline"]
    return PipelineConfig(scorer=model.score, buffer_capacity=p["buffer_capacity"],
                          t_score=model.t_score, dedupe=p["dedupe"])


def cmd_prepare(cfg) -> int:
    d = cfg["dataset"]
    root = cfg["paths"]["dataset_root"]
    if d["mode"] == "synthetic":
        csv_path = data.write_synth_dataset(
            root, d["n_segments"], d["p_aoi"], seed=d["seed"],
            sample_rate=d["sample_rate"], segment_seconds=d["segment_seconds"],
            positive_class=d["positive_class"])
        print(f"wrote synthetic dataset manifest: {csv_path}")
    else:
        if not os.path.isdir(root):
            print(f"dataset root does not exist: {root}", file=sys.stderr)
            return EXIT_DATA_ERROR
        manifest = data.load_manifest(os.path.join(root, "metadata.csv"), root,
                                      positive_class=d["positive_class"])
        for warning in manifest.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        print(f"validated manifest with {len(manifest)} entries")
    _write_summary(cfg, "prepare_summary.json", {"dataset_root": root,
                                                 "mode": d["mode"]})
    return 0


def cmd_train(cfg) -> int:
    train_segs, val_segs, _ = _load_dataset_segments(cfg)
    d = cfg["dataset"]
    if any(s.label for s in train_segs):
        train_segs = data.oversample(train_segs, d["oversample_ratio"],
                                     seed=d["seed"],
                                     is_positive=lambda s: bool(s.label))
    model, info = training.train_sensor_model(train_segs, _train_settings(cfg),
                                              val_segments=val_segs)
    model.save(_out(cfg, "model.bin"))
    model.net.save(_out(cfg, "convnet.bin"))
    summary = {"val_auc": info.get("val_auc"), "t_score": info["t_score"],
               "retrain_errors": info["retrain_errors"],
               "final_loss": info["loss_history"][-1],
               "num_layers": cfg["convnet"]["num_layers"]}
    _write_summary(cfg, "train_summary.json", summary)
    sweep_csv = _out(cfg, "model_size_sweep.csv")
    new_file = not os.path.exists(sweep_csv)
    with open(sweep_csv, "a") as f:
        if new_file:
            f.write("num_layers,val_auc,config_hash\n")
        f.write(f"{cfg['convnet']['num_layers']},{info.get('val_auc')},{config_hash(cfg)}\n")
    if info.get("val_auc") is not None:
        print(f"validation AUC: {info['val_auc']:.4f}")
    print(f"model saved with t_score={model.t_score:.4f}")
    return 0


def cmd_roc(cfg) -> int:
    model = _load_model(cfg)
    _, _, test_segs = _load_dataset_segments(cfg)
    scores = model.score_batch(test_segs)
    labels = [bool(s.label) for s in test_segs]
    curve = evaluation.roc_curve(scores, labels)
    curve.write_csv(_out(cfg, "roc.csv"), config_hash(cfg))
    _write_summary(cfg, "roc_summary.json", {"auc": curve.auc,
                                             "n_test": len(test_segs)})
    print(f"test AUC: {curve.auc:.4f}")
    return 0


def cmd_simulate(cfg) -> int:
    model = _load_model(cfg)
    segments = _stream_segments(cfg)
    log = run_stream(_pipeline_config(cfg, model), segments)
    log.write_csv(_out(cfg, "stream_log.csv"), config_hash(cfg))
    log.write_summary(_out(cfg, "stream_summary.json"), config_hash(cfg))
    print(f"transmitted {log.transmitted_count}/{log.total_count} segments "
          f"(quality loss {log.quality_loss():.4f})")
    return 0


def cmd_sweep(cfg) -> int:
    model = _load_model(cfg)
    segments = _stream_segments(cfg)
    # scores are threshold-independent, so compute them once for the sweep
    scores = {id(s): sc for s, sc in zip(segments, model.score_batch(segments))}
    pipe_cfg = _pipeline_config(cfg, model)
    pipe_cfg = PipelineConfig(scorer=lambda s: scores[id(s)],
                              buffer_capacity=pipe_cfg.buffer_capacity,
                              t_score=pipe_cfg.t_score, dedupe=pipe_cfg.dedupe)
    points = energy.tradeoff_sweep(pipe_cfg, segments, _energy_params(cfg),
                                   cfg["sweep"]["thresholds"])
    energy.write_tradeoff_csv(_out(cfg, "tradeoff.csv"), points, config_hash(cfg))
    best = max(points, key=lambda p: p.energy_saving if p.quality_loss <= 0.05 else -2)
    _write_summary(cfg, "tradeoff_summary.json",
                   {"n_thresholds": len(points),
                    "best_energy_saving_at_5pct_loss": best.energy_saving,
                    "best_t_score": best.t_score})
    print(f"{len(points)} trade-off points written")
    return 0


def cmd_energy(cfg) -> int:
    model = _load_model(cfg)
    params = _energy_params(cfg)
    s = cfg["stream"]
    d = cfg["dataset"]
    transmitted = {}
    n = s["n_segments"]
    for p_aoi in cfg["energy"]["p_aoi_grid"]:
        segments = data.synth_dataset(n, p_aoi, seed=s["seed"],
                                      sample_rate=d["sample_rate"],
                                      segment_seconds=d["segment_seconds"])
        log = run_stream(_pipeline_config(cfg, model), segments)
        transmitted[p_aoi] = log.transmitted_count
    rows = energy.breakdown_rows(n, transmitted, params)
    energy.write_breakdown_csv(_out(cfg, "energy_breakdown.csv"), rows, config_hash(cfg))
    ours = [r for r in rows if r["method"] == "ours"]
    _write_summary(cfg, "energy_summary.json",
                   {"rows": rows,
                    "energy_saving_by_p_aoi": {str(r["p_aoi"]): 1 - r["normalized_total"]
                                               for r in ours}})
    print(f"energy breakdown written for {len(transmitted)} AoI probabilities")
    return 0


def cmd_online(cfg) -> int:
    model = _load_model(cfg)
    segments = _stream_segments(cfg)
    o = cfg["online"]
    result = evaluation.online_learning_experiment(
        model, segments, feedback_period=o["feedback_period"],
        feedback_budget=o["feedback_budget"],
        buffer_capacity=cfg["pipeline"]["buffer_capacity"], window=o["window"])
    frozen = evaluation.online_learning_experiment(
        model, segments, feedback_period=0, feedback_budget=0,
        buffer_capacity=cfg["pipeline"]["buffer_capacity"], window=o["window"])
    with open(_out(cfg, "online_f1.csv"), "w") as f:
        f.write(f"# config_hash={config_hash(cfg)}\n")
        f.write("segment_index,f1_online,f1_frozen\n")
        for (i, a), (_, b) in zip(result.f1_series, frozen.f1_series):
            f.write(f"{i},{a:.6f},{b:.6f}\n")
    _write_summary(cfg, "online_summary.json",
                   {"feedback_rounds": result.feedback_rounds,
                    "feedback_items": result.feedback_items,
                    "final_f1_online": result.f1_series[-1][1],
                    "final_f1_frozen": frozen.f1_series[-1][1]})
    print(f"online learning: {result.feedback_rounds} feedback rounds, "
          f"final rolling F1 {result.f1_series[-1][1]:.4f} "
          f"(frozen {frozen.f1_series[-1][1]:.4f})")
    return 0


COMMANDS = {
    "prepare": (cmd_prepare, EXIT_DATA_ERROR),
    "train": (cmd_train, EXIT_TRAINING_ERROR),
    "roc": (cmd_roc, EXIT_EVAL_ERROR),
    "sweep": (cmd_sweep, EXIT_EVAL_ERROR),
    "simulate": (cmd_simulate, EXIT_EVAL_ERROR),
    "energy": (cmd_energy, EXIT_EVAL_ERROR),
    "online": (cmd_online, EXIT_EVAL_ERROR),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hdsense",
                                     description="near-sensor audio-of-interest pipeline")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file; defaults apply otherwise")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE",
                        help="override one config entry (JSON-encoded value)")
    parser.add_argument("--layers", type=int,
                        help="shorthand for --set convnet.num_layers=N")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.layers is not None:
            cfg["convnet"]["num_layers"] = args.layers
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    func, failure_code = COMMANDS[args.command]
    try:
        return func(cfg)
    except (FileNotFoundError, ManifestError, WavFormatError,
            UnsupportedCodecError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except TrainingError as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING_ERROR
    except Exception as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return failure_code


if __name__ == "__main__":
    sys.exit(main())
