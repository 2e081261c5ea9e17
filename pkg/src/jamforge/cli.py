"""Command-line front end.

Subcommands: spectrogram, gen-dataset, train, eval, flops.  Exit codes:
0 success, 1 I/O or persisted-format failures, 2 usage errors, 3
numeric failures (divergence, non-finite gradients).

Every run prints its fully resolved configuration as JSON and writes
the same document as a run manifest next to its outputs, so any output
can be traced back to the exact settings that produced it.  Outputs are
bit-reproducible given identical flags and inputs; the --threads knob
(or JAMFORGE_THREADS) only parallelizes dataset generation and never
changes bytes.

Config files are INI-style: flat key=value lines under [dataset],
[gnss], [cwd] and [train] sections.  Unknown sections or keys are
rejected.  Command-line flags override config-file values.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .cwd import CwdConfig, write_pgm, write_raw_f32
from .dataset import (
    FORMAT_VERSION,
    MANIFEST_NAME,
    PAYLOAD_NAME,
    DatasetConfig,
    DatasetFormatError,
    config_to_dict,
    generate_dataset,
    load_dataset,
    make_sample,
    sample_seed,
    split_dataset,
)
from .model import (
    TrainConfig,
    TrainingDiverged,
    build_classifier,
    evaluate,
    fuse_model,
    predict,
    preset_config,
    report_complexity,
    train,
    write_confusion_csv,
    write_group_csv,
    write_metrics_csv,
    write_trace_csv,
)
from .nn import CheckpointError, count_flops, count_params, load_checkpoint, save_checkpoint
from .signals import NUM_CLASSES, GnssParams

_CONFIG_SCHEMA = {
    "dataset": {
        "classes": ("int_tuple", "classes"),
        "jnr_grid_db": ("float_tuple", "jnr_grid_db"),
        "pr_db": ("pr", "pr_db"),
        "samples_per_class_per_jnr": ("int", "samples_per_class_per_jnr"),
        "master_seed": ("int", "master_seed"),
        "n": ("int", "n"),
        "fs": ("float", "fs"),
        "fc_range_hz": ("float_tuple", "fc_range_hz"),
        "bandwidth_range_hz": ("float_tuple", "bandwidth_range_hz"),
        "mtj_tone_count_range": ("int_tuple", "mtj_tone_count_range"),
        "mtj_min_spacing_hz": ("float", "mtj_min_spacing_hz"),
        "ppnj_periods_range": ("int_tuple", "ppnj_periods_range"),
        "ppnj_duty_range": ("float_tuple", "ppnj_duty_range"),
    },
    "gnss": {f.name: ("int" if f.name == "prn" else "float", f.name)
             for f in dataclasses.fields(GnssParams)},
    "cwd": {f.name: ("float" if f.name == "sigma" else "int", f.name)
            for f in dataclasses.fields(CwdConfig)},
    "train": {
        "epochs": ("int", "epochs"),
        "batch_size": ("int", "batch_size"),
        "lr": ("float", "lr"),
        "seed": ("int", "seed"),
    },
}


def _coerce(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "int_tuple":
        return tuple(int(v.strip()) for v in raw.split(",") if v.strip())
    if kind == "float_tuple":
        return tuple(float(v.strip()) for v in raw.split(",") if v.strip())
    if kind == "pr":
        vals = tuple(float(v.strip()) for v in raw.split(",") if v.strip())
        return vals[0] if len(vals) == 1 else vals
    raise AssertionError(kind)


def load_config_file(path) -> dict:
    """Parse and validate a config file into per-section override dicts."""
    cp = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as f:
        cp.read_file(f, source=str(path))
    overrides: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _CONFIG_SCHEMA:
            raise ValueError(f"{path}: unknown config section [{section}]; "
                             f"valid sections: {sorted(_CONFIG_SCHEMA)}")
        schema = _CONFIG_SCHEMA[section]
        out = {}
        for key, raw in cp.items(section):
            if key not in schema:
                raise ValueError(f"{path}: unknown key {key!r} in [{section}]; "
                                 f"valid keys: {sorted(schema)}")
            kind, field_name = schema[key]
            try:
                out[field_name] = _coerce(kind, raw)
            except ValueError as e:
                raise ValueError(f"{path}: bad value for {section}.{key}: {e}") from e
        overrides[section] = out
    return overrides


def dataset_config_from(overrides: dict, **direct) -> DatasetConfig:
    ds = dict(overrides.get("dataset", {}))
    ds.update({k: v for k, v in direct.items() if v is not None})
    gnss = GnssParams(**overrides.get("gnss", {}))
    cwd_cfg = CwdConfig(**overrides.get("cwd", {}))
    return DatasetConfig(gnss=gnss, cwd=cwd_cfg, **ds)


def _emit_manifest(doc: dict, path=None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text + "\n")


def _refuse_existing(paths, force: bool) -> None:
    existing = [str(p) for p in paths if os.path.exists(p)]
    if existing and not force:
        raise FileExistsError(f"refusing to overwrite existing output "
                              f"{', '.join(existing)}; pass --force to replace")


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        n = int(os.environ.get("JAMFORGE_THREADS", "1"))
    if n < 1:
        raise ValueError(f"--threads must be >= 1, got {n}")
    return n


def cmd_spectrogram(args) -> int:
    if not 0 <= args.class_id < NUM_CLASSES:
        raise ValueError(f"--class must be in 0..{NUM_CLASSES - 1}, got {args.class_id}")
    overrides = load_config_file(args.config) if args.config else {}
    cfg = dataset_config_from(overrides)
    out_pgm = args.out + ".pgm"
    out_raw = args.out + ".f32"
    out_json = args.out + ".json"
    _refuse_existing([out_pgm, out_raw, out_json], args.force)
    seed = args.seed if args.seed is not None else sample_seed(cfg.master_seed, args.class_id, 0, 0)
    image, record = make_sample(cfg, args.class_id, args.jnr, args.pr, seed)
    write_pgm(out_pgm, image.pixels)
    write_raw_f32(out_raw, image.pixels)
    doc = {
        "command": "spectrogram",
        "package_version": __version__,
        "config": config_to_dict(cfg),
        "record": record,
        "outputs": {"pgm": out_pgm, "raw_f32": out_raw},
    }
    _emit_manifest(doc, out_json)
    return 0


def cmd_gen_dataset(args) -> int:
    overrides = load_config_file(args.config) if args.config else {}
    cfg = dataset_config_from(overrides, master_seed=args.master_seed)
    _refuse_existing([os.path.join(args.out, PAYLOAD_NAME),
                      os.path.join(args.out, MANIFEST_NAME)], args.force)
    threads = _threads(args)
    summary = generate_dataset(cfg, args.out, threads=threads)
    doc = {
        "command": "gen-dataset",
        "package_version": __version__,
        "dataset_format_version": FORMAT_VERSION,
        "threads": threads,
        "config": config_to_dict(cfg),
        "summary": summary,
    }
    _emit_manifest(doc, os.path.join(args.out, "run_manifest.json"))
    return 0


def cmd_train(args) -> int:
    overrides = load_config_file(args.config) if args.config else {}
    tr = dict(overrides.get("train", {}))
    for key, val in (("epochs", args.epochs), ("batch_size", args.batch_size),
                     ("lr", args.lr), ("seed", args.seed)):
        if val is not None:
            tr[key] = val
    tc = TrainConfig(**tr)
    _refuse_existing([args.out_model, args.out_trace], args.force)
    for path in (args.out_model, args.out_trace):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)

    data = load_dataset(args.dataset)
    split = split_dataset(data.records, args.train_fraction, args.split_seed)
    net_cfg = preset_config(args.preset)
    model = build_classifier(net_cfg, seed=tc.seed)
    trace = train(model, data, split, tc, log=print)
    save_checkpoint(args.out_model, model)
    write_trace_csv(args.out_trace, trace)

    report = evaluate(model, data, split[1], batch_size=tc.batch_size)
    print(f"final test OA {report.oa:.4f}  kappa {report.kappa:.4f}")
    doc = {
        "command": "train",
        "package_version": __version__,
        "preset": args.preset,
        "train_config": dataclasses.asdict(tc),
        "split": {"train_fraction": args.train_fraction, "split_seed": args.split_seed,
                  "train_size": int(split[0].size), "test_size": int(split[1].size)},
        "dataset": str(args.dataset),
        "final": {"test_oa": report.oa, "kappa": report.kappa},
        "outputs": {"model": str(args.out_model), "trace": str(args.out_trace)},
    }
    _emit_manifest(doc, str(args.out_model) + ".run.json")
    return 0


def cmd_eval(args) -> int:
    data = load_dataset(args.dataset)
    split = split_dataset(data.records, args.train_fraction, args.split_seed)
    model, _ = load_checkpoint(args.model)
    report = evaluate(model, data, split[1])
    comp = report_complexity(model)
    report.flops = comp["flops"]
    report.fused_flops = comp["fused_flops"]
    report.params = comp["params"]
    report.time_ms_mean = comp["time_ms_mean"]
    report.time_ms_std = comp["time_ms_std"]

    os.makedirs(args.out_dir, exist_ok=True)
    write_confusion_csv(os.path.join(args.out_dir, "confusion.csv"), report.confusion)
    write_metrics_csv(os.path.join(args.out_dir, "metrics.csv"), report)
    write_group_csv(os.path.join(args.out_dir, "per_jnr.csv"), report.per_jnr, "jnr_db")
    write_group_csv(os.path.join(args.out_dir, "per_pr.csv"), report.per_pr, "pr_db")
    print(f"test OA {report.oa:.4f}  kappa {report.kappa:.4f}  "
          f"({int(split[1].size)} samples)")
    doc = {
        "command": "eval",
        "package_version": __version__,
        "model": str(args.model),
        "dataset": str(args.dataset),
        "split": {"train_fraction": args.train_fraction, "split_seed": args.split_seed,
                  "test_size": int(split[1].size)},
        "metrics": {"oa": report.oa, "kappa": report.kappa,
                    "per_jnr": {str(k): v for k, v in report.per_jnr.items()},
                    "per_pr": {str(k): v for k, v in report.per_pr.items()}},
    }
    _emit_manifest(doc, os.path.join(args.out_dir, "run_manifest.json"))
    return 0


def cmd_flops(args) -> int:
    net_cfg = preset_config(args.preset)
    model = build_classifier(net_cfg, seed=0)
    fused = fuse_model(model)
    doc = {
        "command": "flops",
        "package_version": __version__,
        "preset": args.preset,
        "input_shape": [1, 128, 128],
        "flops": count_flops(model),
        "fused_flops": count_flops(fused),
        "params": count_params(model),
    }
    _emit_manifest(doc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jamforge",
                                description="compound-jamming spectrogram laboratory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for dataset generation "
                        "(default: JAMFORGE_THREADS or 1; output bytes never depend on this)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrogram", help="synthesize one labeled spectrogram")
    sp.add_argument("--class", dest="class_id", type=int, required=True,
                    help=f"compound class id, 0..{NUM_CLASSES - 1}")
    sp.add_argument("--jnr", type=float, default=10.0, help="jammer-to-noise ratio in dB")
    sp.add_argument("--pr", type=float, default=0.0, help="pair power ratio in dB")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--config", default=None)
    sp.add_argument("--out", required=True, help="output path prefix (.pgm/.f32/.json added)")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_spectrogram)

    gp = sub.add_parser("gen-dataset", help="generate a dataset directory")
    gp.add_argument("--config", default=None)
    gp.add_argument("--out", required=True)
    gp.add_argument("--master-seed", type=int, default=None)
    gp.add_argument("--force", action="store_true")
    gp.set_defaults(func=cmd_gen_dataset)

    tp = sub.add_parser("train", help="train a classifier on a dataset")
    tp.add_argument("--dataset", required=True)
    tp.add_argument("--preset", choices=["desk", "full"], default="desk")
    tp.add_argument("--epochs", type=int, default=None)
    tp.add_argument("--batch-size", type=int, default=None)
    tp.add_argument("--lr", type=float, default=None)
    tp.add_argument("--seed", type=int, default=None)
    tp.add_argument("--split-seed", type=int, default=0)
    tp.add_argument("--train-fraction", type=float, default=0.8)
    tp.add_argument("--config", default=None)
    tp.add_argument("--out-model", required=True)
    tp.add_argument("--out-trace", required=True)
    tp.add_argument("--force", action="store_true")
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's test split")
    ep.add_argument("--model", required=True)
    ep.add_argument("--dataset", required=True)
    ep.add_argument("--split-seed", type=int, default=0)
    ep.add_argument("--train-fraction", type=float, default=0.8)
    ep.add_argument("--out-dir", required=True)
    ep.set_defaults(func=cmd_eval)

    fp = sub.add_parser("flops", help="report model complexity for a preset")
    fp.add_argument("--preset", choices=["desk", "full"], default="desk")
    fp.set_defaults(func=cmd_flops)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetFormatError, CheckpointError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (TrainingDiverged, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
