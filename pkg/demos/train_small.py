"""End-to-end walkthrough at snack scale: dataset, training, fusion.

Generates a small 9-class dataset (one JNR, 8 captures per class at
64x64 resolution), trains the desk classifier for a couple dozen
epochs, prints the confusion matrix, then folds every asymmetric
convolution block
into a single 3x3 convolution and verifies the fused network predicts
identically.  Takes a minute or two on one core; accuracy at this scale
is a smoke signal, not a benchmark -- scale samples_per_class_per_jnr
and epochs up for real numbers.

Run:  python3 demos/train_small.py [--workdir DIR]
"""

import argparse
import os
import tempfile

import numpy as np

from jamforge import (
    CwdConfig,
    DatasetConfig,
    TrainConfig,
    build_classifier,
    evaluate,
    fuse_model,
    generate_dataset,
    load_dataset,
    predict,
    preset_config,
    split_dataset,
    train,
)
from jamforge.nn import count_flops, count_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default=None)
    args = ap.parse_args()
    workdir = args.workdir or tempfile.mkdtemp(prefix="jamforge_demo_")
    data_dir = os.path.join(workdir, "data")

    # 1. synthesize the dataset (72 captures, ~10 s)
    cfg = DatasetConfig(
        jnr_grid_db=(10.0,),
        samples_per_class_per_jnr=8,
        n=512,
        cwd=CwdConfig(lag_half_length=32, time_frames=64, freq_bins=64),
        master_seed=0,
    )
    if not os.path.exists(data_dir):
        print(f"generating {cfg.record_count()} captures under {data_dir} ...")
        generate_dataset(cfg, data_dir)
    data = load_dataset(data_dir)

    # 2. split and train
    split = split_dataset(data.records, 0.8, seed=0)
    print(f"train {split[0].size} / test {split[1].size}")
    model = build_classifier(preset_config("desk"), seed=0)
    train(model, data, split, TrainConfig(epochs=24, batch_size=16, lr=0.01, seed=0),
          log=print)

    # 3. evaluate
    report = evaluate(model, data, split[1])
    print(f"\ntest OA {report.oa:.3f}  kappa {report.kappa:.3f}")
    print("confusion (rows true, cols predicted):")
    print(report.confusion)

    # 4. fold the ACB branches away and check nothing moved
    fused = fuse_model(model)
    x = data.pixels[split[1]]
    same = np.array_equal(predict(model, x), predict(fused, x))
    shape = (1,) + data.pixels.shape[1:]
    print(f"\nfused predictions identical: {same}")
    print(f"params {count_params(model)}  "
          f"flops/capture {count_flops(model, shape):.3e} -> "
          f"fused {count_flops(fused, shape):.3e}")


if __name__ == "__main__":
    main()
