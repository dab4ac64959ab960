"""A plain random reservoir tends to echo its input instead of anticipating it.

Trains a sparse random reservoir of the same size as the wave grid on the
same look-ahead task and reports how far its prediction trails the target,
measured by the cross-correlation peak. A lag near the 198 ms horizon means
the readout has learned to copy the present, not predict the future.

    python demos/random_baseline_lag.py [--n 16] [--samples 40] [--epochs 3]
"""

import argparse

from wavereservoir.config import config_from_dict
from wavereservoir.experiment import (baseline_lags, build_baseline, build_dataset,
                                      build_model, test_signals, train_model)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--samples", type=int, default=40)
    ap.add_argument("--epochs", type=int, default=3)
    args = ap.parse_args()

    cfg = config_from_dict({"grid": {"n": args.n},
                            "dataset": {"n_samples": args.samples},
                            "train": {"epochs": args.epochs},
                            "baseline": {"density": 0.05}})
    model = build_baseline(cfg, template=build_model(cfg))
    result = train_model(cfg, model, build_dataset(cfg))
    print(f"final training mse {result.loss_curve[-1]:.5f}")
    for rec in baseline_lags(model, result.readout, test_signals(cfg), cfg):
        print(f"interval {rec['interval_s']:.3f} s: prediction lags target by "
              f"{1000 * rec['lag_s']:.0f} ms")


if __name__ == "__main__":
    main()
