"""Train a small wave reservoir, then let it re-tune itself while predicting.

The readout learns to forecast the beat signal 198 ms ahead. At test time the
synchronisation rule nudges the global speed field and dynamic selection
adjusts local damping. The printout compares time offset ratios before and
after adaptation for each test interval.

A desk-scale setup (n = 20, 60 samples, 4 epochs) keeps this to a few
minutes; raise them for full-scale behaviour (n = 40, 200+ samples).

    python demos/train_and_adapt.py [--n 20] [--samples 60] [--epochs 4]
"""

import argparse
import time

from wavereservoir.config import config_from_dict
from wavereservoir.experiment import (build_dataset, build_model, evaluate_suite,
                                      test_signals, train_model)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--samples", type=int, default=60)
    ap.add_argument("--epochs", type=int, default=4)
    args = ap.parse_args()

    cfg = config_from_dict({
        "grid": {"n": args.n},
        "fields": {"grad_per_row": -270.0 / (args.n - 1)},
        "dataset": {"n_samples": args.samples},
        "train": {"epochs": args.epochs},
    })
    model = build_model(cfg)
    data = build_dataset(cfg)

    t0 = time.time()
    result = train_model(cfg, model, data,
                         progress=lambda e, mse: print(f"epoch {e}: mse {mse:.5f}"))
    print(f"trained in {time.time() - t0:.0f} s")

    print("interval   pre |ratio|  post |ratio|  pre var   post var  delta_sum")
    for rec in evaluate_suite(model, result.readout, test_signals(cfg), cfg, adapt=True):
        pre, post = rec["pre"], rec["post"]
        print(f"{rec['interval_s']:7.3f} s  {pre['mean_abs']:10.3f}  {post['mean_abs']:12.3f}"
              f"  {pre['variance']:8.4f}  {post['variance']:8.4f}  {rec['final_delta_sum']:+.2f}")


if __name__ == "__main__":
    main()
