"""Degrade the oracle detector and watch recognition rate, AP and seat-state
accuracy fall off; a sanity study of the evaluation stack.

    python scripts/noise_study.py --scenes 60
"""

import argparse

from seatwatch.cli import _evaluate_dataset
from seatwatch.scenegen import generate_dataset
from seatwatch.seatgrid import grid_layout

SWEEP = [
    dict(p_miss=0.0, conf_jitter=0.0, fp_rate=0.0),
    dict(p_miss=0.1, conf_jitter=0.1, fp_rate=0.2),
    dict(p_miss=0.25, conf_jitter=0.2, fp_rate=0.5),
    dict(p_miss=0.5, conf_jitter=0.3, fp_rate=1.0),
    dict(p_miss=0.75, conf_jitter=0.3, fp_rate=2.0),
]


def run(n_scenes, seed):
    dataset = generate_dataset(
        n_scenes, grid_layout(4, 4), person_prob=0.5, item_prob=0.4,
        gain_range=(0.5, 2.0), seed=seed, width=192, height=192,
    )
    print(f"{'p_miss':>7} {'jitter':>7} {'fp_rate':>8} | {'recog':>6} {'AP':>6} {'accuracy':>8}")
    for noise in SWEEP:
        args = dict(noise, flip_prob=0.0, seed=seed)
        report, _ = _evaluate_dataset(dataset, args, iou_thresh=0.5)
        print(
            f"{noise['p_miss']:>7} {noise['conf_jitter']:>7} {noise['fp_rate']:>8} | "
            f"{report.recognition_rate:>6.3f} {report.ap:>6.3f} {report.accuracy:>8.3f}"
        )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenes", type=int, default=60)
    parser.add_argument("--seed", type=int, default=5)
    args = parser.parse_args()
    run(args.scenes, args.seed)
