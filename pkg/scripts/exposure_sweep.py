"""Mis-expose synthetic scenes across a gain sweep and measure how well the
V-channel equalization restores the dynamic range.

    python scripts/exposure_sweep.py --scenes 40
"""

import argparse

import numpy as np

from seatwatch import imaging, scenegen
from seatwatch.imaging import rgb_to_hsv
from seatwatch.seatgrid import grid_layout

GAINS = (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0)


def run(n_scenes, seed):
    dataset = scenegen.generate_dataset(
        n_scenes, grid_layout(4, 4), person_prob=0.5, item_prob=0.4,
        gain_range=(1.0, 1.0), seed=seed, width=192, height=192,
    )
    print(f"{'gain':>6}  {'mean V before':>13}  {'mean V after':>12}  {'verdict before':>14}")
    for gain in GAINS:
        before, after, verdicts = [], [], set()
        for scene in dataset:
            exposed = scenegen.apply_exposure(scene.image, gain)
            hsv = rgb_to_hsv(exposed)
            before.append(hsv.v.mean())
            verdicts.add(imaging.assess_exposure(hsv).verdict.value)
            repaired = imaging.preprocess(exposed)
            after.append(rgb_to_hsv(repaired).v.mean())
        print(
            f"{gain:>6}  {np.mean(before):>13.3f}  {np.mean(after):>12.3f}  "
            f"{'/'.join(sorted(verdicts)):>14}"
        )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenes", type=int, default=40)
    parser.add_argument("--seed", type=int, default=2)
    args = parser.parse_args()
    run(args.scenes, args.seed)
