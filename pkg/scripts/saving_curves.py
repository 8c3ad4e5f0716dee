"""Sweep the normalized tradeoff strength and tabulate power savings.

For one input image and every (space, metric) configuration, runs the
transform across the 20-step lambda grid and writes a CSV of saving
percentages, raw lambda values, and gamut-clamp counts. The table is the
raw material for saving-vs-strength plots.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

from pixelwatt import ColorSpace, load_png
from pixelwatt.powermodel import load_model_json
from pixelwatt.transform import LAMBDA_GRID, DistanceMetric, TransformConfig, apply

SPACES = (ColorSpace.SRGB, ColorSpace.LAB, ColorSpace.UVW)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("image_png", type=Path)
    parser.add_argument("model_json", type=Path)
    parser.add_argument("out_csv", type=Path)
    args = parser.parse_args()

    img = load_png(args.image_png)
    model = load_model_json(args.model_json)

    with open(args.out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["space", "metric", "lambda_norm", "lambda", "saving_pct", "clamped_pixels"]
        )
        for space in SPACES:
            for metric in DistanceMetric:
                for lam_norm in LAMBDA_GRID:
                    cfg = TransformConfig(metric=metric, space=space, lambda_norm=lam_norm)
                    res = apply(cfg, model, img)
                    writer.writerow(
                        [
                            space.value,
                            metric.value,
                            f"{lam_norm:.2f}",
                            f"{res.lambda_value:.6g}",
                            f"{res.saving_pct:.4f}",
                            res.clamped_pixels,
                        ]
                    )
                print(f"{space.value}/{metric.value} done")
    print(f"wrote {args.out_csv}")


if __name__ == "__main__":
    main()
