"""Simulate photometer readings of a display described by a model JSON.

Produces a measurement CSV (channel,code,power_w) suitable for the
calibrate command: each channel is stepped through evenly spaced 8-bit
codes while the other two are held at zero, optionally with seeded
Gaussian noise on the power readings.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from pixelwatt.powermodel import load_model_json


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("model_json", type=Path)
    parser.add_argument("out_csv", type=Path)
    parser.add_argument("--steps", type=int, default=18, help="codes per channel")
    parser.add_argument("--noise", type=float, default=0.0, help="stddev in watts")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    model = load_model_json(args.model_json)
    rng = np.random.default_rng(args.seed)
    codes = np.linspace(0, 255, args.steps).round().astype(int)

    with open(args.out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "code", "power_w"])
        for name, params in zip("rgb", model.channels):
            for code in codes:
                v = code / 255.0
                watts = 0.5 * params.alpha * v * v + params.beta * v + params.gamma
                watts = max(watts + args.noise * rng.normal(), 0.0)
                writer.writerow([name, int(code), f"{watts:.12g}"])
    print(f"wrote {args.out_csv} ({3 * len(codes)} rows)")


if __name__ == "__main__":
    main()
