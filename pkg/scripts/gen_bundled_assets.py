"""Regenerate the assets bundled under src/pixelwatt/data.

Everything here is synthetic and deterministic: the power model is a made-up
display (no hardware was measured), the sample image is procedural, and the
training targets come from a smooth invented response surface. Rerunning the
script reproduces the files byte for byte.
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

import pixelwatt as pw
from pixelwatt.powermodel import ChannelPowerParams, PowerModel, save_model_json
from pixelwatt.predictor import (
    PredictorKind,
    TrainingRow,
    TrainingSet,
    save_predictor_json,
    save_training_csv,
    train,
)
from pixelwatt.study import K_MAX

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "pixelwatt" / "data"

SYNTHETIC_MODEL = PowerModel(
    channels=(
        ChannelPowerParams(alpha=1.9, beta=0.05, gamma=0.01 / 3),
        ChannelPowerParams(alpha=2.0, beta=0.06, gamma=0.01 / 3),
        ChannelPowerParams(alpha=2.2, beta=0.04, gamma=0.01 / 3),
    ),
    space=pw.ColorSpace.SRGB,
    note="synthetic display model, not measured hardware",
)


def _field(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Smooth scalar field in [0, 1]: a few random low-frequency sinusoids."""
    yy, xx = np.mgrid[0:h, 0:w]
    out = np.zeros((h, w))
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 2.5, 2)
        phase = rng.uniform(0, 2 * math.pi)
        out += rng.uniform(0.3, 1.0) * np.sin(
            2 * math.pi * (fx * xx / w + fy * yy / h) + phase
        )
    lo, hi = out.min(), out.max()
    return (out - lo) / (hi - lo)


def make_texture(seed: int, h: int = 64, w: int = 96) -> pw.ImageBuffer:
    """Procedural photo-ish image, composed in HSL so each statistic the
    feature extractor reads can be dialed independently."""
    rng = np.random.default_rng(seed)
    base_hue = rng.uniform(0, 360)
    hue_spread = rng.uniform(5, 160)  # degrees; controls hue dispersion
    hue = np.mod(base_hue + hue_spread * (_field(rng, h, w) - 0.5), 360.0)
    sat = np.clip(
        rng.uniform(0.2, 0.9) + rng.uniform(0.05, 0.5) * (_field(rng, h, w) - 0.5),
        0.0,
        1.0,
    )
    lum_span = rng.uniform(0.1, 0.6)
    lum_mid = rng.uniform(lum_span / 2 + 0.05, 0.95 - lum_span / 2)
    lum = lum_mid + lum_span * (_field(rng, h, w) - 0.5)
    hsl = np.stack([hue, sat, np.clip(lum, 0.0, 1.0)], axis=-1)
    return pw.convert_image(
        pw.ImageBuffer(hsl, pw.ColorSpace.HSL), pw.ColorSpace.SRGB
    )


def synthetic_k(f: pw.FeatureVector, noise: float) -> float:
    """Invented ground truth: darker, flatter images tolerate more distortion
    (small k); bright busy ones need protection (large k)."""
    k = 1.2 + 2.4 * f.mean_lum + 1.1 * f.std_sat + 0.9 * f.std_hue - 0.6 * f.std_lum
    k += noise
    return min(max(k, 0.2), K_MAX)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", type=Path, default=DATA_DIR)
    args = parser.parse_args()
    args.data_dir.mkdir(parents=True, exist_ok=True)

    save_model_json(SYNTHETIC_MODEL, args.data_dir / "model_synthetic.json")

    sample = make_texture(seed=2024)
    pw.save_png(sample, args.data_dir / "sample.png")

    rng = np.random.default_rng(99)
    rows = []
    for i in range(14):
        img = make_texture(seed=1000 + i)
        feats = pw.extract_features(img)
        rows.append(
            TrainingRow(
                image=f"tex{i:02d}",
                features=feats,
                k=synthetic_k(feats, noise=0.05 * rng.normal()),
            )
        )
    data = TrainingSet(
        tuple(rows), space=pw.ColorSpace.LAB, metric=pw.DistanceMetric.L22
    )
    save_training_csv(data, args.data_dir / "training_synthetic.csv")

    predictor = train(data, PredictorKind.SVR)
    save_predictor_json(predictor, args.data_dir / "predictor_synthetic.json")

    for name in sorted(p.name for p in args.data_dir.iterdir()):
        print("wrote", args.data_dir / name)


if __name__ == "__main__":
    main()
