"""Image statistics used to predict tolerable compression strength.

Four scalars summarize an sRGB image through its HSL decomposition: mean
lightness, lightness spread, saturation spread, and a circular hue spread
computed over chromatic pixels only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .colorspace import ColorSpace, srgb_to_hsl
from .errors import DataError
from .image import ImageBuffer

__all__ = [
    "FeatureVector",
    "FEATURE_NAMES",
    "ACHROMATIC_SATURATION",
    "extract_features",
    "correlations",
]

FEATURE_NAMES = ("mean_lum", "std_lum", "std_sat", "std_hue")

# Pixels below this saturation have numerically meaningless hue and are
# excluded from the hue statistic.
ACHROMATIC_SATURATION = 0.01


@dataclass(frozen=True)
class FeatureVector:
    """The four per-image statistics, each mapped into a bounded range."""

    mean_lum: float
    std_lum: float
    std_sat: float
    std_hue: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_lum, self.std_lum, self.std_sat, self.std_hue])

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


def extract_features(img: ImageBuffer) -> FeatureVector:
    """Compute the feature vector of an sRGB image.

    Lightness and saturation statistics are population moments over all
    pixels. The hue statistic is the circular standard deviation
    sqrt(-2 ln R) of chromatic pixels (saturation >= 0.01), mapped into
    [0, 1] by min(., sqrt(2)) / sqrt(2); an image with no chromatic pixels
    scores 0.
    """
    if img.space != ColorSpace.SRGB:
        raise ValueError("feature extraction expects an sRGB image")
    hsl = srgb_to_hsl(img.flat())
    hue, sat, lum = hsl[:, 0], hsl[:, 1], hsl[:, 2]

    chromatic = sat >= ACHROMATIC_SATURATION
    if not np.any(chromatic):
        std_hue = 0.0
    else:
        theta = np.radians(hue[chromatic])
        r_bar = float(np.hypot(np.cos(theta).mean(), np.sin(theta).mean()))
        if r_bar <= 1e-12:
            circ = math.sqrt(2.0)  # fully dispersed hues saturate the scale
        else:
            circ = math.sqrt(max(0.0, -2.0 * math.log(r_bar)))
        std_hue = min(circ, math.sqrt(2.0)) / math.sqrt(2.0)

    return FeatureVector(
        mean_lum=float(lum.mean()),
        std_lum=float(lum.std()),
        std_sat=float(sat.std()),
        std_hue=std_hue,
    )


def correlations(xs, ys) -> tuple[float, float]:
    """Pearson and Spearman (average-rank ties) correlation of two sequences.

    Requires equal lengths of at least 3 and non-degenerate variance in both.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 paired observations")
    if np.std(x) == 0 or np.std(y) == 0:
        raise DataError("correlation is undefined for zero-variance input")

    def pearson(a: np.ndarray, b: np.ndarray) -> float:
        a = a - a.mean()
        b = b - b.mean()
        return float((a @ b) / np.sqrt((a @ a) * (b @ b)))

    return pearson(x, y), pearson(rankdata(x), rankdata(y))
