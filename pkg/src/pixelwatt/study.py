"""Rating ingestion and quality-boundary extraction.

Raters score side-by-side image pairs on the five-point impairment scale
(5 imperceptible .. 1 very annoying). Each submitted batch carries two hidden
control pairs; batches whose controls were misjudged are dropped wholesale.
Surviving scores aggregate into mean opinion scores, from which the smallest
acceptable fidelity weight per quality level is extracted and fit by an
exponential lower-bound curve.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .colorspace import ColorSpace
from .errors import DataError, FitError
from .transform import DistanceMetric

__all__ = [
    "ControlKind",
    "RatingRecord",
    "MosEntry",
    "BoundaryPoint",
    "LowerBoundFit",
    "SCORE_LABELS",
    "load_ratings_csv",
    "save_ratings_csv",
    "filter_batches",
    "aggregate_mos",
    "lower_boundary",
    "lambda_lower_bound",
    "fit_k",
    "K_MAX",
]

# Verbatim five-point impairment scale, highest first.
SCORE_LABELS = {
    5: "Imperceptible",
    4: "Perceptible, but not annoying",
    3: "Slightly annoying",
    2: "Annoying",
    1: "Very annoying",
}

# lambda_lb(1) = (e**k - 1)/1000 reaches the top of the normalized lambda
# range exactly when k = ln(1001).
K_MAX = math.log(1001.0)

# Normalized MOS levels reachable by averaging five 1..5 scores: sums run
# 5..25, giving 21 distinct means. Bin index = round(20 * mos_norm).
MOS_BIN_COUNT = 20


class ControlKind(Enum):
    NONE = "none"
    IDENTICAL = "identical"
    BLACK = "black"


@dataclass(frozen=True)
class RatingRecord:
    """One rating of one displayed pair within a participant's batch."""

    participant: str
    batch: str
    image: str
    metric: DistanceMetric
    space: ColorSpace
    lambda_norm: float
    score: int
    control: ControlKind = ControlKind.NONE

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_norm <= 1.0:
            raise ValueError("lambda_norm must lie in [0, 1]")
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError("score must be an integer in 1..5")


@dataclass(frozen=True)
class MosEntry:
    """Aggregated opinion of one (image, metric, space, lambda) stimulus."""

    image: str
    metric: DistanceMetric
    space: ColorSpace
    lambda_norm: float
    mos: float
    mos_norm: float
    n_ratings: int


@dataclass(frozen=True)
class BoundaryPoint:
    """Smallest acceptable lambda_norm at a binned normalized MOS level."""

    mos_norm: float
    lambda_norm: float


@dataclass(frozen=True)
class LowerBoundFit:
    """Fitted exponent of the lambda lower-bound curve plus fit diagnostics."""

    k: float
    rmse: float
    n_points: int


_CSV_FIELDS = [
    "participant",
    "batch",
    "image",
    "metric",
    "space",
    "lambda_norm",
    "score",
    "control",
]


def load_ratings_csv(path) -> list[RatingRecord]:
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != _CSV_FIELDS:
            raise DataError(
                f"{path}: expected header {','.join(_CSV_FIELDS)}, got {reader.fieldnames}"
            )
        for i, row in enumerate(reader, start=2):
            try:
                score = float(row["score"])
                if score != int(score):
                    raise ValueError("score must be an integer")
                records.append(
                    RatingRecord(
                        participant=row["participant"],
                        batch=row["batch"],
                        image=row["image"],
                        metric=DistanceMetric(row["metric"]),
                        space=ColorSpace(row["space"]),
                        lambda_norm=float(row["lambda_norm"]),
                        score=int(score),
                        control=ControlKind(row["control"]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{i}: bad rating row: {exc}") from exc
    if not records:
        raise DataError(f"{path}: no rating rows")
    return records


def save_ratings_csv(records, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for r in records:
            writer.writerow(
                [
                    r.participant,
                    r.batch,
                    r.image,
                    r.metric.value,
                    r.space.value,
                    f"{r.lambda_norm:.12g}",
                    r.score,
                    r.control.value,
                ]
            )


def filter_batches(
    records,
    identical_min: int = 5,
    black_max: int = 1,
) -> list[RatingRecord]:
    """Drop whole batch responses whose hidden controls were misjudged.

    A batch response is one participant's pass over one batch. Each must
    contain exactly one IDENTICAL and one BLACK control; it survives iff the
    IDENTICAL pair scored >= identical_min and the BLACK pair <= black_max
    (defaults demand the strict 5 and 1). Control rows are stripped from the
    output; surviving records pass through unaltered.
    """
    groups: dict[tuple[str, str], list[RatingRecord]] = {}
    for r in records:
        groups.setdefault((r.participant, r.batch), []).append(r)

    kept: list[RatingRecord] = []
    for (participant, batch), rows in groups.items():
        identical = [r for r in rows if r.control == ControlKind.IDENTICAL]
        black = [r for r in rows if r.control == ControlKind.BLACK]
        if len(identical) != 1 or len(black) != 1:
            raise DataError(
                f"batch {batch!r} of participant {participant!r} must contain exactly "
                f"one identical and one black control, found {len(identical)} and {len(black)}"
            )
        if identical[0].score >= identical_min and black[0].score <= black_max:
            kept.extend(r for r in rows if r.control == ControlKind.NONE)
    return kept


def aggregate_mos(records) -> list[MosEntry]:
    """Mean opinion score per (image, metric, space, lambda_norm) stimulus.

    mos_norm maps the 1..5 scale onto [0, 1]. Control rows must already be
    filtered out. Output is sorted for determinism.
    """
    groups: dict[tuple, list[int]] = {}
    for r in records:
        if r.control != ControlKind.NONE:
            raise DataError("aggregate_mos expects control rows to be filtered out")
        groups.setdefault((r.image, r.metric, r.space, r.lambda_norm), []).append(
            r.score
        )
    entries = []
    for (image, metric, space, lam), scores in groups.items():
        mos = float(np.mean(scores))
        entries.append(
            MosEntry(
                image=image,
                metric=metric,
                space=space,
                lambda_norm=lam,
                mos=mos,
                mos_norm=(mos - 1.0) / 4.0,
                n_ratings=len(scores),
            )
        )
    entries.sort(key=lambda e: (e.image, e.metric.value, e.space.value, e.lambda_norm))
    return entries


def lower_boundary(entries) -> list[BoundaryPoint]:
    """Minimum lambda_norm per binned MOS level, kept to a rising staircase.

    mos_norm is snapped to the grid of levels reachable by five-rater means
    (21 levels, 0.05 apart). Within each occupied bin the smallest
    lambda_norm wins; then any point whose lambda_norm does not exceed every
    retained point at a lower level is deleted, leaving a strictly
    increasing lower staircase.
    """
    entries = list(entries)
    if not entries:
        raise DataError("cannot extract a boundary from zero MOS entries")
    bins: dict[int, float] = {}
    for e in entries:
        b = int(round(e.mos_norm * MOS_BIN_COUNT))
        lam = e.lambda_norm
        if b not in bins or lam < bins[b]:
            bins[b] = lam

    points = []
    best = -math.inf
    for b in sorted(bins):
        lam = bins[b]
        if lam > best:
            points.append(BoundaryPoint(mos_norm=b / MOS_BIN_COUNT, lambda_norm=lam))
            best = lam
    return points


def lambda_lower_bound(k: float, mos_norm: float) -> float:
    """Exponential lower bound lambda = (e**(k*s) - 1) / 1000 on [0, 1].

    The result is clamped to [0, 1]: at k = ln(1001), s = 1 the exact value
    is 1 but floating-point exp lands an ulp off, on either side.
    """
    if not 0.0 < k <= K_MAX:
        raise ValueError(f"k must lie in (0, {K_MAX:.6f}]")
    if not 0.0 <= mos_norm <= 1.0:
        raise ValueError("mos_norm must lie in [0, 1]")
    return min(max(math.expm1(k * mos_norm) / 1000.0, 0.0), 1.0)


def fit_k(points, tol: float = 1e-8) -> LowerBoundFit:
    """Fit the exponent k of the lower-bound curve to boundary points.

    Minimizes the sum of squared residuals over k in (0, ln(1001)] by
    golden-section search to the given absolute tolerance.
    """
    points = list(points)
    if not points:
        raise DataError("cannot fit a lower bound to zero points")
    s = np.array([p.mos_norm for p in points])
    lam = np.array([p.lambda_norm for p in points])
    if np.all(lam == 0):
        raise FitError("all boundary lambdas are zero; the curve is degenerate")

    def sse(k: float) -> float:
        return float((((np.exp(k * s) - 1.0) / 1000.0 - lam) ** 2).sum())

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 1e-9, K_MAX
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = sse(c), sse(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = sse(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = sse(d)
    k = (a + b) / 2.0
    return LowerBoundFit(
        k=k,
        rmse=math.sqrt(sse(k) / len(points)),
        n_points=len(points),
    )
