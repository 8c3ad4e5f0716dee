"""Regressors mapping image features to the lower-bound exponent k.

Three model kinds are supported: LINEAR and CUBIC polynomial regressions
solved by lightly ridged least squares, and an epsilon-insensitive RBF
support vector regression trained by a deterministic coordinate descent on
its dual. Evaluation utilities cover seeded k-fold cross validation and
leave-one-image-out error.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .colorspace import ColorSpace
from .errors import ConfigError, DataError, FitError
from .features import FEATURE_NAMES, FeatureVector
from .study import K_MAX
from .transform import DistanceMetric

__all__ = [
    "PredictorKind",
    "TrainingRow",
    "TrainingSet",
    "TrainedPredictor",
    "KPrediction",
    "CVReport",
    "LeaveOneOutResult",
    "RIDGE_TAU",
    "train",
    "predict_k",
    "cross_validate",
    "leave_one_image_out",
    "percentage_error",
    "load_training_csv",
    "save_training_csv",
    "save_predictor_json",
    "load_predictor_json",
]

RIDGE_TAU = 1e-8

# SVR defaults: epsilon tube width, box constraint, and the KKT tolerance the
# dual coordinate descent runs to.
SVR_EPSILON = 0.05
SVR_C = 10.0
SVR_KKT_TOL = 1e-4

# Predictions at or below zero clamp to this k instead.
K_FLOOR = 1e-3


class PredictorKind(Enum):
    LINEAR = "linear"
    CUBIC = "cubic"
    SVR = "svr"


@dataclass(frozen=True)
class TrainingRow:
    image: str
    features: FeatureVector
    k: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.k):
            raise ValueError("k must be finite")


@dataclass(frozen=True)
class TrainingSet:
    """Feature/target rows for one (space, metric) configuration."""

    rows: tuple[TrainingRow, ...]
    space: ColorSpace | None = None
    metric: DistanceMetric | None = None

    def __post_init__(self) -> None:
        if len(self.rows) == 0:
            raise ValueError("a training set needs at least one row")

    def feature_matrix(self) -> np.ndarray:
        return np.stack([r.features.as_array() for r in self.rows])

    def targets(self) -> np.ndarray:
        return np.array([r.k for r in self.rows])

    def image_ids(self) -> list[str]:
        return [r.image for r in self.rows]


class KPrediction(NamedTuple):
    k: float
    clamped: bool


@dataclass(frozen=True)
class CVReport:
    kind: PredictorKind
    folds: int
    fold_mses: tuple[float, ...]
    mse_mean: float
    mse_variance: float
    k_range: float
    pct_error: float


@dataclass(frozen=True)
class LeaveOneOutResult:
    image: str
    predicted_k: float
    true_k: float
    squared_error: float


def _standardize_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)  # constant features pass through
    return mean, scale


def _poly_design(z: np.ndarray, degree: int) -> np.ndarray:
    """Per-feature monomials up to the degree, no cross terms, plus intercept."""
    cols = [np.ones(len(z))]
    for d in range(1, degree + 1):
        cols.extend(z[:, j] ** d for j in range(z.shape[1]))
    return np.column_stack(cols)


def _rbf_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-sq / (2.0 * bandwidth**2))


def _median_pairwise_distance(z: np.ndarray) -> float:
    if len(z) < 2:
        return 1.0
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    upper = dist[np.triu_indices(len(z), k=1)]
    med = float(np.median(upper))
    return med if med > 0 else 1.0


@dataclass(frozen=True)
class TrainedPredictor:
    """A fitted regressor plus everything needed to reproduce its predictions."""

    kind: PredictorKind
    mean: np.ndarray
    scale: np.ndarray
    coefficients: np.ndarray | None = None  # polynomial kinds
    support: np.ndarray | None = None  # svr: standardized training features
    dual_coefs: np.ndarray | None = None
    bias: float = 0.0
    bandwidth: float | None = None
    epsilon: float = SVR_EPSILON
    c: float = SVR_C
    space: ColorSpace | None = None
    metric: DistanceMetric | None = None

    def predict(self, features: FeatureVector) -> float:
        z = (features.as_array() - self.mean) / self.scale
        if self.kind in (PredictorKind.LINEAR, PredictorKind.CUBIC):
            degree = 1 if self.kind == PredictorKind.LINEAR else 3
            design = _poly_design(z[None, :], degree)
            return float((design @ self.coefficients)[0])
        k_row = _rbf_kernel(z[None, :], self.support, self.bandwidth)
        return float((k_row @ self.dual_coefs)[0] + self.bias)

    def raw_coefficients(self) -> np.ndarray:
        """LINEAR only: (intercept, slopes) in raw feature units."""
        if self.kind != PredictorKind.LINEAR:
            raise ConfigError("raw coefficients are only defined for LINEAR models")
        slopes = self.coefficients[1:] / self.scale
        intercept = float(self.coefficients[0] - (self.coefficients[1:] * self.mean / self.scale).sum())
        return np.concatenate([[intercept], slopes])


def _train_polynomial(z: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    design = _poly_design(z, degree)
    n_params = design.shape[1]
    penalty = RIDGE_TAU * np.eye(n_params)
    penalty[0, 0] = 0.0  # the intercept is never penalized
    lhs = design.T @ design + penalty
    return np.linalg.solve(lhs, design.T @ y)


def _train_svr(
    k_mat: np.ndarray,
    y: np.ndarray,
    epsilon: float,
    c: float,
    tol: float = SVR_KKT_TOL,
    max_sweeps: int = 10_000,
) -> np.ndarray:
    """Coordinate descent on the bias-free SVR dual.

    Minimizes 0.5 * b^T K b - y^T b + epsilon * ||b||_1 over [-C, C]^n by
    exact per-coordinate updates in a fixed sweep order; the fixpoint of
    those updates satisfies the KKT conditions, so iteration stops when the
    largest coordinate move in a sweep drops below tol.
    """
    n = len(y)
    beta = np.zeros(n)
    k_beta = np.zeros(n)  # running K @ beta
    diag = np.diag(k_mat)
    for _ in range(max_sweeps):
        worst = 0.0
        for i in range(n):
            if diag[i] <= 0:
                continue
            residual = y[i] - (k_beta[i] - k_mat[i, i] * beta[i])
            # Soft threshold of the unregularized optimum, then box clip.
            if residual > epsilon:
                new = (residual - epsilon) / diag[i]
            elif residual < -epsilon:
                new = (residual + epsilon) / diag[i]
            else:
                new = 0.0
            new = min(max(new, -c), c)
            delta = new - beta[i]
            if delta != 0.0:
                k_beta += delta * k_mat[:, i]
                beta[i] = new
                worst = max(worst, abs(delta))
        if worst < tol:
            return beta
    raise FitError("SVR coordinate descent did not reach the KKT tolerance")


def train(
    data: TrainingSet,
    kind: PredictorKind,
    epsilon: float = SVR_EPSILON,
    c: float = SVR_C,
    bandwidth: float | None = None,
) -> TrainedPredictor:
    """Fit a predictor of the given kind to the training set.

    LINEAR needs at least 5 rows (full rank on four features plus an
    intercept); CUBIC accepts any size thanks to the ridge term; SVR accepts
    a single row. Features are standardized with constants computed from the
    training rows only. The SVR bandwidth defaults to the median pairwise
    distance between standardized training rows.
    """
    x = data.feature_matrix()
    y = data.targets()
    if kind == PredictorKind.LINEAR and len(y) < 5:
        raise FitError("LINEAR needs at least 5 training rows")
    if kind == PredictorKind.CUBIC and len(y) < 2:
        raise FitError("CUBIC needs at least 2 training rows")

    mean, scale = _standardize_fit(x)
    z = (x - mean) / scale
    common = dict(mean=mean, scale=scale, space=data.space, metric=data.metric)

    if kind in (PredictorKind.LINEAR, PredictorKind.CUBIC):
        degree = 1 if kind == PredictorKind.LINEAR else 3
        coef = _train_polynomial(z, y, degree)
        return TrainedPredictor(kind=kind, coefficients=coef, **common)

    bw = bandwidth if bandwidth is not None else _median_pairwise_distance(z)
    if bw <= 0:
        raise FitError("SVR bandwidth must be strictly positive")
    bias = float(y.mean())
    k_mat = _rbf_kernel(z, z, bw)
    beta = _train_svr(k_mat, y - bias, epsilon, c)
    return TrainedPredictor(
        kind=kind,
        support=z,
        dual_coefs=beta,
        bias=bias,
        bandwidth=bw,
        epsilon=epsilon,
        c=c,
        **common,
    )


def predict_k(predictor: TrainedPredictor, features: FeatureVector) -> KPrediction:
    """Predict k, clamped into the valid exponent range (0, ln(1001)].

    Non-positive raw predictions land on a small positive floor; predictions
    above ln(1001) land on the ceiling. Either case sets the clamped flag.
    """
    raw = predictor.predict(features)
    if not math.isfinite(raw):
        raise FitError("predictor produced a non-finite k")
    if raw <= 0.0:
        return KPrediction(K_FLOOR, True)
    if raw > K_MAX:
        return KPrediction(K_MAX, True)
    return KPrediction(raw, False)


def percentage_error(mse_mean: float, k_range: float) -> float:
    """Mean squared error as a percentage of the target range (MSE, not RMSE)."""
    if k_range <= 0:
        raise DataError("k range must be positive to express a percentage error")
    return 100.0 * mse_mean / k_range


def cross_validate(
    data: TrainingSet,
    kind: PredictorKind,
    folds: int = 5,
    seed: int = 0,
    **train_kwargs,
) -> CVReport:
    """Seeded shuffled k-fold cross validation.

    Rows are permuted with a seeded generator and split into near-equal
    folds; each fold is scored by a model trained on the remaining rows.
    mse_mean is the arithmetic mean of the per-fold MSEs.
    """
    if folds < 2:
        raise ConfigError("cross validation needs at least 2 folds")
    n = len(data.rows)
    if n < folds:
        raise ConfigError(f"cannot split {n} rows into {folds} folds")

    order = np.random.default_rng(seed).permutation(n)
    fold_indices = np.array_split(order, folds)
    fold_mses = []
    for test_idx in fold_indices:
        test_set = set(int(i) for i in test_idx)
        train_rows = tuple(r for i, r in enumerate(data.rows) if i not in test_set)
        model = train(
            TrainingSet(train_rows, space=data.space, metric=data.metric),
            kind,
            **train_kwargs,
        )
        errs = [
            (model.predict(data.rows[i].features) - data.rows[i].k) ** 2
            for i in test_idx
        ]
        fold_mses.append(float(np.mean(errs)))

    y = data.targets()
    k_range = float(y.max() - y.min())
    mse_mean = float(np.mean(fold_mses))
    return CVReport(
        kind=kind,
        folds=folds,
        fold_mses=tuple(fold_mses),
        mse_mean=mse_mean,
        mse_variance=float(np.var(fold_mses)),
        k_range=k_range,
        pct_error=percentage_error(mse_mean, k_range),
    )


def leave_one_image_out(
    data: TrainingSet,
    image: str,
    kind: PredictorKind,
    **train_kwargs,
) -> LeaveOneOutResult:
    """Train without one image and report the squared error predicting it."""
    held = [r for r in data.rows if r.image == image]
    if not held:
        raise DataError(f"unknown image id {image!r}")
    rest = tuple(r for r in data.rows if r.image != image)
    if not rest:
        raise FitError("cannot hold out the only image in the training set")
    model = train(TrainingSet(rest, space=data.space, metric=data.metric), kind, **train_kwargs)
    true_k = float(np.mean([r.k for r in held]))
    pred = model.predict(held[0].features)
    return LeaveOneOutResult(
        image=image,
        predicted_k=pred,
        true_k=true_k,
        squared_error=(pred - true_k) ** 2,
    )


_TRAINING_FIELDS = ["image", "space", "metric", *FEATURE_NAMES, "k"]


def load_training_csv(
    path,
    space: ColorSpace | None = None,
    metric: DistanceMetric | None = None,
) -> TrainingSet:
    """Read training rows, optionally filtered to one (space, metric).

    If the filter is omitted the file must be homogeneous in both columns.
    """
    path = Path(path)
    rows = []
    seen: set[tuple[ColorSpace, DistanceMetric]] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != _TRAINING_FIELDS:
            raise DataError(
                f"{path}: expected header {','.join(_TRAINING_FIELDS)}, got {reader.fieldnames}"
            )
        for i, row in enumerate(reader, start=2):
            try:
                row_space = ColorSpace(row["space"])
                row_metric = DistanceMetric(row["metric"])
                if space is not None and row_space != space:
                    continue
                if metric is not None and row_metric != metric:
                    continue
                seen.add((row_space, row_metric))
                rows.append(
                    TrainingRow(
                        image=row["image"],
                        features=FeatureVector(
                            *(float(row[name]) for name in FEATURE_NAMES)
                        ),
                        k=float(row["k"]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{i}: bad training row: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no training rows match the requested configuration")
    if len(seen) > 1:
        raise DataError(
            f"{path}: mixed configurations {sorted((s.value, m.value) for s, m in seen)}; "
            "pass space= and metric= to select one"
        )
    only = next(iter(seen))
    return TrainingSet(tuple(rows), space=only[0], metric=only[1])


def save_training_csv(data: TrainingSet, path) -> None:
    if data.space is None or data.metric is None:
        raise ConfigError("training sets must carry space and metric tags to be saved")
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRAINING_FIELDS)
        for r in data.rows:
            writer.writerow(
                [
                    r.image,
                    data.space.value,
                    data.metric.value,
                    *(f"{v:.12g}" for v in r.features.as_array()),
                    f"{r.k:.12g}",
                ]
            )


def save_predictor_json(predictor: TrainedPredictor, path) -> None:
    doc: dict = {
        "kind": predictor.kind.value,
        "feature_names": list(FEATURE_NAMES),
        "standardization": {
            "mean": predictor.mean.tolist(),
            "scale": predictor.scale.tolist(),
        },
    }
    if predictor.space is not None:
        doc["space"] = predictor.space.value
    if predictor.metric is not None:
        doc["metric"] = predictor.metric.value
    if predictor.kind in (PredictorKind.LINEAR, PredictorKind.CUBIC):
        doc["coefficients"] = predictor.coefficients.tolist()
    else:
        doc.update(
            support=predictor.support.tolist(),
            dual_coefs=predictor.dual_coefs.tolist(),
            bias=predictor.bias,
            bandwidth=predictor.bandwidth,
            epsilon=predictor.epsilon,
            c=predictor.c,
        )
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_predictor_json(path) -> TrainedPredictor:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    try:
        kind = PredictorKind(doc["kind"])
        common = dict(
            kind=kind,
            mean=np.array(doc["standardization"]["mean"], dtype=np.float64),
            scale=np.array(doc["standardization"]["scale"], dtype=np.float64),
            space=ColorSpace(doc["space"]) if "space" in doc else None,
            metric=DistanceMetric(doc["metric"]) if "metric" in doc else None,
        )
        if kind in (PredictorKind.LINEAR, PredictorKind.CUBIC):
            return TrainedPredictor(
                coefficients=np.array(doc["coefficients"], dtype=np.float64), **common
            )
        return TrainedPredictor(
            support=np.array(doc["support"], dtype=np.float64),
            dual_coefs=np.array(doc["dual_coefs"], dtype=np.float64),
            bias=float(doc["bias"]),
            bandwidth=float(doc["bandwidth"]),
            epsilon=float(doc["epsilon"]),
            c=float(doc["c"]),
            **common,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed predictor: {exc}") from exc
