"""Command-line workflows tying the library together.

Every command is deterministic given its inputs and --seed. Reports are
printed as JSON with sorted keys so runs diff cleanly. Exit codes: 0 on
success, 1 on runtime failures (fit, calibration), 2 on usage errors
including unreadable or malformed input files.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click

from .colorspace import ColorSpace
from .errors import DataError, PixelwattError
from .features import extract_features
from .image import load_png, save_png
from .powermodel import (
    fit_from_measurements,
    load_measurements_csv,
    load_model_json,
    save_model_json,
)
from .predictor import (
    PredictorKind,
    cross_validate,
    leave_one_image_out,
    load_predictor_json,
    load_training_csv,
    predict_k,
    save_predictor_json,
    train,
)
from .study import (
    aggregate_mos,
    filter_batches,
    fit_k,
    lambda_lower_bound,
    load_ratings_csv,
    lower_boundary,
)
from .transform import DistanceMetric, TransformConfig, apply

__all__ = ["main"]

_METRICS = click.Choice([m.value for m in DistanceMetric])
_SPACES = click.Choice(["srgb", "lab", "uvw"])
_KINDS = click.Choice([k.value for k in PredictorKind])

_IN_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
_OUT_FILE = click.Path(dir_okay=False, writable=True, path_type=Path)


def _echo_json(doc: dict) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def _domain(fn, *args, **kwargs):
    """Run a library call, mapping bad input data to usage errors (exit 2)
    and every other domain failure to runtime errors (exit 1)."""
    try:
        return fn(*args, **kwargs)
    except DataError as exc:
        raise click.UsageError(str(exc)) from exc
    except (PixelwattError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
def main() -> None:
    """Display power modeling and perception-bounded image transforms."""


@main.command("calibrate")
@click.argument("measurements_csv", type=_IN_FILE)
@click.argument("out_model", type=_OUT_FILE)
def cmd_calibrate(measurements_csv: Path, out_model: Path) -> None:
    """Fit per-channel power parameters from a measurement CSV."""
    samples = _domain(load_measurements_csv, measurements_csv)
    model = _domain(fit_from_measurements, samples)
    save_model_json(model, out_model)
    _echo_json(json.loads(out_model.read_text()))


@main.command("transform")
@click.argument("in_png", type=_IN_FILE)
@click.argument("model_json", type=_IN_FILE)
@click.argument("out_png", type=_OUT_FILE)
@click.option("--metric", type=_METRICS, default="l22", show_default=True)
@click.option("--space", type=_SPACES, default="srgb", show_default=True)
@click.option(
    "--lambda-norm",
    type=click.FloatRange(0.0, 1.0),
    required=True,
    help="Normalized tradeoff strength: 0 saves the most power, 1 the least.",
)
@click.option("--report", type=_OUT_FILE, default=None, help="Also write the result JSON here.")
@click.option("--refit-steps", type=click.IntRange(min=4), default=16, show_default=True)
def cmd_transform(
    in_png: Path,
    model_json: Path,
    out_png: Path,
    metric: str,
    space: str,
    lambda_norm: float,
    report: Path | None,
    refit_steps: int,
) -> None:
    """Apply the power-reducing transform at a fixed lambda."""
    model = _domain(load_model_json, model_json)
    img = _domain(load_png, in_png)
    cfg = _domain(
        TransformConfig,
        metric=DistanceMetric(metric),
        space=ColorSpace(space),
        lambda_norm=lambda_norm,
    )
    result = _domain(apply, cfg, model, img, refit_steps)
    save_png(result.output, out_png)
    doc = {"input": str(in_png), "output": str(out_png), **result.to_dict()}
    if report is not None:
        report.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _echo_json(doc)


@main.command("auto-transform")
@click.argument("in_png", type=_IN_FILE)
@click.argument("model_json", type=_IN_FILE)
@click.argument("predictor_json", type=_IN_FILE)
@click.argument("out_png", type=_OUT_FILE)
@click.option(
    "--target-mos",
    type=float,
    required=True,
    help="Desired mean opinion score from 1 (very annoying) to 5 (imperceptible).",
)
@click.option("--metric", type=_METRICS, default=None, help="Override the predictor's metric tag.")
@click.option("--space", type=_SPACES, default=None, help="Override the predictor's space tag.")
@click.option("--report", type=_OUT_FILE, default=None, help="Also write the result JSON here.")
def cmd_auto_transform(
    in_png: Path,
    model_json: Path,
    predictor_json: Path,
    out_png: Path,
    target_mos: float,
    metric: str | None,
    space: str | None,
    report: Path | None,
) -> None:
    """Pick the weakest lambda predicted to hold a target opinion score.

    The image's features feed the predictor to estimate the exponent k of
    its lower-bound curve; the target score is normalized and pushed through
    that curve to get lambda, and the transform runs there.
    """
    if not 1.0 <= target_mos <= 5.0:
        raise click.UsageError("--target-mos must lie in [1, 5]")
    model = _domain(load_model_json, model_json)
    predictor = _domain(load_predictor_json, predictor_json)

    use_metric = DistanceMetric(metric) if metric else predictor.metric
    use_space = ColorSpace(space) if space else predictor.space
    if use_metric is None or use_space is None:
        raise click.UsageError(
            "the predictor carries no space/metric tags; pass --space and --metric"
        )

    img = _domain(load_png, in_png)
    features = _domain(extract_features, img)
    prediction = _domain(predict_k, predictor, features)
    mos_norm = (target_mos - 1.0) / 4.0
    lam_norm = _domain(lambda_lower_bound, prediction.k, mos_norm)

    cfg = _domain(
        TransformConfig, metric=use_metric, space=use_space, lambda_norm=lam_norm
    )
    result = _domain(apply, cfg, model, img)
    save_png(result.output, out_png)
    doc = {
        "input": str(in_png),
        "output": str(out_png),
        "target_mos": target_mos,
        "mos_norm": mos_norm,
        "predicted_k": prediction.k,
        "k_clamped": prediction.clamped,
        "lambda_norm": lam_norm,
        "space": use_space.value,
        "metric": use_metric.value,
        "features": features.to_dict(),
        **result.to_dict(),
    }
    if report is not None:
        report.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _echo_json(doc)


@main.command("fit-lb")
@click.argument("ratings_csv", type=_IN_FILE)
@click.argument("out_json", type=_OUT_FILE)
@click.option("--image", default=None, help="Restrict the fit to one image.")
@click.option("--metric", type=_METRICS, default=None)
@click.option("--space", type=_SPACES, default=None)
@click.option("--identical-min", type=click.IntRange(1, 5), default=5, show_default=True)
@click.option("--black-max", type=click.IntRange(1, 5), default=1, show_default=True)
def cmd_fit_lb(
    ratings_csv: Path,
    out_json: Path,
    image: str | None,
    metric: str | None,
    space: str | None,
    identical_min: int,
    black_max: int,
) -> None:
    """Fit the lambda lower-bound exponent k from a ratings CSV.

    Pipeline: drop batches whose control pairs were misjudged, aggregate
    mean opinion scores, take the lower boundary staircase, fit k.
    """
    records = _domain(load_ratings_csv, ratings_csv)
    records = _domain(
        filter_batches, records, identical_min=identical_min, black_max=black_max
    )
    if image is not None:
        records = [r for r in records if r.image == image]
    if metric is not None:
        records = [r for r in records if r.metric == DistanceMetric(metric)]
    if space is not None:
        records = [r for r in records if r.space == ColorSpace(space)]
    if not records:
        raise click.UsageError("no ratings left after filtering")
    entries = _domain(aggregate_mos, records)
    boundary = _domain(lower_boundary, entries)
    fit = _domain(fit_k, boundary)
    doc = {
        "k": fit.k,
        "rmse": fit.rmse,
        "n_points": fit.n_points,
        "boundary": [
            {"mos_norm": p.mos_norm, "lambda_norm": p.lambda_norm} for p in boundary
        ],
        "n_ratings": len(records),
    }
    out_json.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _echo_json(doc)


@main.command("train")
@click.argument("training_csv", type=_IN_FILE)
@click.argument("out_predictor", type=_OUT_FILE)
@click.option("--model-kind", type=_KINDS, default="svr", show_default=True)
@click.option("--metric", type=_METRICS, default=None, help="Select rows of one metric.")
@click.option("--space", type=_SPACES, default=None, help="Select rows of one space.")
@click.option("--epsilon", type=click.FloatRange(min=0), default=0.05, show_default=True)
@click.option("--c", "box_c", type=click.FloatRange(min=0, min_open=True), default=10.0, show_default=True)
@click.option("--bandwidth", type=click.FloatRange(min=0, min_open=True), default=None)
def cmd_train(
    training_csv: Path,
    out_predictor: Path,
    model_kind: str,
    metric: str | None,
    space: str | None,
    epsilon: float,
    box_c: float,
    bandwidth: float | None,
) -> None:
    """Train a k predictor from a feature/target CSV."""
    data = _domain(
        load_training_csv,
        training_csv,
        space=ColorSpace(space) if space else None,
        metric=DistanceMetric(metric) if metric else None,
    )
    kind = PredictorKind(model_kind)
    kwargs = {}
    if kind == PredictorKind.SVR:
        kwargs = {"epsilon": epsilon, "c": box_c, "bandwidth": bandwidth}
    predictor = _domain(train, data, kind, **kwargs)
    save_predictor_json(predictor, out_predictor)
    _echo_json(
        {
            "kind": kind.value,
            "rows": len(data.rows),
            "space": data.space.value if data.space else None,
            "metric": data.metric.value if data.metric else None,
            "out": str(out_predictor),
        }
    )


@main.command("evaluate")
@click.argument("training_csv", type=_IN_FILE)
@click.option("--model-kind", type=_KINDS, default="svr", show_default=True)
@click.option("--metric", type=_METRICS, default=None)
@click.option("--space", type=_SPACES, default=None)
@click.option("--folds", type=click.IntRange(min=2), default=5, show_default=True)
@click.option("--leave-out", default=None, help="Score one held-out image instead of k-fold CV.")
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_evaluate(
    training_csv: Path,
    model_kind: str,
    metric: str | None,
    space: str | None,
    folds: int,
    leave_out: str | None,
    seed: int,
) -> None:
    """Cross-validate a predictor kind, or score one leave-one-image-out split."""
    data = _domain(
        load_training_csv,
        training_csv,
        space=ColorSpace(space) if space else None,
        metric=DistanceMetric(metric) if metric else None,
    )
    kind = PredictorKind(model_kind)
    if leave_out is not None:
        result = _domain(leave_one_image_out, data, leave_out, kind)
        _echo_json(
            {
                "image": result.image,
                "predicted_k": result.predicted_k,
                "true_k": result.true_k,
                "squared_error": result.squared_error,
            }
        )
        return
    report = _domain(cross_validate, data, kind, folds=folds, seed=seed)
    _echo_json(
        {
            "kind": report.kind.value,
            "folds": report.folds,
            "fold_mses": list(report.fold_mses),
            "mse_mean": report.mse_mean,
            "mse_variance": report.mse_variance,
            "k_range": report.k_range,
            "pct_error": report.pct_error,
        }
    )


@main.command("serve-study")
@click.argument("manifest_json", type=_IN_FILE)
@click.option("--port", type=click.IntRange(1, 65535), default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--out", "out_csv", type=_OUT_FILE, default=Path("ratings.csv"), show_default=True)
@click.option("--assets-dir", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None)
@click.option("--seed", type=int, default=None, help="Override the manifest seed.")
def cmd_serve_study(
    manifest_json: Path,
    port: int,
    host: str,
    out_csv: Path,
    assets_dir: Path | None,
    seed: int | None,
) -> None:
    """Serve the rating study API (and optionally the browser harness)."""
    import uvicorn

    from .server import create_app, load_manifest

    manifest = _domain(load_manifest, manifest_json)
    if seed is not None:
        manifest = dataclasses.replace(manifest, seed=seed)
    app = _domain(create_app, manifest, out_csv, assets_dir)
    click.echo(f"serving study on http://{host}:{port}, ratings -> {out_csv}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
