import json

import numpy as np
import pytest
from click.testing import CliRunner

from pixelwatt.cli import main
from pixelwatt.colorspace import ColorSpace
from pixelwatt.features import FeatureVector
from pixelwatt.image import ImageBuffer, save_png
from pixelwatt.powermodel import save_model_json
from pixelwatt.predictor import (
    TrainingRow,
    TrainingSet,
    save_training_csv,
)
from pixelwatt.study import (
    ControlKind,
    K_MAX,
    RatingRecord,
    lambda_lower_bound,
    save_ratings_csv,
)
from pixelwatt.transform import DistanceMetric

TRUE = {"r": (1.9, 0.05, 0.01), "g": (2.0, 0.06, 0.02), "b": (2.2, 0.04, 0.03)}


@pytest.fixture
def runner():
    return CliRunner()


def write_measurements(path, channels=("r", "g", "b")):
    lines = ["channel,code,power_w"]
    for ch in channels:
        a, b, g0 = TRUE[ch]
        for code in np.linspace(0, 255, 18).round():
            v = code / 255.0
            lines.append(f"{ch},{code:.0f},{0.5 * a * v * v + b * v + g0:.12g}")
    path.write_text("\n".join(lines) + "\n")


def test_calibrate_recovers_model(runner, tmp_path):
    csv_path = tmp_path / "meas.csv"
    write_measurements(csv_path)
    out = tmp_path / "model.json"
    result = runner.invoke(main, ["calibrate", str(csv_path), str(out)])
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc == json.loads(out.read_text())
    for entry in doc["channels"]:
        a, b, g0 = TRUE[entry["channel"]]
        assert entry["alpha"] == pytest.approx(a, abs=1e-8)
        assert entry["beta"] == pytest.approx(b, abs=1e-8)
        assert entry["gamma"] == pytest.approx(g0, abs=1e-8)


def test_calibrate_empty_csv_is_usage_error(runner, tmp_path):
    csv_path = tmp_path / "empty.csv"
    csv_path.write_text("channel,code,power_w\n")
    result = runner.invoke(main, ["calibrate", str(csv_path), str(tmp_path / "m.json")])
    assert result.exit_code == 2
    assert "empty.csv" in result.output


def test_calibrate_missing_channel_is_runtime_error(runner, tmp_path):
    csv_path = tmp_path / "partial.csv"
    write_measurements(csv_path, channels=("r", "g"))
    result = runner.invoke(main, ["calibrate", str(csv_path), str(tmp_path / "m.json")])
    assert result.exit_code == 1
    assert "'b'" in result.output


@pytest.fixture
def model_json(tmp_path, quad_model):
    path = tmp_path / "model.json"
    save_model_json(quad_model, path)
    return path


@pytest.fixture
def white_png(tmp_path):
    path = tmp_path / "white.png"
    save_png(ImageBuffer.white(4, 4), path)
    return path


def run_transform(runner, tmp_path, white_png, model_json, lam, *extra):
    out = tmp_path / f"out_{lam}.png"
    result = runner.invoke(
        main,
        ["transform", str(white_png), str(model_json), str(out),
         "--lambda-norm", str(lam), *extra],
    )
    assert result.exit_code == 0, result.output
    return out, json.loads(result.output)


def test_transform_savings_anchors(runner, tmp_path, white_png, model_json):
    _, weak = run_transform(runner, tmp_path, white_png, model_json, 1.0)
    _, strong = run_transform(runner, tmp_path, white_png, model_json, 0.0)
    assert weak["saving_pct"] == pytest.approx(5.0, abs=0.5)
    assert strong["saving_pct"] == pytest.approx(60.0, abs=0.5)
    assert weak["clamped_pixels"] == 0
    assert weak["input"].endswith("white.png")


def test_transform_deterministic_bytes(runner, tmp_path, white_png, model_json):
    out1, doc1 = run_transform(runner, tmp_path, white_png, model_json, 0.35)
    first = out1.read_bytes()
    out2, doc2 = run_transform(runner, tmp_path, white_png, model_json, 0.35)
    assert out2.read_bytes() == first
    assert doc1["power_out_w"] == doc2["power_out_w"]


def test_transform_report_file(runner, tmp_path, white_png, model_json):
    report = tmp_path / "report.json"
    _, doc = run_transform(
        runner, tmp_path, white_png, model_json, 0.5, "--report", str(report)
    )
    assert json.loads(report.read_text()) == doc


def test_transform_rejects_out_of_range_lambda(runner, tmp_path, white_png, model_json):
    result = runner.invoke(
        main,
        ["transform", str(white_png), str(model_json), str(tmp_path / "x.png"),
         "--lambda-norm", "1.5"],
    )
    assert result.exit_code == 2


def linear_predictor_json(path, intercept, space="srgb", metric="l22", tags=True):
    doc = {
        "kind": "linear",
        "feature_names": ["mean_lum", "std_lum", "std_sat", "std_hue"],
        "standardization": {"mean": [0, 0, 0, 0], "scale": [1, 1, 1, 1]},
        "coefficients": [intercept, 0, 0, 0, 0],
    }
    if tags:
        doc["space"] = space
        doc["metric"] = metric
    path.write_text(json.dumps(doc))


def test_auto_transform_target_endpoints(runner, tmp_path, white_png, model_json):
    predictor = tmp_path / "pred.json"
    linear_predictor_json(predictor, intercept=100.0)  # clamps to the k ceiling

    out = tmp_path / "auto.png"
    gentle = runner.invoke(
        main,
        ["auto-transform", str(white_png), str(model_json), str(predictor), str(out),
         "--target-mos", "5.0"],
    )
    assert gentle.exit_code == 0, gentle.output
    doc = json.loads(gentle.output)
    assert doc["k_clamped"] is True
    assert doc["predicted_k"] == pytest.approx(K_MAX)
    assert doc["lambda_norm"] == pytest.approx(1.0, abs=1e-12)
    assert doc["saving_pct"] == pytest.approx(5.0, abs=0.5)

    harsh = runner.invoke(
        main,
        ["auto-transform", str(white_png), str(model_json), str(predictor), str(out),
         "--target-mos", "1.0"],
    )
    doc = json.loads(harsh.output)
    assert doc["lambda_norm"] == 0.0
    assert doc["mos_norm"] == 0.0
    assert doc["saving_pct"] == pytest.approx(60.0, abs=0.5)
    assert set(doc["features"]) == {"mean_lum", "std_lum", "std_sat", "std_hue"}


def test_auto_transform_usage_errors(runner, tmp_path, white_png, model_json):
    predictor = tmp_path / "pred.json"
    linear_predictor_json(predictor, intercept=2.0)
    out = str(tmp_path / "x.png")

    result = runner.invoke(
        main,
        ["auto-transform", str(white_png), str(model_json), str(predictor), out,
         "--target-mos", "6.0"],
    )
    assert result.exit_code == 2
    assert "target-mos" in result.output

    untagged = tmp_path / "untagged.json"
    linear_predictor_json(untagged, intercept=2.0, tags=False)
    result = runner.invoke(
        main,
        ["auto-transform", str(white_png), str(model_json), str(untagged), out,
         "--target-mos", "4.0"],
    )
    assert result.exit_code == 2
    assert "tags" in result.output


def make_rating_batches(path):
    """Two clean raters over two payload stimuli whose boundary fits k=2."""
    lam_mid = lambda_lower_bound(2.0, 0.5)
    lam_top = lambda_lower_bound(2.0, 1.0)
    records = []
    for participant, scores in (("p1", (3, 5)), ("p2", (3, 5))):
        records.append(RatingRecord(participant, "b1", "alley", DistanceMetric.L22,
                                    ColorSpace.SRGB, lam_mid, scores[0]))
        records.append(RatingRecord(participant, "b1", "alley", DistanceMetric.L22,
                                    ColorSpace.SRGB, lam_top, scores[1]))
        records.append(RatingRecord(participant, "b1", "alley", DistanceMetric.L22,
                                    ColorSpace.SRGB, 1.0, 5, ControlKind.IDENTICAL))
        records.append(RatingRecord(participant, "b1", "alley", DistanceMetric.L22,
                                    ColorSpace.SRGB, 0.0, 1, ControlKind.BLACK))
    save_ratings_csv(records, path)


def test_fit_lb_recovers_exponent(runner, tmp_path):
    ratings = tmp_path / "ratings.csv"
    make_rating_batches(ratings)
    out = tmp_path / "lb.json"
    result = runner.invoke(main, ["fit-lb", str(ratings), str(out)])
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc["k"] == pytest.approx(2.0, abs=1e-5)
    assert doc["n_points"] == 2
    assert doc["n_ratings"] == 4
    assert [p["mos_norm"] for p in doc["boundary"]] == [0.5, 1.0]
    assert json.loads(out.read_text()) == doc


def test_fit_lb_filter_to_nothing(runner, tmp_path):
    ratings = tmp_path / "ratings.csv"
    make_rating_batches(ratings)
    result = runner.invoke(
        main, ["fit-lb", str(ratings), str(tmp_path / "x.json"), "--image", "ghost"]
    )
    assert result.exit_code == 2
    assert "no ratings left" in result.output


@pytest.fixture
def training_csv(tmp_path):
    rng = np.random.default_rng(5)
    rows = []
    for i in range(12):
        f = FeatureVector(*rng.uniform(0.05, 0.95, size=4))
        rows.append(TrainingRow(f"img{i}", f, 1.0 + 2.0 * f.mean_lum))
    data = TrainingSet(tuple(rows), space=ColorSpace.SRGB, metric=DistanceMetric.L22)
    path = tmp_path / "train.csv"
    save_training_csv(data, path)
    return path


def test_train_writes_predictor(runner, tmp_path, training_csv):
    out = tmp_path / "pred.json"
    result = runner.invoke(
        main, ["train", str(training_csv), str(out), "--model-kind", "linear"]
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc == {
        "kind": "linear",
        "rows": 12,
        "space": "srgb",
        "metric": "l22",
        "out": str(out),
    }
    saved = json.loads(out.read_text())
    assert saved["kind"] == "linear"


def test_evaluate_cross_validation(runner, training_csv):
    result = runner.invoke(
        main, ["evaluate", str(training_csv), "--model-kind", "linear", "--folds", "4"]
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc["folds"] == 4
    assert len(doc["fold_mses"]) == 4
    assert doc["mse_mean"] < 1e-8  # the law is exactly linear
    assert doc["pct_error"] < 1e-6


def test_evaluate_leave_one_out(runner, training_csv):
    result = runner.invoke(
        main,
        ["evaluate", str(training_csv), "--model-kind", "linear", "--leave-out", "img3"],
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc["image"] == "img3"
    assert doc["squared_error"] < 1e-8

    missing = runner.invoke(
        main,
        ["evaluate", str(training_csv), "--model-kind", "linear", "--leave-out", "ghost"],
    )
    assert missing.exit_code == 2


def test_serve_study_rejects_stale_csv_before_binding(runner, tmp_path, model_json, white_png):
    manifest = tmp_path / "study.json"
    manifest.write_text(json.dumps({
        "model": "model.json",
        "images": ["white.png"],
        "space": "srgb",
        "metric": "l22",
        "lambda_grid": [0.5],
    }))
    stale = tmp_path / "stale.csv"
    stale.write_text("wrong,header\n")
    result = runner.invoke(
        main, ["serve-study", str(manifest), "--out", str(stale)]
    )
    assert result.exit_code == 2
    assert "header" in result.output


def test_help_lists_commands(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for name in ("calibrate", "transform", "auto-transform", "fit-lb",
                 "train", "evaluate", "serve-study"):
        assert name in result.output
