import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from pixelwatt.colorspace import ColorSpace
from pixelwatt.errors import ConfigError, DataError
from pixelwatt.image import ImageBuffer, save_png
from pixelwatt.powermodel import save_model_json
from pixelwatt.server import (
    CONTROLS_PER_BATCH,
    PACING_SECONDS,
    StudyManifest,
    create_app,
    load_manifest,
)
from pixelwatt.study import (
    ControlKind,
    aggregate_mos,
    filter_batches,
    load_ratings_csv,
)
from pixelwatt.transform import DistanceMetric


@pytest.fixture
def study_dir(tmp_path, quad_model):
    rng = np.random.default_rng(42)
    for name in ("alley.png", "harbor.png"):
        img = ImageBuffer(rng.uniform(0.1, 0.9, size=(6, 8, 3)), ColorSpace.SRGB)
        save_png(img, tmp_path / name)
    save_model_json(quad_model, tmp_path / "model.json")
    manifest = {
        "model": "model.json",
        "images": ["alley.png", "harbor.png"],
        "space": "srgb",
        "metric": "l22",
        "lambda_grid": [0.2, 0.5, 0.8],
        "batch_size": 6,
        "raters_per_batch": 2,
        "seed": 7,
    }
    (tmp_path / "study.json").write_text(json.dumps(manifest))
    return tmp_path


@pytest.fixture
def client(study_dir):
    manifest = load_manifest(study_dir / "study.json")
    app = create_app(manifest, study_dir / "ratings.csv")
    return TestClient(app)


def test_manifest_resolves_relative_paths(study_dir):
    manifest = load_manifest(study_dir / "study.json")
    assert manifest.model_path == study_dir / "model.json"
    assert all(p.parent == study_dir for p in manifest.image_paths)
    assert manifest.lambda_grid == (0.2, 0.5, 0.8)


def test_manifest_defaults(study_dir):
    (study_dir / "min.json").write_text(
        json.dumps({"model": "model.json", "images": ["alley.png"],
                    "space": "srgb", "metric": "l22"})
    )
    manifest = load_manifest(study_dir / "min.json")
    assert manifest.batch_size == 20
    assert manifest.raters_per_batch == 5
    assert len(manifest.lambda_grid) == 20


def test_manifest_errors(study_dir):
    bad = study_dir / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(DataError, match="not valid JSON"):
        load_manifest(bad)

    missing_img = study_dir / "missing.json"
    missing_img.write_text(
        json.dumps({"model": "model.json", "images": ["ghost.png"],
                    "space": "srgb", "metric": "l22"})
    )
    with pytest.raises(DataError, match="ghost.png"):
        load_manifest(missing_img)

    with pytest.raises(FileNotFoundError):
        load_manifest(study_dir / "absent.json")


def test_manifest_validation(study_dir):
    kwargs = dict(
        model_path=study_dir / "model.json",
        image_paths=(study_dir / "alley.png",),
        space=ColorSpace.SRGB,
        metric=DistanceMetric.L22,
        lambda_grid=(0.5,),
        batch_size=1,
        raters_per_batch=1,
        seed=0,
    )
    StudyManifest(**kwargs)  # the baseline is valid
    with pytest.raises(ConfigError):
        StudyManifest(**{**kwargs, "image_paths": ()})
    with pytest.raises(ConfigError):
        StudyManifest(**{**kwargs, "batch_size": 0})
    with pytest.raises(ConfigError):
        StudyManifest(**{**kwargs, "lambda_grid": (1.2,)})


def test_session_descriptor_shape(client):
    doc = client.get("/api/session", params={"participant": "alice"}).json()
    assert doc["participant"] == "alice"
    assert doc["pair_count"] == 6 + CONTROLS_PER_BATCH
    assert doc["scored_count"] == 0
    assert doc["time_limit_s"] == PACING_SECONDS
    assert doc["score_labels"] == {
        "5": "Imperceptible",
        "4": "Perceptible, but not annoying",
        "3": "Slightly annoying",
        "2": "Annoying",
        "1": "Very annoying",
    }
    assert len(doc["pairs"]) == doc["pair_count"]
    # control pairs must be indistinguishable from the payload in the wire shape
    keysets = {tuple(sorted(p)) for p in doc["pairs"]}
    assert len(keysets) == 1
    assert keysets.pop() == ("index", "left", "original_url", "scored", "transformed_url")
    assert all(p["left"] in ("original", "transformed") for p in doc["pairs"])


def test_session_is_idempotent(client):
    first = client.get("/api/session", params={"participant": "alice"}).json()
    second = client.get("/api/session", params={"participant": "alice"}).json()
    assert first == second


def test_session_requires_participant(client):
    assert client.get("/api/session").status_code == 400


def test_pair_images_served(client):
    doc = client.get("/api/session", params={"participant": "alice"}).json()
    pair = doc["pairs"][0]
    orig = client.get(pair["original_url"])
    trans = client.get(pair["transformed_url"])
    assert orig.status_code == trans.status_code == 200
    assert orig.headers["content-type"] == "image/png"
    for payload in (orig.content, trans.content):
        img = Image.open(io.BytesIO(payload))
        assert img.size == (8, 6)
    assert client.get("/api/pair/99/original", params={"participant": "alice"}).status_code == 404


def test_hidden_controls_present_and_correct(client):
    doc = client.get("/api/session", params={"participant": "alice"}).json()
    identical, black = 0, 0
    for pair in doc["pairs"]:
        orig = client.get(pair["original_url"]).content
        trans = client.get(pair["transformed_url"]).content
        if trans == orig:
            identical += 1
        else:
            img = np.asarray(Image.open(io.BytesIO(trans)).convert("RGB"))
            if img.max() == 0:
                black += 1
    assert identical == 1
    assert black == 1


def score_all(client, participant):
    doc = client.get("/api/session", params={"participant": participant}).json()
    last = None
    for pair in doc["pairs"]:
        last = client.post(
            "/api/score",
            json={"participant": participant, "pair": pair["index"], "score": 4},
        ).json()
    return doc, last


def test_scoring_flow_and_completion(client, study_dir):
    doc, last = score_all(client, "alice")
    assert last["completed"] is True
    assert last["scored_count"] == last["pair_count"] == doc["pair_count"]

    refreshed = client.get("/api/session", params={"participant": "alice"}).json()
    assert refreshed["scored_count"] == doc["pair_count"]
    assert all(p["scored"] for p in refreshed["pairs"])

    records = load_ratings_csv(study_dir / "ratings.csv")
    assert len(records) == doc["pair_count"]
    assert {r.control for r in records} == {
        ControlKind.NONE,
        ControlKind.IDENTICAL,
        ControlKind.BLACK,
    }


def test_score_validation_and_duplicates(client, study_dir):
    client.get("/api/session", params={"participant": "alice"})
    ok = client.post("/api/score", json={"participant": "alice", "pair": 0, "score": 3})
    assert ok.status_code == 200

    dup = client.post("/api/score", json={"participant": "alice", "pair": 0, "score": 5})
    assert dup.status_code == 409

    cases = [
        {"participant": "alice", "pair": 1, "score": 7},
        {"participant": "alice", "pair": 1, "score": True},
        {"participant": "alice", "pair": "x", "score": 3},
        {"participant": "alice", "score": 3},
        {"pair": 1, "score": 3},
    ]
    for body in cases:
        assert client.post("/api/score", json=body).status_code == 400
    assert client.post("/api/score", content=b"nope").status_code == 400

    # only the accepted score reached the log
    rows = (study_dir / "ratings.csv").read_text().strip().splitlines()
    assert len(rows) == 2  # header + one accepted row


def test_raters_share_batches_in_rotation(study_dir):
    # batch_size 3 splits the 6-pair pool into two batches
    manifest = load_manifest(study_dir / "study.json")
    manifest = StudyManifest(**{
        **{f: getattr(manifest, f) for f in (
            "model_path", "image_paths", "space", "metric",
            "lambda_grid", "raters_per_batch", "seed",
        )},
        "batch_size": 3,
    })
    client = TestClient(create_app(manifest, study_dir / "rot.csv"))
    batches = [
        client.get("/api/session", params={"participant": p}).json()["batch"]
        for p in ("a", "b", "c", "d", "e")
    ]
    # raters_per_batch=2 over two batches: pairs of arrivals fill each batch
    # in turn, then the rotation wraps
    assert batches == ["b1", "b1", "b2", "b2", "b1"]
    a = client.get("/api/session", params={"participant": "a"}).json()
    assert a["pair_count"] == 5


def test_same_batch_same_pairs_placement_free(client, study_dir):
    score_all(client, "a")
    score_all(client, "b")
    records = load_ratings_csv(study_dir / "ratings.csv")
    by_participant = {}
    for r in records:
        by_participant.setdefault(r.participant, []).append(
            (r.image, r.lambda_norm, r.control.value)
        )
    assert sorted(by_participant["a"]) == sorted(by_participant["b"])


def test_full_pipeline_from_served_study(client, study_dir):
    # honest raters: 5 on identical, 1 on black, middling elsewhere
    for participant in ("a", "b"):
        doc = client.get("/api/session", params={"participant": participant}).json()
        for pair in doc["pairs"]:
            orig = client.get(pair["original_url"]).content
            trans = client.get(pair["transformed_url"]).content
            if trans == orig:
                score = 5
            elif np.asarray(Image.open(io.BytesIO(trans)).convert("RGB")).max() == 0:
                score = 1
            else:
                score = 3
            client.post(
                "/api/score",
                json={"participant": participant, "pair": pair["index"], "score": score},
            )
    records = load_ratings_csv(study_dir / "ratings.csv")
    kept = filter_batches(records)
    assert len(kept) == 12  # both raters pass their controls
    entries = aggregate_mos(kept)
    assert all(e.n_ratings == 2 for e in entries)


def test_existing_csv_header_checked(study_dir):
    manifest = load_manifest(study_dir / "study.json")
    stale = study_dir / "stale.csv"
    stale.write_text("totally,different,header\n")
    with pytest.raises(DataError, match="header"):
        create_app(manifest, stale)


def test_assets_dir_served(study_dir):
    manifest = load_manifest(study_dir / "study.json")
    site = study_dir / "site"
    site.mkdir()
    (site / "index.html").write_text("<!doctype html><title>study</title>")
    app = create_app(manifest, study_dir / "r.csv", assets_dir=site)
    client = TestClient(app)
    page = client.get("/")
    assert page.status_code == 200
    assert "study" in page.text
    # the API still wins over the static mount
    assert client.get("/api/session", params={"participant": "x"}).status_code == 200

    with pytest.raises(ConfigError):
        create_app(manifest, study_dir / "r.csv", assets_dir=study_dir / "ghost")
