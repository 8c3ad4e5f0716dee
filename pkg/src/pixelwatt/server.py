"""HTTP API for running the rating study locally.

The server deals out batches of image pairs to participants, serves the
original and transformed PNGs, and appends validated scores to a ratings
CSV that the study module reads back verbatim. Each participant gets one
session; raters_per_batch consecutive participants share a batch so every
pair collects multiple opinions.

Batch composition, control placement, and left/right presentation order are
all derived from seeds recorded in the manifest, so a rerun deals the same
study. Two control pairs hide in every batch: one whose transformed side is
the untouched original and one whose transformed side is solid black.
Descriptors never reveal which pairs they are.
"""

from __future__ import annotations

import csv
import json
import math
import threading
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles

from .colorspace import ColorSpace
from .errors import ConfigError, DataError
from .image import ImageBuffer, load_png, png_bytes
from .powermodel import PowerModel, load_model_json
from .study import _CSV_FIELDS, SCORE_LABELS, ControlKind
from .transform import LAMBDA_GRID, DistanceMetric, TransformConfig, apply

__all__ = ["StudyManifest", "load_manifest", "create_app"]

PACING_SECONDS = 20  # advisory per-pair budget shown by the UI, never enforced
CONTROLS_PER_BATCH = 2


@dataclass(frozen=True)
class StudyManifest:
    model_path: Path
    image_paths: tuple[Path, ...]
    space: ColorSpace
    metric: DistanceMetric
    lambda_grid: tuple[float, ...]
    batch_size: int
    raters_per_batch: int
    seed: int

    def __post_init__(self) -> None:
        if not self.image_paths:
            raise ConfigError("the manifest must list at least one image")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.raters_per_batch < 1:
            raise ConfigError("raters_per_batch must be at least 1")
        if not self.lambda_grid:
            raise ConfigError("lambda_grid must not be empty")
        for lam in self.lambda_grid:
            if not (0.0 <= lam <= 1.0) or not math.isfinite(lam):
                raise ConfigError(f"normalized lambda {lam} outside [0, 1]")


def load_manifest(path) -> StudyManifest:
    """Read a study manifest; relative paths resolve against the manifest."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    base = path.parent
    try:
        manifest = StudyManifest(
            model_path=base / doc["model"],
            image_paths=tuple(base / p for p in doc["images"]),
            space=ColorSpace(doc["space"]),
            metric=DistanceMetric(doc["metric"]),
            lambda_grid=tuple(float(v) for v in doc.get("lambda_grid", LAMBDA_GRID)),
            batch_size=int(doc.get("batch_size", 20)),
            raters_per_batch=int(doc.get("raters_per_batch", 5)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed manifest: {exc}") from exc
    for img in manifest.image_paths:
        if not img.is_file():
            raise DataError(f"{path}: listed image not found: {img}")
    if not manifest.model_path.is_file():
        raise DataError(f"{path}: model file not found: {manifest.model_path}")
    return manifest


@dataclass(frozen=True)
class _Slot:
    """One pair within a batch; control slots carry their kind."""

    image: Path
    lambda_norm: float
    control: ControlKind


@dataclass
class _Session:
    participant: str
    batch_index: int
    placements: tuple[str, ...]  # "original" or "transformed" on the left
    scored: dict[int, int] = field(default_factory=dict)


def _build_batches(manifest: StudyManifest) -> list[list[_Slot]]:
    """Deal the image x lambda pool into seeded batches with controls injected.

    The pool shuffle uses the manifest seed alone; per-batch control sources
    and positions mix in the batch index, so adding a batch never reshuffles
    the others' controls.
    """
    rng = np.random.default_rng(manifest.seed)
    pool = [
        (img, lam) for img in manifest.image_paths for lam in manifest.lambda_grid
    ]
    order = rng.permutation(len(pool))
    batches: list[list[_Slot]] = []
    for start in range(0, len(pool), manifest.batch_size):
        chunk = [pool[i] for i in order[start : start + manifest.batch_size]]
        batch_rng = np.random.default_rng([manifest.seed, len(batches), 0x5707])
        slots = [
            _Slot(image=img, lambda_norm=lam, control=ControlKind.NONE)
            for img, lam in chunk
        ]
        # Identical scores 5 and black scores 1 from any honest rater; their
        # lambda_norm fields are bookkeeping only and filtered out downstream.
        controls = [
            _Slot(
                image=manifest.image_paths[
                    int(batch_rng.integers(len(manifest.image_paths)))
                ],
                lambda_norm=1.0,
                control=ControlKind.IDENTICAL,
            ),
            _Slot(
                image=manifest.image_paths[
                    int(batch_rng.integers(len(manifest.image_paths)))
                ],
                lambda_norm=0.0,
                control=ControlKind.BLACK,
            ),
        ]
        for control in controls:
            pos = int(batch_rng.integers(len(slots) + 1))
            slots.insert(pos, control)
        batches.append(slots)
    return batches


class _StudyState:
    def __init__(self, manifest: StudyManifest, out_csv: Path):
        self.manifest = manifest
        self.out_csv = out_csv
        self.model: PowerModel = load_model_json(manifest.model_path)
        if self.model.space != ColorSpace.SRGB:
            raise ConfigError("the study model must be calibrated in sRGB")
        self.batches = _build_batches(manifest)
        self.sessions: dict[str, _Session] = {}
        self.lock = threading.Lock()
        self._original_cache: dict[Path, bytes] = {}
        self._transform_cache: dict[tuple[Path, float], bytes] = {}
        self._prepare_csv()

    def _prepare_csv(self) -> None:
        header = ",".join(_CSV_FIELDS)
        if self.out_csv.exists() and self.out_csv.stat().st_size > 0:
            first = self.out_csv.read_text().splitlines()[0]
            if first != header:
                raise DataError(
                    f"{self.out_csv}: existing file has header {first!r}, expected {header!r}"
                )
            return
        self.out_csv.parent.mkdir(parents=True, exist_ok=True)
        self.out_csv.write_text(header + "\n")

    def session_for(self, participant: str) -> _Session:
        """Find or create the participant's session (idempotent)."""
        with self.lock:
            if participant not in self.sessions:
                ordinal = len(self.sessions)
                batch_index = (ordinal // self.manifest.raters_per_batch) % len(
                    self.batches
                )
                placement_rng = np.random.default_rng(
                    [self.manifest.seed, zlib.crc32(participant.encode("utf-8"))]
                )
                n = len(self.batches[batch_index])
                placements = tuple(
                    "original" if placement_rng.integers(2) == 0 else "transformed"
                    for _ in range(n)
                )
                self.sessions[participant] = _Session(
                    participant=participant,
                    batch_index=batch_index,
                    placements=placements,
                )
            return self.sessions[participant]

    def slots_for(self, session: _Session) -> list[_Slot]:
        return self.batches[session.batch_index]

    def original_bytes(self, path: Path) -> bytes:
        with self.lock:
            if path not in self._original_cache:
                self._original_cache[path] = path.read_bytes()
            return self._original_cache[path]

    def transformed_bytes(self, slot: _Slot) -> bytes:
        if slot.control == ControlKind.IDENTICAL:
            return self.original_bytes(slot.image)
        if slot.control == ControlKind.BLACK:
            src = load_png(slot.image)
            return png_bytes(ImageBuffer.black(src.width, src.height))
        key = (slot.image, slot.lambda_norm)
        with self.lock:
            cached = self._transform_cache.get(key)
        if cached is not None:
            return cached
        cfg = TransformConfig(
            metric=self.manifest.metric,
            space=self.manifest.space,
            lambda_norm=slot.lambda_norm,
        )
        result = apply(cfg, self.model, load_png(slot.image))
        data = png_bytes(result.output)
        with self.lock:
            self._transform_cache[key] = data
        return data

    def record_score(self, session: _Session, pair: int, score: int) -> int:
        """Append one CSV row; returns the session's scored count."""
        slot = self.slots_for(session)[pair]
        with self.lock:
            if pair in session.scored:
                raise KeyError(pair)
            session.scored[pair] = score
            with open(self.out_csv, "a", newline="") as fh:
                csv.writer(fh).writerow(
                    [
                        session.participant,
                        f"b{session.batch_index + 1}",
                        slot.image.name,
                        self.manifest.metric.value,
                        self.manifest.space.value,
                        f"{slot.lambda_norm:.12g}",
                        score,
                        slot.control.value,
                    ]
                )
            return len(session.scored)


def _descriptor(state: _StudyState, session: _Session) -> dict:
    slots = state.slots_for(session)
    q = f"participant={session.participant}"
    return {
        "participant": session.participant,
        "batch": f"b{session.batch_index + 1}",
        "pair_count": len(slots),
        "scored_count": len(session.scored),
        "time_limit_s": PACING_SECONDS,
        "score_labels": {str(k): v for k, v in SCORE_LABELS.items()},
        "pairs": [
            {
                "index": i,
                "original_url": f"/api/pair/{i}/original?{q}",
                "transformed_url": f"/api/pair/{i}/transformed?{q}",
                "left": session.placements[i],
                "scored": i in session.scored,
            }
            for i in range(len(slots))
        ],
    }


def create_app(
    manifest: StudyManifest, out_csv, assets_dir=None
) -> FastAPI:
    """Build the study API application.

    assets_dir, when given, is served as the site root so the browser harness
    and the API share an origin.
    """
    state = _StudyState(manifest, Path(out_csv))
    app = FastAPI(title="pixelwatt study")

    def _require_participant(participant: str | None) -> _Session:
        if not participant:
            raise HTTPException(400, "participant query parameter is required")
        return state.session_for(participant)

    def _slot_or_404(session: _Session, index: int) -> _Slot:
        slots = state.slots_for(session)
        if not 0 <= index < len(slots):
            raise HTTPException(404, f"pair {index} does not exist")
        return slots[index]

    @app.get("/api/session")
    def get_session(participant: str | None = None) -> dict:
        return _descriptor(state, _require_participant(participant))

    @app.get("/api/pair/{index}/original")
    def get_original(index: int, participant: str | None = None) -> Response:
        session = _require_participant(participant)
        slot = _slot_or_404(session, index)
        return Response(state.original_bytes(slot.image), media_type="image/png")

    @app.get("/api/pair/{index}/transformed")
    def get_transformed(index: int, participant: str | None = None) -> Response:
        session = _require_participant(participant)
        slot = _slot_or_404(session, index)
        return Response(state.transformed_bytes(slot), media_type="image/png")

    @app.post("/api/score")
    async def post_score(request: Request) -> dict:
        # Validation is by hand so malformed input yields 400, not a
        # framework-shaped 422 the harness would have to special-case.
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(400, "request body must be JSON")
        if not isinstance(body, dict):
            raise HTTPException(400, "request body must be a JSON object")
        session = _require_participant(body.get("participant"))
        pair = body.get("pair")
        score = body.get("score")
        if isinstance(pair, bool) or not isinstance(pair, int):
            raise HTTPException(400, "pair must be an integer index")
        _slot_or_404(session, pair)
        if isinstance(score, bool) or not isinstance(score, int) or not 1 <= score <= 5:
            raise HTTPException(400, "score must be an integer from 1 to 5")
        try:
            scored_count = state.record_score(session, pair, score)
        except KeyError:
            raise HTTPException(409, f"pair {pair} already scored in this session")
        pair_count = len(state.slots_for(session))
        return {
            "accepted": True,
            "pair": pair,
            "scored_count": scored_count,
            "pair_count": pair_count,
            "completed": scored_count == pair_count,
        }

    if assets_dir is not None:
        assets_dir = Path(assets_dir)
        if not assets_dir.is_dir():
            raise ConfigError(f"assets directory not found: {assets_dir}")
        app.mount("/", StaticFiles(directory=assets_dir, html=True), name="assets")

    return app
