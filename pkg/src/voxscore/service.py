"""Embedded HTTP service: model upload, voxel previews, annotation capture,
and assessment, backing the browser console and batch integrations.

Single-tenant token auth: mutating endpoints require a bearer token from the
configuration, which also names the annotator. All dataset writes go through
the manifest's single-writer lock, so reads stay consistent during training.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import Depends, FastAPI, File, Form, Header, HTTPException, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .dataset import DatasetError, DatasetManifest
from .labels import QUESTION_IDS, SCALE_STEPS
from .mesh import MeshError
from .net import load_checkpoint
from .trainer import assess_grid
from .voxel import VoxelError

DEFAULT_MAX_UPLOAD = 64 * 1024 * 1024

DEFAULT_QUESTIONS = [
    {
        "id": "separability",
        "text": "How well can a single part be separated from bulk supply?",
        "scale": {"0": "not separable at all", "5": "difficult (bin picking)", "10": "easy (bowl feeder)"},
    },
    {
        "id": "gripping_surfaces",
        "text": "Are surfaces suitable for gripping and handling present?",
        "scale": {"0": "none", "5": "limited", "10": "ample"},
    },
    {
        "id": "self_centering",
        "text": "Does the part self-center while a handling device closes?",
        "scale": {"0": "never", "5": "sometimes", "10": "reliably"},
    },
]


@dataclass
class ServiceConfig:
    data_dir: Path = Path("data")
    tokens: dict = field(default_factory=dict)  # token -> annotator name
    host: str = "127.0.0.1"
    port: int = 8472
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD
    default_resolution: int = 64
    questions: list = field(default_factory=lambda: list(DEFAULT_QUESTIONS))
    ui_dir: Path | None = None

    @classmethod
    def load(cls, path: Path | str | None = None) -> "ServiceConfig":
        """Config file plus environment overrides (VOXSCORE_PORT,
        VOXSCORE_DATA_DIR, VOXSCORE_TOKENS as token:name[,token:name...])."""
        cfg = cls()
        if path is not None:
            raw = json.loads(Path(path).read_text())
            cfg.data_dir = Path(raw.get("data_dir", cfg.data_dir))
            cfg.tokens = dict(raw.get("tokens", {}))
            cfg.host = raw.get("host", cfg.host)
            cfg.port = int(raw.get("port", cfg.port))
            cfg.max_upload_bytes = int(raw.get("max_upload_bytes", cfg.max_upload_bytes))
            cfg.default_resolution = int(raw.get("default_resolution", cfg.default_resolution))
            if "questions" in raw:
                cfg.questions = list(raw["questions"])
            if raw.get("ui_dir"):
                cfg.ui_dir = Path(raw["ui_dir"])
        if os.environ.get("VOXSCORE_DATA_DIR"):
            cfg.data_dir = Path(os.environ["VOXSCORE_DATA_DIR"])
        if os.environ.get("VOXSCORE_PORT"):
            cfg.port = int(os.environ["VOXSCORE_PORT"])
        if os.environ.get("VOXSCORE_TOKENS"):
            cfg.tokens = dict(
                pair.split(":", 1)
                for pair in os.environ["VOXSCORE_TOKENS"].split(",")
                if ":" in pair
            )
        return cfg


class AnnotationIn(BaseModel):
    model_id: str
    question_id: str
    score: int = Field(ge=0, le=SCALE_STEPS - 1)


class AssessIn(BaseModel):
    model_id: str
    question_id: str


def downsample_any(occ: np.ndarray, lod: int) -> np.ndarray:
    """Any-occupied pooling onto a grid of at most lod cells per axis."""
    if lod < 1:
        raise ValueError("lod must be >= 1")
    factor = max(1, math.ceil(max(occ.shape) / lod))
    if factor == 1:
        return occ
    padded_shape = [math.ceil(d / factor) * factor for d in occ.shape]
    padded = np.zeros(padded_shape, dtype=bool)
    padded[: occ.shape[0], : occ.shape[1], : occ.shape[2]] = occ
    px, py, pz = (s // factor for s in padded_shape)
    blocks = padded.reshape(px, factor, py, factor, pz, factor)
    return blocks.any(axis=(1, 3, 5))


class CheckpointCache:
    """Lazy per-question (arch, params) loads keyed on file mtime."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self._cache: dict = {}

    def get(self, question_id: str):
        path = self.root / "checkpoints" / f"{question_id}.ckpt"
        if not path.exists():
            return None
        stamp = path.stat().st_mtime_ns
        hit = self._cache.get(question_id)
        if hit is None or hit[0] != stamp:
            arch, params = load_checkpoint(path.read_bytes())
            self._cache[question_id] = (stamp, arch, params)
            hit = self._cache[question_id]
        return hit[1], hit[2]


def create_app(config: ServiceConfig | None = None,
               manifest: DatasetManifest | None = None) -> FastAPI:
    config = config or ServiceConfig()
    manifest = manifest or DatasetManifest.open(config.data_dir)
    checkpoints = CheckpointCache(manifest.root)
    app = FastAPI(title="voxscore", version="0.1.0")
    app.state.manifest = manifest
    app.state.config = config

    def annotator_for(authorization: str | None = Header(default=None)) -> str:
        if not config.tokens:
            return "anonymous"  # auth disabled when no tokens are configured
        if authorization and authorization.startswith("Bearer "):
            token = authorization.removeprefix("Bearer ")
            if token in config.tokens:
                return config.tokens[token]
        raise HTTPException(status_code=401, detail="missing or unknown token")

    @app.get("/api/questions")
    def list_questions():
        return {"questions": config.questions}

    @app.get("/api/models")
    def list_models():
        out = []
        for entry in sorted(manifest.models.values(), key=lambda e: e.model_id):
            out.append(
                {
                    "model_id": entry.model_id,
                    "resolution": entry.resolution,
                    "source_format": entry.source_format,
                    "annotations": len(manifest.annotations_for(entry.model_id)),
                }
            )
        return {"models": out}

    @app.post("/api/models")
    async def upload_model(
        file: UploadFile = File(...),
        resolution: int = Form(default=None),
        annotator: str = Depends(annotator_for),
    ):
        data = await file.read()
        if len(data) > config.max_upload_bytes:
            raise HTTPException(status_code=413, detail="upload exceeds size cap")
        res = resolution if resolution is not None else config.default_resolution
        try:
            model_id = manifest.ingest_model(data, "auto", res)
        except (MeshError, VoxelError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except DatasetError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return {"model_id": model_id}

    @app.get("/api/models/{model_id}/voxels")
    def voxel_preview(model_id: str, lod: int = 64):
        if model_id not in manifest.models:
            raise HTTPException(status_code=404, detail=f"unknown model {model_id}")
        if lod < 1:
            raise HTTPException(status_code=422, detail="lod must be >= 1")
        grid = manifest.load_grid(model_id)
        occ = downsample_any(grid.occupancy, lod)
        cells = np.argwhere(occ)
        return {
            "model_id": model_id,
            "dim": list(occ.shape),
            "native_dim": list(grid.dim),
            "translate": list(grid.translate),
            "scale": grid.scale,
            "cells": cells.tolist(),
            "occupied_count": int(len(cells)),
        }

    @app.post("/api/annotations")
    def post_annotation(body: AnnotationIn, annotator: str = Depends(annotator_for)):
        if body.model_id not in manifest.models:
            raise HTTPException(status_code=404, detail=f"unknown model {body.model_id}")
        try:
            annotation_id = manifest.record_annotation(
                body.model_id, body.question_id, body.score, annotator
            )
        except DatasetError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return {
            "annotation_id": annotation_id,
            "model_id": body.model_id,
            "question_id": body.question_id,
            "score": body.score,
            "annotator": annotator,
        }

    @app.post("/api/assess")
    def post_assess(body: AssessIn):
        if body.model_id not in manifest.models:
            raise HTTPException(status_code=404, detail=f"unknown model {body.model_id}")
        loaded = checkpoints.get(body.question_id)
        if loaded is None:
            raise HTTPException(
                status_code=409,
                detail=f"no trained checkpoint for question {body.question_id!r}",
            )
        arch, params = loaded
        grid = manifest.load_grid(body.model_id)
        if grid.dim != arch.input_shape:
            raise HTTPException(
                status_code=409,
                detail=f"model voxelized at {grid.dim}, checkpoint expects "
                f"{arch.input_shape}",
            )
        result = assess_grid(arch, params, grid)
        return {
            "model_id": body.model_id,
            "question_id": body.question_id,
            "score": result.score,
            "peak_height": result.peak_height,
            "curve": list(result.curve),
            "tolerance_band": list(result.tolerance_band),
        }

    @app.exception_handler(DatasetError)
    def dataset_error(_request, exc: DatasetError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig):
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
