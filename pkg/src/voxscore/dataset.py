"""Dataset persistence: model ingestion, annotations, splits, augmentation
plan, all in one line-delimited manifest plus content-addressed binvox files.

Layout under a data directory:

    manifest.jsonl           versioned record stream (this module)
    voxels/<id>.binvox       solid occupancy per ingested model
    checkpoints/<q>.ckpt     trained parameters per question (trainer module)
    reports/                 evaluation artifacts (trainer module)

Writes go through a single lock and an atomic temp-file rename, so readers
never observe a half-written manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .augment import AugmentationPlan
from .labels import SCALE_STEPS
from .mesh import MeshError, TriangleMesh, parse_obj, parse_stl
from .voxel import VoxelGrid, read_binvox, voxelize, write_binvox

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
DEFAULT_EVAL_COUNT = 20


class DatasetError(ValueError):
    pass


def load_mesh(data: bytes, fmt: str = "auto") -> TriangleMesh:
    """Parse mesh bytes as STL or OBJ; fmt "auto" tries STL first."""
    if fmt == "stl":
        return parse_stl(data)
    if fmt == "obj":
        return parse_obj(data)
    if fmt != "auto":
        raise DatasetError(f"unknown mesh format {fmt!r}")
    try:
        return parse_stl(data)
    except MeshError as stl_err:
        try:
            return parse_obj(data)
        except MeshError:
            raise stl_err from None


@dataclass(frozen=True)
class ModelEntry:
    model_id: str
    source_hash: str
    resolution: int
    binvox_path: str
    source_format: str


@dataclass(frozen=True)
class AnnotationRecord:
    annotation_id: int
    model_id: str
    question_id: str
    score: int
    annotator: str
    timestamp: float


def atomic_write_bytes(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


@dataclass
class DatasetManifest:
    root: Path
    models: dict = field(default_factory=dict)  # model_id -> ModelEntry
    annotations: list = field(default_factory=list)  # append-only history
    plan: AugmentationPlan = field(default_factory=AugmentationPlan)
    split: dict = field(default_factory=dict)  # model_id -> "train" | "eval"
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.root = Path(self.root)

    # --- persistence -----------------------------------------------------

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    @classmethod
    def open(cls, root) -> "DatasetManifest":
        """Load the manifest under root, creating an empty dataset if new."""
        manifest = cls(Path(root))
        manifest.root.mkdir(parents=True, exist_ok=True)
        (manifest.root / "voxels").mkdir(exist_ok=True)
        (manifest.root / "checkpoints").mkdir(exist_ok=True)
        (manifest.root / "reports").mkdir(exist_ok=True)
        path = manifest.manifest_path
        if not path.exists():
            manifest._save_locked()
            return manifest
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: bad record: {exc}") from None
            kind = rec.get("record")
            if kind == "manifest":
                if rec.get("version") != MANIFEST_VERSION:
                    raise DatasetError(
                        f"unsupported manifest version {rec.get('version')!r}"
                    )
            elif kind == "model":
                entry = ModelEntry(
                    rec["model_id"],
                    rec["source_hash"],
                    int(rec["resolution"]),
                    rec["binvox_path"],
                    rec["source_format"],
                )
                manifest.models[entry.model_id] = entry
            elif kind == "annotation":
                manifest.annotations.append(
                    AnnotationRecord(
                        int(rec["annotation_id"]),
                        rec["model_id"],
                        rec["question_id"],
                        int(rec["score"]),
                        rec["annotator"],
                        float(rec["timestamp"]),
                    )
                )
            elif kind == "plan":
                manifest.plan = AugmentationPlan.from_json_dict(rec["plan"])
            elif kind == "split":
                manifest.split = dict(rec["assignment"])
            else:
                raise DatasetError(f"{path}:{lineno}: unknown record {kind!r}")
        return manifest

    def _records(self):
        yield {"record": "manifest", "version": MANIFEST_VERSION}
        for entry in self.models.values():
            yield {
                "record": "model",
                "model_id": entry.model_id,
                "source_hash": entry.source_hash,
                "resolution": entry.resolution,
                "binvox_path": entry.binvox_path,
                "source_format": entry.source_format,
            }
        for ann in self.annotations:
            yield {
                "record": "annotation",
                "annotation_id": ann.annotation_id,
                "model_id": ann.model_id,
                "question_id": ann.question_id,
                "score": ann.score,
                "annotator": ann.annotator,
                "timestamp": ann.timestamp,
            }
        yield {"record": "plan", "plan": self.plan.to_json_dict()}
        if self.split:
            yield {"record": "split", "assignment": self.split}

    def _save_locked(self):
        lines = "".join(
            json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n"
            for rec in self._records()
        )
        atomic_write_bytes(self.manifest_path, lines.encode("utf-8"))

    def save(self):
        with self._lock:
            self._save_locked()

    # --- ingestion ---------------------------------------------------------

    def ingest_model(self, data: bytes, fmt: str = "auto", resolution: int = 64) -> str:
        """Parse, voxelize and store a mesh; idempotent on identical bytes.

        Nothing is recorded unless parsing and voxelization both succeed."""
        digest = hashlib.sha256(data).hexdigest()
        model_id = digest[:16]
        existing = self.models.get(model_id)
        if existing is not None:
            if existing.resolution != resolution:
                raise DatasetError(
                    f"model {model_id} already ingested at resolution "
                    f"{existing.resolution}, not {resolution}"
                )
            return model_id
        mesh = load_mesh(data, fmt)
        grid = voxelize(mesh, resolution)
        rel_path = f"voxels/{model_id}.binvox"
        with self._lock:
            atomic_write_bytes(self.root / rel_path, write_binvox(grid))
            self.models[model_id] = ModelEntry(
                model_id, digest, resolution, rel_path, mesh.source_format.value
            )
            self._save_locked()
        return model_id

    def load_grid(self, model_id: str) -> VoxelGrid:
        entry = self.models.get(model_id)
        if entry is None:
            raise DatasetError(f"unknown model {model_id!r}")
        return read_binvox((self.root / entry.binvox_path).read_bytes())

    # --- annotations ---------------------------------------------------------

    def record_annotation(self, model_id: str, question_id: str, score: int,
                          annotator: str, timestamp: float | None = None) -> int:
        if model_id not in self.models:
            raise DatasetError(f"unknown model {model_id!r}")
        if not isinstance(score, int) or not 0 <= score <= SCALE_STEPS - 1:
            raise DatasetError(f"score must be an integer in 0..10, got {score!r}")
        if not question_id:
            raise DatasetError("question_id must be non-empty")
        with self._lock:
            ann = AnnotationRecord(
                annotation_id=len(self.annotations) + 1,
                model_id=model_id,
                question_id=question_id,
                score=score,
                annotator=annotator,
                timestamp=time.time() if timestamp is None else float(timestamp),
            )
            self.annotations.append(ann)
            self._save_locked()
        return ann.annotation_id

    def annotations_for(self, model_id: str, question_id: str | None = None):
        return [
            a
            for a in self.annotations
            if a.model_id == model_id
            and (question_id is None or a.question_id == question_id)
        ]

    def training_labels(self, question_id: str, aggregation: str = "latest") -> dict:
        """model_id -> score. The newest annotation wins per (model,
        annotator); across annotators, "latest" takes the newest and
        "median" the median of per-annotator values."""
        if aggregation not in ("latest", "median"):
            raise DatasetError(f"unknown aggregation {aggregation!r}")
        per_model: dict = {}
        for ann in self.annotations:  # ordered by annotation_id
            if ann.question_id != question_id:
                continue
            per_model.setdefault(ann.model_id, {})[ann.annotator] = ann
        labels = {}
        for model_id, by_annotator in per_model.items():
            anns = sorted(by_annotator.values(), key=lambda a: a.annotation_id)
            if aggregation == "latest":
                labels[model_id] = anns[-1].score
            else:
                values = sorted(a.score for a in anns)
                labels[model_id] = values[len(values) // 2]
        return labels

    # --- splits ----------------------------------------------------------------

    def assign_split(self, eval_count: int = DEFAULT_EVAL_COUNT, seed: int = 0):
        """Randomly hold out eval_count models; the rest train."""
        import numpy as np

        ids = sorted(self.models)
        if eval_count >= len(ids):
            raise DatasetError(
                f"cannot hold out {eval_count} of {len(ids)} models"
            )
        rng = np.random.default_rng(seed)
        eval_ids = set(rng.choice(ids, size=eval_count, replace=False).tolist())
        with self._lock:
            self.split = {
                mid: ("eval" if mid in eval_ids else "train") for mid in ids
            }
            self._save_locked()

    def split_ids(self, which: str) -> list:
        return sorted(mid for mid, s in self.split.items() if s == which)

    def set_plan(self, plan: AugmentationPlan):
        with self._lock:
            self.plan = plan
            self._save_locked()
