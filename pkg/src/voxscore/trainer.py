"""Training loop, evaluation protocol, confidence regression, assessment.

Each optimizer step runs one batch (a step is the unit the history calls an
"era"); an epoch is one full pass over the active training samples. Runs
with identical manifest, config and seed produce byte-identical checkpoints:
the sample order is seeded, batch shapes are fixed by the config, and all
affected math runs under the single-thread BLAS pin.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .augment import generate_invariants
from .dataset import DatasetManifest, DatasetError, atomic_write_bytes, load_mesh
from .determinism import deterministic_blas
from .labels import (
    DEFAULT_TOLERANCE_STEPS,
    SCALE_STEPS,
    decode_score,
    encode_score,
    within_tolerance,
)
from .net import (
    NetworkArchitecture,
    NetworkParams,
    adam_step,
    backward_batch,
    build_single_part_net,
    forward_batch,
    init_params,
    save_checkpoint,
)
from .shapes import occupancy_rule_score, synthetic_part
from .voxel import voxelize
from .mesh import write_stl

DEFAULT_LEARNING_RATE = 2e-4  # midpoint reading of the 0.01-0.05% change rate


class TrainingError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    """Non-finite cost; carries the last finite checkpoint."""

    def __init__(self, step: int, checkpoint_path: Path | None):
        super().__init__(
            f"training cost became non-finite at step {step}; "
            f"last good checkpoint: {checkpoint_path}"
        )
        self.step = step
        self.checkpoint_path = checkpoint_path


@dataclass
class TrainingConfig:
    question_id: str
    learning_rate: float = DEFAULT_LEARNING_RATE
    epochs: int = 50
    batch_size: int = 8
    seed: int = 0
    resolution: int = 16
    augment: bool = False
    tolerance_steps: int = DEFAULT_TOLERANCE_STEPS
    aggregation: str = "latest"
    max_steps: int | None = None
    checkpoint_every: int = 0  # epochs between mid-run checkpoints; 0 = final only
    rotation_partitions: int = 1  # >1 swaps active training partitions
    rotation_epochs: int = 1

    def __post_init__(self):
        if not self.question_id:
            raise TrainingError("question_id required")
        if self.learning_rate < 0:
            raise TrainingError("learning rate must be >= 0")
        for name in ("epochs", "batch_size", "rotation_partitions", "rotation_epochs"):
            if getattr(self, name) < 1:
                raise TrainingError(f"{name} must be >= 1")
        if self.tolerance_steps < 0:
            raise TrainingError("tolerance_steps must be >= 0")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainingConfig":
        return cls(**d)


@dataclass(frozen=True)
class HistoryPoint:
    epoch: int
    step: int
    mean_cost: float
    exact_accuracy: float
    tolerance_accuracy: float


@dataclass
class TrainResult:
    arch: NetworkArchitecture
    params: NetworkParams
    history: list
    steps: int
    checkpoint_path: Path | None


def _training_samples(manifest: DatasetManifest, config: TrainingConfig):
    labels = manifest.training_labels(config.question_id, config.aggregation)
    if manifest.split:
        ids = [m for m in manifest.split_ids("train") if m in labels]
    else:
        ids = sorted(labels)
    if not ids:
        raise TrainingError(
            f"no annotated training models for question {config.question_id!r}"
        )
    tensors = []
    scores = []
    for model_id in ids:
        grid = manifest.load_grid(model_id)
        if grid.dim != (config.resolution,) * 3:
            raise TrainingError(
                f"model {model_id} voxelized at {grid.dim}, "
                f"config expects {(config.resolution,) * 3}"
            )
        if config.augment:
            for inv in generate_invariants(grid, manifest.plan):
                tensors.append(inv.occupancy.astype(np.float32))
                scores.append(labels[model_id])
        else:
            tensors.append(grid.occupancy.astype(np.float32))
            scores.append(labels[model_id])
    x = np.stack(tensors)
    y = np.stack([encode_score(s).as_array() for s in scores])
    return x, y, np.array(scores), ids


def train(manifest: DatasetManifest, config: TrainingConfig) -> TrainResult:
    """Seeded shuffled epochs of forward / quartic cost / backward / ADAM.

    History rows carry the per-epoch mean batch cost and the fraction of
    samples whose decoded argmax hits the label exactly and within the
    tolerance band. Raises TrainingDiverged on a non-finite cost, keeping
    the last finite checkpoint on disk."""
    x, y, scores, _ = _training_samples(manifest, config)
    n = len(x)
    arch = build_single_part_net(config.resolution)
    params = init_params(arch, seed=config.seed)
    rng = np.random.default_rng(config.seed)

    ckpt_path = manifest.root / "checkpoints" / f"{config.question_id}.ckpt"
    history_path = manifest.root / "reports" / f"train_{config.question_id}.jsonl"
    history: list = []
    lines = [json.dumps({"record": "config", **config.to_json_dict()}, sort_keys=True)]

    partitions = [
        np.arange(p, n, config.rotation_partitions)
        for p in range(config.rotation_partitions)
    ]

    step = 0
    last_good: bytes | None = None
    with deterministic_blas():
        for epoch in range(config.epochs):
            if config.max_steps is not None and step >= config.max_steps:
                break
            active = partitions[
                (epoch // config.rotation_epochs) % config.rotation_partitions
            ]
            order = active[rng.permutation(len(active))]
            cost_sum = 0.0
            exact = 0
            tolerant = 0
            seen = 0
            for start in range(0, len(order), config.batch_size):
                if config.max_steps is not None and step >= config.max_steps:
                    break
                batch = order[start : start + config.batch_size]
                grads, mean_cost, outs = backward_batch(arch, params, x[batch], y[batch])
                if not math.isfinite(mean_cost):
                    if last_good is not None:
                        atomic_write_bytes(ckpt_path, last_good)
                    raise TrainingDiverged(
                        step, ckpt_path if last_good is not None else None
                    )
                adam_step(params, grads, config.learning_rate)
                step += 1
                seen += len(batch)
                cost_sum += mean_cost * len(batch)
                predicted = outs.argmax(axis=1)
                exact += int((predicted == scores[batch]).sum())
                tolerant += int(
                    (np.abs(predicted - scores[batch]) <= config.tolerance_steps).sum()
                )
            point = HistoryPoint(
                epoch=epoch,
                step=step,
                mean_cost=cost_sum / max(1, seen),
                exact_accuracy=exact / max(1, seen),
                tolerance_accuracy=tolerant / max(1, seen),
            )
            history.append(point)
            lines.append(json.dumps({"record": "epoch", **asdict(point)}, sort_keys=True))
            last_good = save_checkpoint(arch, params)
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                atomic_write_bytes(ckpt_path, last_good)

    if last_good is None:
        last_good = save_checkpoint(arch, params)
    atomic_write_bytes(ckpt_path, last_good)
    atomic_write_bytes(history_path, ("\n".join(lines) + "\n").encode())
    return TrainResult(arch, params, history, step, ckpt_path)


# --- evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class EvaluationRow:
    model_id: str
    expected: int
    predicted: int
    peak_height: float
    within_tolerance: bool


@dataclass
class EvaluationReport:
    question_id: str
    tolerance_steps: int
    rows: list
    accuracy_exact: float
    accuracy_1step: float
    accuracy_2step: float
    accuracy_tolerant: float
    max_error_steps: int
    max_error_fraction: float

    def to_jsonl(self) -> str:
        out = [
            json.dumps(
                {
                    "record": "evaluation",
                    "question_id": self.question_id,
                    "tolerance_steps": self.tolerance_steps,
                    "accuracy_exact": self.accuracy_exact,
                    "accuracy_1step": self.accuracy_1step,
                    "accuracy_2step": self.accuracy_2step,
                    "accuracy_tolerant": self.accuracy_tolerant,
                    "max_error_steps": self.max_error_steps,
                    "max_error_fraction": self.max_error_fraction,
                    "models": len(self.rows),
                },
                sort_keys=True,
            )
        ]
        for r in self.rows:
            out.append(json.dumps({"record": "model", **asdict(r)}, sort_keys=True))
        return "\n".join(out) + "\n"

    def summary_table(self) -> str:
        lines = [
            f"question: {self.question_id}   models: {len(self.rows)}",
            f"accuracy exact {self.accuracy_exact:6.1%}   "
            f"1-step {self.accuracy_1step:6.1%}   2-step {self.accuracy_2step:6.1%}",
            f"max error {self.max_error_steps} steps "
            f"({self.max_error_fraction:.1%} of scale)",
            f"{'model':16s} {'expected':>8s} {'predicted':>9s} {'peak':>6s} {'ok':>3s}",
        ]
        for r in self.rows:
            lines.append(
                f"{r.model_id:16s} {r.expected:8d} {r.predicted:9d} "
                f"{r.peak_height:6.3f} {'y' if r.within_tolerance else 'n':>3s}"
            )
        return "\n".join(lines)


def evaluate(manifest: DatasetManifest, config: TrainingConfig,
             arch: NetworkArchitecture, params: NetworkParams) -> EvaluationReport:
    """Per-model predictions on the unaugmented eval voxels."""
    labels = manifest.training_labels(config.question_id, config.aggregation)
    eval_ids = [m for m in manifest.split_ids("eval") if m in labels]
    if not eval_ids:
        raise TrainingError(
            f"no annotated eval models for question {config.question_id!r}"
        )
    rows = []
    with deterministic_blas():
        for model_id in eval_ids:
            grid = manifest.load_grid(model_id)
            out = forward_batch(arch, params, grid.occupancy.astype(np.float32))
            predicted, peak = decode_score(out[0].astype(np.float64))
            expected = labels[model_id]
            rows.append(
                EvaluationRow(
                    model_id,
                    expected,
                    predicted,
                    peak,
                    within_tolerance(predicted, expected, config.tolerance_steps),
                )
            )
    n = len(rows)
    errors = [abs(r.predicted - r.expected) for r in rows]

    def acc(steps):
        return sum(e <= steps for e in errors) / n

    return EvaluationReport(
        question_id=config.question_id,
        tolerance_steps=config.tolerance_steps,
        rows=rows,
        accuracy_exact=acc(0),
        accuracy_1step=acc(1),
        accuracy_2step=acc(2),
        accuracy_tolerant=acc(config.tolerance_steps),
        max_error_steps=max(errors),
        max_error_fraction=max(errors) / SCALE_STEPS,
    )


# --- level of confidence -----------------------------------------------------


@dataclass(frozen=True)
class ConfidenceRegression:
    slope: float
    intercept: float
    r_squared: float
    sample_count: int
    degenerate_abscissa: bool


def confidence_regression(report: EvaluationReport) -> ConfidenceRegression:
    """Ordinary least squares of the error fraction on the peak-height
    divergence |peak - 1|. A zero-variance abscissa yields the flagged
    degenerate result with r_squared = 0."""
    pairs = [
        (abs(r.peak_height - 1.0), abs(r.predicted - r.expected) / SCALE_STEPS)
        for r in report.rows
    ]
    return fit_confidence_pairs(pairs)


def fit_confidence_pairs(pairs) -> ConfidenceRegression:
    if len(pairs) < 3:
        raise TrainingError(f"regression needs >= 3 samples, got {len(pairs)}")
    x = np.array([p[0] for p in pairs], dtype=np.float64)
    y = np.array([p[1] for p in pairs], dtype=np.float64)
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx == 0.0:
        return ConfidenceRegression(0.0, float(y.mean()), 0.0, len(pairs), True)
    sxy = float(((x - x.mean()) * (y - y.mean())).sum())
    slope = sxy / sxx
    intercept = float(y.mean() - slope * x.mean())
    residual = y - (slope * x + intercept)
    ss_res = float((residual**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return ConfidenceRegression(slope, intercept, r2, len(pairs), False)


# --- assessment -----------------------------------------------------------------


@dataclass(frozen=True)
class Assessment:
    score: int
    peak_height: float
    curve: tuple
    tolerance_band: tuple  # inclusive (low, high) on the 0..10 scale


def assess(arch: NetworkArchitecture, params: NetworkParams, mesh_data: bytes,
           fmt: str = "auto", tolerance_steps: int = DEFAULT_TOLERANCE_STEPS) -> Assessment:
    """Full pipeline for one uploaded mesh: parse, voxelize at the network's
    input resolution, forward, decode."""
    mesh = load_mesh(mesh_data, fmt)
    resolution = arch.input_shape[0]
    grid = voxelize(mesh, resolution)
    with deterministic_blas():
        out = forward_batch(arch, params, grid.occupancy.astype(np.float32))
    score, peak = decode_score(out[0].astype(np.float64))
    band = (max(0, score - tolerance_steps), min(10, score + tolerance_steps))
    return Assessment(score, peak, tuple(float(v) for v in out[0]), band)


def assess_grid(arch, params, grid, tolerance_steps: int = DEFAULT_TOLERANCE_STEPS) -> Assessment:
    """Assessment of an already-voxelized model."""
    with deterministic_blas():
        out = forward_batch(arch, params, grid.occupancy.astype(np.float32))
    score, peak = decode_score(out[0].astype(np.float64))
    band = (max(0, score - tolerance_steps), min(10, score + tolerance_steps))
    return Assessment(score, peak, tuple(float(v) for v in out[0]), band)


# --- synthetic dataset ---------------------------------------------------------


def populate_synthetic(manifest: DatasetManifest, count: int, resolution: int = 16,
                       seed: int = 0, question_ids=("separability",),
                       annotator: str = "geometric-rule") -> list:
    """Ingest procedurally generated parts and annotate them with the
    deterministic occupancy rule; returns the model ids in creation order."""
    rng = np.random.default_rng(seed)
    ids = []
    guard = 0
    while len(ids) < count:
        guard += 1
        if guard > count * 10:
            raise TrainingError("synthetic generator failed to produce distinct parts")
        _, mesh = synthetic_part(rng)
        model_id = manifest.ingest_model(write_stl(mesh, "binary"), "stl", resolution)
        if model_id in ids:
            continue
        ids.append(model_id)
        score = occupancy_rule_score(manifest.load_grid(model_id))
        for q in question_ids:
            manifest.record_annotation(
                model_id, q, score, annotator, timestamp=float(len(ids))
            )
    return ids
