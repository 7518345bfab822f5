"""Encoding of 0-10 capability answers as 11-neuron activation curves.

An integer answer A becomes a Gaussian bell over the output neurons,
peaking at 1.0 on neuron A: E_I = exp(-(width * (A - I))^2). Eleven
gradations put the chance of a random exact hit at 1/11 (9.09%).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SCALE_STEPS = 11
QUESTION_IDS = ("separability", "gripping_surfaces", "self_centering")
DEFAULT_TOLERANCE_STEPS = 2  # 2/11 of the scale, the ~18% band
STRICT_TOLERANCE_STEPS = 1  # ~9% band


@dataclass(frozen=True)
class Score:
    value: int
    question_id: str

    def __post_init__(self):
        if not isinstance(self.value, int) or not 0 <= self.value <= 10:
            raise ValueError(f"score must be an integer in 0..10, got {self.value!r}")


@dataclass(frozen=True)
class ScoreCurve:
    activations: tuple[float, ...]

    def __post_init__(self):
        acts = tuple(float(a) for a in self.activations)
        if len(acts) != SCALE_STEPS:
            raise ValueError(f"curve needs {SCALE_STEPS} activations, got {len(acts)}")
        if not all(math.isfinite(a) for a in acts):
            raise ValueError("curve activations must be finite")
        object.__setattr__(self, "activations", acts)

    def as_array(self) -> np.ndarray:
        return np.array(self.activations, dtype=np.float64)


def encode_score(score: Score | int, width: float = 0.5, scaled_center: bool = False) -> ScoreCurve:
    """Gaussian bell for an integer answer; peak 1.0 at neuron A.

    scaled_center=True switches to the alternate parameterization with the
    answer normalized by the neuron count and shifted by one
    (exp(-(width*(A/11 - I + 1))^2)); kept only for auditing, since its
    peak does not land on neuron A.
    """
    a = score.value if isinstance(score, Score) else int(score)
    if not 0 <= a <= 10:
        raise ValueError(f"score {a} out of range 0..10")
    idx = np.arange(SCALE_STEPS, dtype=np.float64)
    if scaled_center:
        args = width * (a / SCALE_STEPS - idx + 1.0)
    else:
        args = width * (a - idx)
    return ScoreCurve(tuple(np.exp(-(args**2))))


def decode_score(curve: ScoreCurve | np.ndarray) -> tuple[int, float]:
    """(argmax index, peak activation); ties break toward the lower index."""
    acts = curve.as_array() if isinstance(curve, ScoreCurve) else np.asarray(curve)
    if acts.shape != (SCALE_STEPS,) or not np.isfinite(acts).all():
        raise ValueError("decode needs 11 finite activations")
    idx = int(np.argmax(acts))
    return idx, float(acts[idx])


def within_tolerance(predicted: int, expected: int, steps: int = DEFAULT_TOLERANCE_STEPS) -> bool:
    """Whether two scores agree within the permissible band (default 2 steps,
    i.e. 2/11 = 18.2% of the scale)."""
    for v in (predicted, expected):
        if not 0 <= v <= 10:
            raise ValueError(f"score {v} out of range 0..10")
    return abs(predicted - expected) <= steps
