"""Network architectures, forward/backward passes, the quartic curve cost,
and the ADAM update.

The single-part network takes a cubic occupancy tensor (64^3 canonically),
extracts features through a stack of conv+pool layers whose filter counts
double from 32 up to a 512 cap, and classifies through dense 128 and 11
units. Hidden activations are rectified-linear; the 11 outputs are squashed
through the logistic function so predicted curves live in (0, 1) like the
encoded answer bells.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..determinism import deterministic_blas
from ..labels import SCALE_STEPS, ScoreCurve
from ..voxel import FloatTensor3
from .layers import Activation, Conv3dSame, Dense, Flatten, MaxPool2

CONV_KERNEL = (2, 2, 2)
BASE_FILTERS = 32
MAX_FILTERS = 512
DENSE_HIDDEN = 128


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv3d_pool | conv3d_same | fully_connected
    filters: int
    in_channels: int
    filter_size: tuple[int, int, int] | None
    output_shape: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("conv3d_pool", "conv3d_same", "fully_connected"):
            raise ValueError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class NetworkArchitecture:
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    output_size: int = SCALE_STEPS

    def __post_init__(self):
        if self.layers[-1].filters != self.output_size:
            raise ValueError("final layer width must equal the output size")

    def parameter_count(self) -> int:
        total = 0
        for spec in self.layers:
            if spec.kind == "fully_connected":
                total += spec.filters * (spec.in_channels + 1)
            else:
                k = int(np.prod(spec.filter_size))
                total += spec.filters * (spec.in_channels * k + 1)
        return total

    def to_descriptor(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "output_size": self.output_size,
            "layers": [
                {
                    "kind": s.kind,
                    "filters": s.filters,
                    "in_channels": s.in_channels,
                    "filter_size": list(s.filter_size) if s.filter_size else None,
                    "output_shape": list(s.output_shape),
                }
                for s in self.layers
            ],
        }

    @classmethod
    def from_descriptor(cls, d: dict) -> "NetworkArchitecture":
        layers = tuple(
            LayerSpec(
                kind=s["kind"],
                filters=int(s["filters"]),
                in_channels=int(s["in_channels"]),
                filter_size=tuple(s["filter_size"]) if s["filter_size"] else None,
                output_shape=tuple(s["output_shape"]),
            )
            for s in d["layers"]
        )
        return cls(tuple(d["input_shape"]), layers, int(d["output_size"]))


def _filters_for(index: int) -> int:
    return min(BASE_FILTERS * (2**index), MAX_FILTERS)


def build_single_part_net(input_resolution: int = 64) -> NetworkArchitecture:
    """Conv/pool stack halving a cubic grid down to 1^3, then dense 128/11.

    At 64^3 the stack is eight conv layers (32..512 filters): five halving
    layers down to 2^3, two same-size layers at 2^3, and a final halving to
    1^3. Smaller power-of-two inputs shrink the layer count proportionally
    (16^3: three halvings plus the final one, filters 32..256).
    """
    res = int(input_resolution)
    if res < 16 or res & (res - 1):
        raise ValueError(f"input resolution must be a power of two >= 16, got {res}")
    log2 = res.bit_length() - 1
    n_halving = log2 - 1  # down to 2^3
    n_same = max(0, log2 - 4)

    layers = []
    in_c = 1
    spatial = res
    conv_index = 0
    for _ in range(n_halving):
        spatial //= 2
        f = _filters_for(conv_index)
        layers.append(
            LayerSpec("conv3d_pool", f, in_c, CONV_KERNEL, (spatial,) * 3)
        )
        in_c = f
        conv_index += 1
    for _ in range(n_same):
        f = _filters_for(conv_index)
        layers.append(
            LayerSpec("conv3d_same", f, in_c, CONV_KERNEL, (spatial,) * 3)
        )
        in_c = f
        conv_index += 1
    f = _filters_for(conv_index)
    layers.append(LayerSpec("conv3d_pool", f, in_c, CONV_KERNEL, (1, 1, 1)))
    in_c = f

    layers.append(LayerSpec("fully_connected", DENSE_HIDDEN, in_c, None, (DENSE_HIDDEN,)))
    layers.append(LayerSpec("fully_connected", SCALE_STEPS, DENSE_HIDDEN, None, (SCALE_STEPS,)))
    return NetworkArchitecture((res,) * 3, tuple(layers))


ASSEMBLY_LAYERS = 6


def build_assembly_net(input_shape=(192, 64, 64)) -> NetworkArchitecture:
    """Six conv+pool layers halving every axis, for three 64^3 grids
    (part A, part B, assembled) stacked along the first axis."""
    shape = tuple(int(d) for d in input_shape)
    if len(shape) != 3 or any(d % (2**ASSEMBLY_LAYERS) for d in shape):
        raise ValueError(
            f"assembly input shape must be divisible by 2^{ASSEMBLY_LAYERS} "
            f"on each axis, got {shape}"
        )
    layers = []
    in_c = 1
    spatial = shape
    for i in range(ASSEMBLY_LAYERS):
        spatial = tuple(d // 2 for d in spatial)
        f = _filters_for(i)
        layers.append(LayerSpec("conv3d_pool", f, in_c, CONV_KERNEL, spatial))
        in_c = f
    flat = in_c * int(np.prod(spatial))
    layers.append(LayerSpec("fully_connected", DENSE_HIDDEN, flat, None, (DENSE_HIDDEN,)))
    layers.append(LayerSpec("fully_connected", SCALE_STEPS, DENSE_HIDDEN, None, (SCALE_STEPS,)))
    return NetworkArchitecture(shape, tuple(layers))


def compose_assembly_input(part_a, part_b, assembled) -> FloatTensor3:
    """Deterministic slot order along the long axis: A, then B, then the
    assembled configuration."""
    arrs = []
    for t in (part_a, part_b, assembled):
        arrs.append(t.values if isinstance(t, FloatTensor3) else np.asarray(t))
    if not (arrs[0].shape == arrs[1].shape == arrs[2].shape):
        raise ValueError("assembly slots must share one shape")
    return FloatTensor3(np.concatenate(arrs, axis=0))


# --- parameters ------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0


@dataclass
class NetworkParams:
    """Per-layer {"w", "b"} tensors plus first/second ADAM moments."""

    layers: list
    adam: AdamState
    dtype: np.dtype = np.dtype(np.float32)

    def flat_views(self):
        for i, p in enumerate(self.layers):
            if p is not None:
                yield (i, "w", p["w"])
                yield (i, "b", p["b"])

    def parameter_count(self) -> int:
        return sum(arr.size for _, _, arr in self.flat_views())


def _lower(arch: NetworkArchitecture):
    """Primitive op pipeline for an architecture; op index i holds the
    parameters of arch.layers[i] (None for pools/activations/flatten)."""
    ops = []  # (op, layer_index or None)
    seen_dense = False
    for i, spec in enumerate(arch.layers):
        if spec.kind in ("conv3d_pool", "conv3d_same"):
            ops.append((Conv3dSame(spec.in_channels, spec.filters, spec.filter_size), i))
            ops.append((Activation("relu"), None))
            if spec.kind == "conv3d_pool":
                ops.append((MaxPool2(), None))
        else:
            if not seen_dense:
                ops.append((Flatten(), None))
                seen_dense = True
            ops.append((Dense(spec.in_channels, spec.filters), i))
            last = i == len(arch.layers) - 1
            ops.append((Activation("sigmoid" if last else "relu"), None))
    return ops


def init_params(arch: NetworkArchitecture, seed: int = 0, dtype=np.float32) -> NetworkParams:
    """Fan-in-scaled uniform weights (He bound sqrt(6/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    dtype = np.dtype(dtype)
    layers: list = [None] * len(arch.layers)
    for op, idx in _lower(arch):
        if idx is None:
            continue
        shapes = op.param_shapes()
        bound = np.sqrt(6.0 / op.fan_in())
        layers[idx] = {
            "w": rng.uniform(-bound, bound, size=shapes["w"]).astype(dtype),
            "b": np.zeros(shapes["b"], dtype=dtype),
        }
    adam = AdamState(
        m=[{k: np.zeros_like(v) for k, v in p.items()} for p in layers],
        v=[{k: np.zeros_like(v) for k, v in p.items()} for p in layers],
    )
    return NetworkParams(layers, adam, dtype)


def zero_params(arch: NetworkArchitecture, dtype=np.float32) -> NetworkParams:
    params = init_params(arch, seed=0, dtype=dtype)
    for p in params.layers:
        p["w"][:] = 0.0
        p["b"][:] = 0.0
    return params


# --- passes -----------------------------------------------------------------


def _as_batch(arch, x) -> np.ndarray:
    arr = x.values if isinstance(x, FloatTensor3) else np.asarray(x)
    if arr.shape == arch.input_shape:
        arr = arr[None, None]
    elif arr.ndim == 4 and arr.shape[1:] == arch.input_shape:
        arr = arr[:, None]
    elif arr.ndim == 5 and arr.shape[2:] == arch.input_shape and arr.shape[1] == 1:
        pass
    else:
        raise ValueError(
            f"input shape {arr.shape} does not match architecture "
            f"input {arch.input_shape}"
        )
    return arr


def forward_batch(arch, params, batch, keep_caches=False):
    x = _as_batch(arch, batch).astype(params.dtype, copy=False)
    caches = []
    with deterministic_blas():
        for op, idx in _lower(arch):
            p = params.layers[idx] if idx is not None else None
            x, cache = op.forward(x, p)
            if keep_caches:
                caches.append(cache)
    return (x, caches) if keep_caches else x


def forward(arch, params, input_tensor) -> ScoreCurve:
    out = forward_batch(arch, params, input_tensor)
    return ScoreCurve(tuple(float(v) for v in out[0]))


def cost(expected, predicted) -> float:
    """Sum over the 11 neurons of (exp(-x_exp^2) - exp(-x_pred^2))^4.

    The quartic power sanctions large curve deviations far more than the
    small ones expected from annotator disagreement."""
    xe = expected.as_array() if isinstance(expected, ScoreCurve) else np.asarray(expected, dtype=np.float64)
    xp = predicted.as_array() if isinstance(predicted, ScoreCurve) else np.asarray(predicted, dtype=np.float64)
    if xe.shape[-1] != SCALE_STEPS or xp.shape != xe.shape:
        raise ValueError("cost needs matching 11-activation curves")
    diff = np.exp(-(xe**2)) - np.exp(-(xp**2))
    return float((diff**4).sum())


def cost_gradient(expected: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """d cost / d predicted, elementwise."""
    diff = np.exp(-(expected**2)) - np.exp(-(predicted**2))
    return 8.0 * predicted * np.exp(-(predicted**2)) * diff**3


def backward_batch(arch, params, batch, expected):
    """Mean-over-batch gradients of cost(expected, forward(batch)).

    Returns (gradients aligned with params.layers, mean cost, outputs)."""
    expected = np.asarray(expected, dtype=np.float64)
    if expected.ndim == 1:
        expected = expected[None]
    with deterministic_blas():
        out, caches = forward_batch(arch, params, batch, keep_caches=True)
        n = out.shape[0]
        if expected.shape != out.shape:
            raise ValueError(f"expected curves shape {expected.shape} != {out.shape}")
        mean_cost = float(
            sum(cost(expected[i], out[i].astype(np.float64)) for i in range(n)) / n
        )
        grad_out = (
            cost_gradient(expected, out.astype(np.float64)) / n
        ).astype(params.dtype)
        grads: list = [None] * len(arch.layers)
        dy = grad_out
        for (op, idx), cache in zip(reversed(_lower(arch)), reversed(caches)):
            p = params.layers[idx] if idx is not None else None
            dy, layer_grads = op.backward(dy, cache, p)
            if idx is not None:
                grads[idx] = layer_grads
    return grads, mean_cost, out


def backward(arch, params, input_tensor, expected):
    """Gradients for a single sample; shapes match params.layers."""
    exp_arr = expected.as_array() if isinstance(expected, ScoreCurve) else np.asarray(expected)
    grads, _, _ = backward_batch(arch, params, input_tensor, exp_arr[None])
    return grads


def adam_step(params: NetworkParams, grads, learning_rate: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> NetworkParams:
    """Standard bias-corrected ADAM update, in place."""
    if not learning_rate > 0 and learning_rate != 0.0:
        raise ValueError("learning rate must be >= 0")
    state = params.adam
    state.step += 1
    t = state.step
    b1c = 1.0 - beta1**t
    b2c = 1.0 - beta2**t
    for i, p in enumerate(params.layers):
        for key in ("w", "b"):
            g = grads[i][key]
            m = state.m[i][key]
            v = state.v[i][key]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            update = (m / b1c) / (np.sqrt(v / b2c) + eps)
            p[key] -= (learning_rate * update).astype(p[key].dtype, copy=False)
    return params


# --- verification ------------------------------------------------------------


@dataclass
class GradientCheckReport:
    max_abs_err: float
    max_rel_err: float
    worst_parameter: tuple[int, str, int]
    checked: int
    entries: list = field(repr=False, default_factory=list)


def gradient_check(arch, params, input_tensor, expected, h: float = 1e-4,
                   max_weights_per_layer: int | None = 40, seed: int = 0) -> GradientCheckReport:
    """Central-difference verification of the analytic gradients.

    Checks every bias plus a seeded sample of weights per layer (all of
    them when max_weights_per_layer is None). Requires float64 params."""
    if params.dtype != np.float64:
        raise ValueError("gradient_check requires float64 parameters")
    exp_curve = expected.as_array() if isinstance(expected, ScoreCurve) else np.asarray(expected)
    grads = backward(arch, params, input_tensor, exp_curve)
    rng = np.random.default_rng(seed)

    def numeric(arr, flat_idx):
        orig = arr.flat[flat_idx]
        arr.flat[flat_idx] = orig + h
        hi = cost(exp_curve, forward_batch(arch, params, input_tensor)[0].astype(np.float64))
        arr.flat[flat_idx] = orig - h
        lo = cost(exp_curve, forward_batch(arch, params, input_tensor)[0].astype(np.float64))
        arr.flat[flat_idx] = orig
        return (hi - lo) / (2.0 * h)

    report = GradientCheckReport(0.0, 0.0, (-1, "", -1), 0)
    with deterministic_blas():
        for i, p in enumerate(params.layers):
            for key in ("w", "b"):
                arr = p[key]
                if key == "b" or max_weights_per_layer is None or arr.size <= max_weights_per_layer:
                    indices = range(arr.size)
                else:
                    indices = rng.choice(arr.size, size=max_weights_per_layer, replace=False)
                for flat_idx in indices:
                    num = numeric(arr, int(flat_idx))
                    ana = float(grads[i][key].flat[int(flat_idx)])
                    abs_err = abs(num - ana)
                    rel_err = abs_err / max(1e-8, abs(num) + abs(ana))
                    report.checked += 1
                    report.entries.append((i, key, int(flat_idx), ana, num))
                    if abs_err > report.max_abs_err:
                        report.max_abs_err = abs_err
                    if rel_err > report.max_rel_err:
                        report.max_rel_err = rel_err
                        report.worst_parameter = (i, key, int(flat_idx))
    return report
