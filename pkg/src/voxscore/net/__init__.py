"""From-scratch dense-tensor 3D CNN engine."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .model import (
    AdamState,
    GradientCheckReport,
    LayerSpec,
    NetworkArchitecture,
    NetworkParams,
    adam_step,
    backward,
    backward_batch,
    build_assembly_net,
    build_single_part_net,
    compose_assembly_input,
    cost,
    cost_gradient,
    forward,
    forward_batch,
    gradient_check,
    init_params,
    zero_params,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "GradientCheckReport",
    "LayerSpec",
    "NetworkArchitecture",
    "NetworkParams",
    "adam_step",
    "backward",
    "backward_batch",
    "build_assembly_net",
    "build_single_part_net",
    "compose_assembly_input",
    "cost",
    "cost_gradient",
    "forward",
    "forward_batch",
    "gradient_check",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "zero_params",
]
