"""Reverse-mode autodiff, flat-vector MLPs, Adam, and gradient checking."""

from .gradcheck import grad_check
from .mlp import (
    MlpSpec,
    glorot_init,
    glorot_std,
    grouped_forward,
    mlp_forward,
    parameter_count,
    tape_grouped_mlp,
    tape_mlp,
)
from .optim import AdamState, TrainedNet, adam_state_for, adam_step, polyak
from .tape import Tape, Var

__all__ = [
    "AdamState",
    "MlpSpec",
    "Tape",
    "TrainedNet",
    "Var",
    "adam_state_for",
    "adam_step",
    "glorot_init",
    "glorot_std",
    "grad_check",
    "grouped_forward",
    "mlp_forward",
    "parameter_count",
    "polyak",
    "tape_grouped_mlp",
    "tape_mlp",
]
