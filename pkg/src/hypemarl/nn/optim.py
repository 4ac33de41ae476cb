"""Adam with bias correction and Polyak averaging over flat weight vectors.

Updates are functional: each step returns new arrays and a new state so
weight vectors behave as immutable snapshots (safe to stash in targets,
checkpoints, or caches without defensive copies).
"""

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as kern
from ..errors import TrainingError


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_state_for(theta):
    return AdamState(m=np.zeros_like(theta), v=np.zeros_like(theta))


def adam_step(theta, grad, state, lr):
    """One Adam update; returns (new theta, new state)."""
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    if grad.shape != theta.shape:
        raise TrainingError(
            f"gradient shape {grad.shape} does not match weights {theta.shape}")
    finite = np.isfinite(grad)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise TrainingError(
            f"non-finite gradient component {grad[bad]!r} at index {bad}")
    step = state.step + 1
    p2, m2, v2 = kern.adam_apply(
        np.ascontiguousarray(theta), grad, state.m, state.v,
        step, lr, state.beta1, state.beta2, state.eps)
    return p2, AdamState(m=m2, v=v2, step=step,
                         beta1=state.beta1, beta2=state.beta2, eps=state.eps)


def polyak(target, source, rho):
    """target' = rho*source + (1-rho)*target, as a new array."""
    return kern.polyak_apply(np.ascontiguousarray(target),
                             np.ascontiguousarray(source), rho)


@dataclass
class TrainedNet:
    """A flat weight vector plus the optimizer state that trains it."""

    spec: object
    theta: np.ndarray
    opt: AdamState = field(default=None)

    def __post_init__(self):
        if self.opt is None:
            self.opt = adam_state_for(self.theta)

    def apply_grad(self, grad, lr):
        self.theta, self.opt = adam_step(self.theta, grad, self.opt, lr)
