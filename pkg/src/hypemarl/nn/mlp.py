"""Flat-vector MLPs: spec, init, fast forward, and tape-recorded forms.

All networks in the package are shallow feed-forward MLPs whose weights
live in one flat f64 vector with a canonical layer-major layout
(W then b per layer). Three evaluation forms are provided:

- ``mlp_forward``      plain numpy, shared weights (no gradients);
- ``tape_mlp``         tape-recorded, shared weights;
- ``grouped_forward``  plain numpy, one weight vector per sample;
- ``tape_grouped_mlp`` tape-recorded, one weight vector per sample.

The grouped forms are what make hypernetwork-emitted per-agent weights
trainable in a single batched pass.
"""

from dataclasses import dataclass

import numpy as np

from .. import _kernels as kern
from ..errors import ConfigurationError

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one flat-weight MLP."""

    input_dim: int
    hidden_dims: tuple
    output_dim: int
    hidden_activation: str = "tanh"
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) != d or d < 1 for d in dims):
            raise ConfigurationError(f"MlpSpec dims must be integers >= 1, got {dims}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigurationError(
                f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}, "
                f"got {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigurationError(
                f"output_activation must be one of {OUTPUT_ACTIVATIONS}, "
                f"got {self.output_activation!r}")

    def layer_dims(self):
        """[(fan_in, fan_out)] per layer."""
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    def slices(self):
        """[(W slice, b slice)] into the flat vector, layer-major W-then-b."""
        out = []
        off = 0
        for fi, fo in self.layer_dims():
            w = (off, off + fi * fo)
            b = (w[1], w[1] + fo)
            off = b[1]
            out.append((w, b))
        return out


def parameter_count(spec):
    return sum(fi * fo + fo for fi, fo in spec.layer_dims())


def glorot_init(spec, rng):
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, flat layout."""
    theta = np.zeros(parameter_count(spec))
    for (fi, fo), ((w0, w1), _) in zip(spec.layer_dims(), spec.slices()):
        lim = np.sqrt(6.0 / (fi + fo))
        theta[w0:w1] = rng.uniform(-lim, lim, size=fi * fo)
    return theta


def glorot_std(fan_in, fan_out):
    """Std of the uniform Glorot distribution (range / sqrt(3))."""
    return np.sqrt(2.0 / (fan_in + fan_out))


def _check_theta(spec, theta):
    n = parameter_count(spec)
    if theta.shape[-1] != n:
        raise ConfigurationError(
            f"weight vector length {theta.shape[-1]} does not match "
            f"parameter_count={n} for spec {spec}")


def _activate(name, x):
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    return x


def mlp_forward(spec, theta, x):
    """Evaluate the MLP; accepts (input_dim,) or batched (B, input_dim)."""
    theta = np.asarray(theta, dtype=np.float64)
    _check_theta(spec, theta)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != spec.input_dim:
        raise ConfigurationError(
            f"input length {h.shape[1]} != spec.input_dim {spec.input_dim}")
    layers = spec.layer_dims()
    for k, ((fi, fo), ((w0, w1), (b0, b1))) in enumerate(zip(layers, spec.slices())):
        h = h @ theta[w0:w1].reshape(fi, fo) + theta[b0:b1]
        act = spec.output_activation if k == len(layers) - 1 else spec.hidden_activation
        h = _activate(act, h)
    return h[0] if single else h


def grouped_forward(spec, thetas, x):
    """Per-sample weights: thetas (B,P), x (B,input_dim) -> (B,output_dim)."""
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    _check_theta(spec, thetas)
    h = np.ascontiguousarray(x, dtype=np.float64)
    b = h.shape[0]
    layers = spec.layer_dims()
    for k, ((fi, fo), ((w0, w1), (b0, b1))) in enumerate(zip(layers, spec.slices())):
        w3 = np.ascontiguousarray(thetas[:, w0:w1]).reshape(b, fi, fo)
        h = kern.grouped_linear(w3, h) + thetas[:, b0:b1]
        act = spec.output_activation if k == len(layers) - 1 else spec.hidden_activation
        h = _activate(act, h)
    return h


def _tape_activate(tape, name, x):
    if name == "relu":
        return tape.relu(x)
    if name == "tanh":
        return tape.tanh(x)
    return x


def tape_mlp(tape, spec, theta, x):
    """Tape-recorded forward with shared weights; theta is a flat Var/array."""
    h = x
    layers = spec.layer_dims()
    for k, ((fi, fo), ((w0, w1), (b0, b1))) in enumerate(zip(layers, spec.slices())):
        w = tape.slice_flat(theta, w0, w1, (fi, fo))
        b = tape.slice_flat(theta, b0, b1, (fo,))
        h = tape.add_bias(tape.matmul(h, w), b)
        act = spec.output_activation if k == len(layers) - 1 else spec.hidden_activation
        h = _tape_activate(tape, act, h)
    return h


def tape_grouped_mlp(tape, spec, thetas, x):
    """Tape-recorded forward with per-sample weights thetas (B,P)."""
    h = x
    b = (thetas.value if hasattr(thetas, "value") else thetas).shape[0]
    layers = spec.layer_dims()
    for k, ((fi, fo), ((w0, w1), (b0, b1))) in enumerate(zip(layers, spec.slices())):
        w3 = tape.slice_cols(thetas, w0, w1, (b, fi, fo))
        bias = tape.slice_cols(thetas, b0, b1, (b, fo))
        h = tape.add(tape.grouped_matvec(w3, h), bias)
        act = spec.output_activation if k == len(layers) - 1 else spec.hidden_activation
        h = _tape_activate(tape, act, h)
    return h
