"""Hypernetworks that emit per-agent policy/critic weights.

A hypernetwork is itself a flat-weight MLP mapping the concatenation of
an agent's positional encoding and the episode's system parameters to
the complete weight vector of that agent's main network. All agents
share the hypernetwork; per-agent behavior comes entirely from the
(PE, mu) conditioning.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .nn import MlpSpec, glorot_init, glorot_std, mlp_forward, parameter_count


def policy_spec(state_dim=1, action_dim=1, hidden=(256,)):
    """Main-net policy: tanh output in (-1, 1), scaled to bounds by the caller."""
    return MlpSpec(state_dim, tuple(hidden), action_dim, "tanh", "tanh")


def critic_spec(state_dim=1, action_dim=1, hidden=(256,)):
    """Main-net critic over (state, normalized action) -> scalar value."""
    return MlpSpec(state_dim + action_dim, tuple(hidden), 1, "tanh", "identity")


@dataclass(frozen=True)
class HyperSpec:
    """Architecture of one hypernetwork and of the main net it emits."""

    target_spec: MlpSpec
    encoding_dim: int
    mu_dim: int
    hidden_dims: tuple = (256,)

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.encoding_dim < 2 or self.mu_dim < 0:
            raise ConfigurationError(
                f"bad hypernet input dims: encoding {self.encoding_dim}, "
                f"mu {self.mu_dim}")

    @property
    def input_dim(self):
        return self.encoding_dim + self.mu_dim

    @property
    def output_dim(self):
        return parameter_count(self.target_spec)

    def as_mlp(self):
        """The hypernetwork viewed as an ordinary flat-weight MLP."""
        return MlpSpec(self.input_dim, self.hidden_dims, self.output_dim,
                       "relu", "identity")


def hyper_input(pe, mu):
    """Concatenate encoding(s) and parameter vector(s); batched or single."""
    pe = np.asarray(pe, dtype=np.float64)
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    if pe.ndim == 1:
        return np.concatenate([pe, mu])
    if mu.ndim == 1:
        mu = np.broadcast_to(mu, (pe.shape[0], mu.shape[0]))
    return np.concatenate([pe, mu], axis=1)


def hyper_forward(theta_h, hspec, pe, mu):
    """Emit main-net weights for one (pe, mu) or a batch of them."""
    x = hyper_input(pe, mu)
    if x.shape[-1] != hspec.input_dim:
        raise ConfigurationError(
            f"hypernet input length {x.shape[-1]} != d + N_mu = {hspec.input_dim}")
    return mlp_forward(hspec.as_mlp(), theta_h, x)


# Fraction of the target Glorot std carried by the input-dependent part of
# the emitted weights at init; the rest sits in the output bias.
INIT_JITTER = 0.3


def hyper_init(hspec, rng, probe_inputs):
    """Initialize a hypernetwork so emitted weights look Glorot-initialized.

    The output layer's bias carries a Glorot draw of the target net; the
    output weights are rescaled per emitted coordinate so that, over the
    supplied probe inputs, the input-dependent jitter has std
    INIT_JITTER x the target's Glorot std. Emitted bias coordinates are
    exactly zero at init. This keeps early emitted nets well-scaled
    instead of exploding with the fan-in of the hypernetwork.
    """
    probe_inputs = np.asarray(probe_inputs, dtype=np.float64)
    if probe_inputs.ndim != 2 or probe_inputs.shape[1] != hspec.input_dim:
        raise ConfigurationError(
            f"probe inputs must be (K, {hspec.input_dim}), got {probe_inputs.shape}")
    hm = hspec.as_mlp()
    theta = glorot_init(hm, rng)

    # Hidden activations of the trunk at the probes.
    h = probe_inputs
    slices = hm.slices()
    for (fi, fo), ((w0, w1), (b0, b1)) in zip(hm.layer_dims()[:-1], slices[:-1]):
        h = np.maximum(h @ theta[w0:w1].reshape(fi, fo) + theta[b0:b1], 0.0)

    (w0, w1), (b0, b1) = slices[-1]
    fi, fo = hm.layer_dims()[-1]
    w_out = theta[w0:w1].reshape(fi, fo)
    b_out = np.zeros(fo)

    # Per-coordinate Glorot std of the target net (0 for bias coordinates).
    target_std = np.zeros(fo)
    for (tfi, tfo), ((tw0, tw1), _) in zip(hspec.target_spec.layer_dims(),
                                           hspec.target_spec.slices()):
        target_std[tw0:tw1] = glorot_std(tfi, tfo)
        b_out[tw0:tw1] = rng.uniform(-np.sqrt(6.0 / (tfi + tfo)),
                                     np.sqrt(6.0 / (tfi + tfo)), size=tw1 - tw0)

    jitter_std = np.maximum((h @ w_out).std(axis=0), 1e-8)
    w_out = w_out * (INIT_JITTER * target_std / jitter_std)[None, :]

    theta[w0:w1] = w_out.ravel()
    theta[b0:b1] = b_out
    return theta


def policy_act(theta_pi, spec, y, lo, hi):
    """Bounded action from a (possibly emitted) policy weight vector."""
    tau = mlp_forward(spec, theta_pi, y)
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    return mid + half * tau


def value_eval(theta_q, spec, y, u, lo, hi):
    """Local critic value at (state, raw action); action is normalized inside."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    tau = (u - mid) / half
    q = mlp_forward(spec, theta_q, np.concatenate([y, tau]))
    return float(q[0])
