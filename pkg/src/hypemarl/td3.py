"""TD3 variant used by every agent stack.

Twin critics with clipped target-policy smoothing noise, a batch-clipped
bootstrap target, Huber critic regression, the symmetric two-critic
actor loss -(Q1+Q2)/2, and delayed Polyak target tracking.

The functions below are generic over an agent stack (plain shared nets
or hypernetwork-emitted nets); stacks provide evaluation/tape hooks and
own their optimizer states. Actions are handled internally in normalized
(tau) units in (-1, 1); noise scales are expressed in action-halfwidth
units so they transfer across environments.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, TrainingError, UsageError
from .nn import Tape

HUBER_DELTA = 1.0


@dataclass(frozen=True)
class Td3Hyper:
    gamma: float = 0.99
    batch_size: int = 32
    target_noise: float = 0.2   # std of target-policy smoothing (halfwidth units)
    noise_clip: float = 0.5     # clip bound for that noise (halfwidth units)
    policy_delay: int = 2
    rho: float = 0.005          # Polyak rate for target tracking

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigurationError(f"rho must be in (0, 1], got {self.rho}")
        if not self.noise_clip > 0.0:
            raise ConfigurationError(f"noise_clip must be > 0, got {self.noise_clip}")
        if self.batch_size < 1 or self.policy_delay < 1:
            raise ConfigurationError(
                f"batch_size and policy_delay must be >= 1, got "
                f"{self.batch_size}, {self.policy_delay}")
        if self.target_noise < 0.0:
            raise ConfigurationError(
                f"target_noise must be >= 0, got {self.target_noise}")


def sigma_schedule(episode, warmup, total, sigma0, sigma_end):
    """Exploration-noise std: flat at sigma0 through warm-up, then linear
    decay hitting exactly sigma_end at the final episode."""
    if episode <= warmup or total <= warmup:
        return sigma0
    frac = (episode - warmup) / (total - warmup)
    return (1.0 - frac) * sigma0 + frac * sigma_end


def explore(u, sigma, lo, hi, rng):
    """Gaussian exploration noise around an action, clipped to bounds.

    ``sigma`` is in raw action units here.
    """
    u = np.asarray(u, dtype=np.float64)
    if sigma > 0.0:
        u = u + rng.normal(0.0, sigma, size=u.shape)
    return np.clip(u, lo, hi)


def target_value(batch, nets, hyper, rng):
    """Per-sample bootstrap target r + gamma * clip(min(Q1bar, Q2bar), ...).

    The clip bounds are the min/max over the current batch of the
    per-sample clipped-min twin estimates. Gradients never flow here:
    everything is evaluated with plain arrays from the target networks.
    """
    if batch["y"].shape[0] == 0:
        raise UsageError("cannot compute targets for an empty batch")
    tau2 = nets.target_policy_tau(batch)
    eps = np.clip(rng.normal(0.0, hyper.target_noise, size=tau2.shape),
                  -hyper.noise_clip, hyper.noise_clip)
    tau2 = np.clip(tau2 + eps, -1.0, 1.0)
    q1, q2 = nets.target_twin_q(batch, tau2)
    qmin = np.minimum(q1, q2)
    clipped = np.clip(qmin, qmin.min(), qmin.max())
    return batch["r"] + hyper.gamma * clipped


def critic_update(batch, nets, hyper, rng):
    """One Huber regression step of both critics toward the shared target."""
    targets = target_value(batch, nets, hyper, rng)[:, None]
    tape = Tape()
    q1, q2, leaves = nets.critic_q_tape(tape, batch)
    loss = tape.add(tape.huber_mean(tape.sub(q1, targets), HUBER_DELTA),
                    tape.huber_mean(tape.sub(q2, targets), HUBER_DELTA))
    value = float(loss.value)
    if not np.isfinite(value):
        raise TrainingError(f"non-finite critic loss {value!r}")
    tape.backward(loss)
    nets.apply_critic_grads(leaves)
    return 0.5 * value


def actor_update(batch, nets, hyper):
    """One ascent step on (Q1 + Q2)/2 at u = pi(y), through the critics."""
    tape = Tape()
    q1, q2, leaves = nets.actor_q_tape(tape, batch)
    loss = tape.mean_all(tape.scale(tape.add(q1, q2), -0.5))
    value = float(loss.value)
    if not np.isfinite(value):
        raise TrainingError(f"non-finite actor loss {value!r}")
    tape.backward(loss)
    nets.apply_actor_grads(leaves)
    return value


def polyak_update(theta_bar, theta, rho):
    """theta_bar' = rho*theta + (1-rho)*theta_bar."""
    from .nn import polyak

    return polyak(theta_bar, theta, rho)
