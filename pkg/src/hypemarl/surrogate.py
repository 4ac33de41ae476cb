"""Learned local transition model and synthetic-episode generation.

One small MLP F(y_i, u_i, mu) -> y_i' is shared by every agent, trained
by MSE regression on real transitions only. Synthetic episodes start
from freshly sampled tasks, follow the current exploration policy, and
step through the model instead of the simulator; rewards come from the
known target map, so no simulator call is needed anywhere in the loop.
A divergence guard truncates rollouts whose predictions leave the range
of anything seen in training data by a wide margin.
"""

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .nn import MlpSpec, Tape, TrainedNet, glorot_init, mlp_forward, tape_mlp

SURROGATE_LR = 1e-4
DIVERGENCE_FACTOR = 10.0


@dataclass
class SurrogateModel:
    """Transition net plus the bookkeeping the trainer needs."""

    net: TrainedNet
    lr: float = SURROGATE_LR
    y_absmax: float = 0.0     # largest |y| seen in fitting data
    train_steps: int = 0
    truncations: int = 0

    @property
    def guard(self):
        """Predictions beyond this magnitude abort a synthetic episode."""
        return DIVERGENCE_FACTOR * max(self.y_absmax, 1.0)


def make_surrogate(mu_dim, rng, hidden=(256,), lr=SURROGATE_LR):
    spec = MlpSpec(2 + int(mu_dim), tuple(hidden), 1, "tanh", "identity")
    return SurrogateModel(TrainedNet(spec, glorot_init(spec, rng)), lr=lr)


def _input_rows(y, u, mu):
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim == 1:
        mu = np.broadcast_to(mu, (y.shape[0], mu.shape[0]))
    return np.concatenate([y[:, None], u[:, None], mu], axis=1)


def surrogate_predict(model, y, u, mu):
    """Predicted next local states for rows (y_i, u_i, mu)."""
    x = _input_rows(y, u, mu)
    return mlp_forward(model.net.spec, model.net.theta, x)[:, 0]


def surrogate_train_step(model, batch):
    """One MSE regression step on a batch of real transitions."""
    x = np.concatenate([batch["y"], batch["u"], batch["mu"]], axis=1)
    tape = Tape()
    leaf = tape.leaf(model.net.theta)
    pred = tape_mlp(tape, model.net.spec, leaf, x)
    loss = tape.mean_all(tape.square(tape.sub(pred, batch["y2"])))
    tape.backward(loss)
    model.net.apply_grad(leaf.grad, model.lr)
    model.train_steps += 1
    model.y_absmax = max(model.y_absmax,
                         float(np.abs(batch["y"]).max()),
                         float(np.abs(batch["y2"]).max()))
    return float(loss.value)


def fit_surrogate(model, buffer, rng, steps, batch_size=256):
    """A burst of regression steps sampling from a real-transition buffer."""
    if buffer.size == 0:
        raise UsageError("cannot fit a surrogate from an empty buffer")
    loss = np.nan
    for _ in range(steps):
        loss = surrogate_train_step(model, buffer.sample(batch_size, rng))
    return loss


def surrogate_rollout(model, stack, env, rng, sigma, task=None):
    """One synthetic episode through the model under the exploration policy.

    Returns (steps, mean_return, truncated): ``steps`` is a list of
    (agent_idx, y, u, r, y2, mu) blocks ready for ReplayBuffer.add_batch,
    at most t_max of them with n_agents rows each (fewer if the
    divergence guard fires). A fresh task is sampled unless one is given.
    """
    mu0, mu = task if task is not None else env.sample_task(rng)
    y = env.reset(mu0)
    stack.begin_episode(mu)
    agent_idx = np.arange(env.n_agents)
    steps = []
    total = 0.0
    truncated = False
    for _ in range(env.t_max):
        u = stack.act(y[:, None], sigma, rng)[:, 0]
        y2 = surrogate_predict(model, y, u, mu)
        if np.abs(y2).max() > model.guard:
            model.truncations += 1
            truncated = True
            break
        r = env.rewards(y2, mu)
        steps.append((agent_idx, y[:, None].copy(), u[:, None].copy(),
                      r, y2[:, None].copy(), mu))
        total += float(r.mean())
        y = y2
    return steps, total, truncated
