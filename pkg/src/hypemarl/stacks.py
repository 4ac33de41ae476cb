"""Agent stacks: the trainable networks behind each training variant.

A stack bundles actor/critic weights, their target copies, optimizer
states, and the composition rules that turn replay-buffer batches into
network inputs. Two families exist:

- ``PlainStack``   one weight-shared actor-critic over (obs, mu). With
                   per-agent local observations this is the decentralized
                   baseline; with the full state vector as observation and
                   the full control field as one action it is the
                   single-agent global baseline.
- ``HyperStack``   hypernetworks map (positional encoding, mu) to the
                   complete weight vectors of small per-agent nets; all
                   agents share the hypernetworks, and per-agent behavior
                   comes from the conditioning alone.

Both plug into the update functions in ``td3`` through the same protocol:
``target_policy_tau`` / ``target_twin_q`` (plain arrays, target weights),
``critic_q_tape`` / ``actor_q_tape`` (tape-recorded, live weights), and
``apply_*_grads``. Normalized actions tau = (u - mid)/half are used for
every critic input; raw mu vectors are fed unnormalized.
"""

from dataclasses import dataclass

import numpy as np

from .encoding import EncodingConfig, encode_layout, layout_positions
from .errors import ConfigurationError, UsageError
from .hypernet import HyperSpec, critic_spec, hyper_input, hyper_init, policy_spec
from .nn import (MlpSpec, TrainedNet, glorot_init, grouped_forward,
                 mlp_forward, polyak, tape_grouped_mlp, tape_mlp)
from . import td3


@dataclass(frozen=True)
class LearningRates:
    actor: float
    critic: float

    def __post_init__(self):
        if self.actor <= 0.0 or self.critic <= 0.0:
            raise ConfigurationError(
                f"learning rates must be positive, got {self}")


# Hypernetwork weights see gradients amplified by the emission layer's
# huge fan-out, hence the much smaller actor step.
HYPER_LRS = LearningRates(actor=1e-6, critic=5e-5)
PLAIN_LRS = LearningRates(actor=3e-4, critic=3e-4)

VARIANTS = ("hypemarl", "mb-hypemarl", "marl", "single-rl")


class _StackBase:
    """Shared action-bound handling, update cadence, and counters."""

    scope = "local"

    def __init__(self, hyper, lrs, lo, hi):
        if not hi > lo:
            raise ConfigurationError(f"action bounds must satisfy lo < hi, "
                                     f"got [{lo}, {hi}]")
        self.hyper = hyper
        self.lrs = lrs
        self.lo = float(lo)
        self.hi = float(hi)
        self.mid = 0.5 * (self.hi + self.lo)
        self.half = 0.5 * (self.hi - self.lo)
        self.critic_steps = 0
        self.actor_steps = 0
        self._mu = None

    def begin_episode(self, mu):
        self._mu = np.atleast_1d(np.asarray(mu, dtype=np.float64)).copy()

    def tau_of(self, u):
        return (np.asarray(u, dtype=np.float64) - self.mid) / self.half

    def act(self, y_rows, sigma, rng):
        """Noisy bounded actions; sigma is in action-halfwidth units."""
        if self._mu is None:
            raise UsageError("begin_episode(mu) must run before acting")
        tau = self._policy_tau_rows(np.atleast_2d(np.asarray(y_rows, float)))
        u = self.mid + self.half * tau
        return td3.explore(u, sigma * self.half, self.lo, self.hi, rng)

    def eval_act(self, y_rows):
        if self._mu is None:
            raise UsageError("begin_episode(mu) must run before acting")
        tau = self._policy_tau_rows(np.atleast_2d(np.asarray(y_rows, float)))
        return np.clip(self.mid + self.half * tau, self.lo, self.hi)

    def update(self, batch, rng):
        """One critic step; every policy_delay-th call also updates the
        actor and Polyak-tracks all targets. Returns (critic, actor) losses,
        actor None on skipped steps."""
        critic_loss = td3.critic_update(batch, self, self.hyper, rng)
        self.critic_steps += 1
        actor_loss = None
        if self.critic_steps % self.hyper.policy_delay == 0:
            actor_loss = td3.actor_update(batch, self, self.hyper)
            self.actor_steps += 1
            self._polyak_targets()
        return critic_loss, actor_loss


class PlainStack(_StackBase):
    """Weight-shared TD3 nets over concatenated (observation, mu) inputs."""

    kind = "plain"

    def __init__(self, state_dim, action_dim, mu_dim, lo, hi, rng,
                 hyper=None, lrs=PLAIN_LRS, hidden=(256, 256), scope="local"):
        super().__init__(hyper or td3.Td3Hyper(), lrs, lo, hi)
        self.scope = scope
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.mu_dim = int(mu_dim)
        a_spec = MlpSpec(self.state_dim + self.mu_dim, hidden, self.action_dim,
                         "tanh", "tanh")
        q_spec = MlpSpec(self.state_dim + self.action_dim + self.mu_dim, hidden,
                         1, "tanh", "identity")
        self.actor = TrainedNet(a_spec, glorot_init(a_spec, rng))
        self.critic1 = TrainedNet(q_spec, glorot_init(q_spec, rng))
        self.critic2 = TrainedNet(q_spec, glorot_init(q_spec, rng))
        self.t_actor = self.actor.theta.copy()
        self.t_c1 = self.critic1.theta.copy()
        self.t_c2 = self.critic2.theta.copy()

    # ------------------------------------------------------------ acting

    def _policy_tau_rows(self, y_rows):
        mu = np.broadcast_to(self._mu, (y_rows.shape[0], self.mu_dim))
        x = np.concatenate([y_rows, mu], axis=1)
        return mlp_forward(self.actor.spec, self.actor.theta, x)

    # ------------------------------------------------------------ batch paths

    def target_policy_tau(self, batch):
        x = np.concatenate([batch["y2"], batch["mu"]], axis=1)
        return mlp_forward(self.actor.spec, self.t_actor, x)

    def target_twin_q(self, batch, tau):
        xq = np.concatenate([batch["y2"], tau, batch["mu"]], axis=1)
        q1 = mlp_forward(self.critic1.spec, self.t_c1, xq)[:, 0]
        q2 = mlp_forward(self.critic2.spec, self.t_c2, xq)[:, 0]
        return q1, q2

    def critic_q_tape(self, tape, batch):
        xq = np.concatenate([batch["y"], self.tau_of(batch["u"]), batch["mu"]],
                            axis=1)
        l1 = tape.leaf(self.critic1.theta)
        l2 = tape.leaf(self.critic2.theta)
        q1 = tape_mlp(tape, self.critic1.spec, l1, xq)
        q2 = tape_mlp(tape, self.critic2.spec, l2, xq)
        return q1, q2, {"c1": l1, "c2": l2}

    def actor_q_tape(self, tape, batch):
        la = tape.leaf(self.actor.theta)
        x = np.concatenate([batch["y"], batch["mu"]], axis=1)
        tau = tape_mlp(tape, self.actor.spec, la, x)
        qin = tape.concat_cols([batch["y"], tau, batch["mu"]])
        q1 = tape_mlp(tape, self.critic1.spec, self.critic1.theta, qin)
        q2 = tape_mlp(tape, self.critic2.spec, self.critic2.theta, qin)
        return q1, q2, {"actor": la}

    # ------------------------------------------------------------ parameter IO

    def apply_critic_grads(self, leaves):
        self.critic1.apply_grad(leaves["c1"].grad, self.lrs.critic)
        self.critic2.apply_grad(leaves["c2"].grad, self.lrs.critic)

    def apply_actor_grads(self, leaves):
        self.actor.apply_grad(leaves["actor"].grad, self.lrs.actor)

    def _polyak_targets(self):
        rho = self.hyper.rho
        self.t_actor = polyak(self.t_actor, self.actor.theta, rho)
        self.t_c1 = polyak(self.t_c1, self.critic1.theta, rho)
        self.t_c2 = polyak(self.t_c2, self.critic2.theta, rho)

    def _nets(self):
        return {"actor": self.actor, "c1": self.critic1, "c2": self.critic2}

    def state_dict(self):
        out = {"critic_steps": self.critic_steps, "actor_steps": self.actor_steps,
               "target.actor": self.t_actor.copy(),
               "target.c1": self.t_c1.copy(), "target.c2": self.t_c2.copy()}
        for name, net in self._nets().items():
            out[f"{name}.theta"] = net.theta.copy()
            out[f"{name}.m"] = net.opt.m.copy()
            out[f"{name}.v"] = net.opt.v.copy()
            out[f"{name}.step"] = net.opt.step
        return out

    def load_state_dict(self, state):
        for name, net in self._nets().items():
            theta = np.asarray(state[f"{name}.theta"], dtype=np.float64)
            if theta.shape != net.theta.shape:
                raise ConfigurationError(
                    f"stored {name} weights have shape {theta.shape}, "
                    f"expected {net.theta.shape}")
            net.theta = theta.copy()
            net.opt.m = np.asarray(state[f"{name}.m"], float).copy()
            net.opt.v = np.asarray(state[f"{name}.v"], float).copy()
            net.opt.step = int(state[f"{name}.step"])
        self.t_actor = np.asarray(state["target.actor"], float).copy()
        self.t_c1 = np.asarray(state["target.c1"], float).copy()
        self.t_c2 = np.asarray(state["target.c2"], float).copy()
        self.critic_steps = int(state["critic_steps"])
        self.actor_steps = int(state["actor_steps"])


class HyperStack(_StackBase):
    """Hypernetwork-emitted per-agent policy and twin critics.

    Policy emissions are cached per episode: agents' weights only change
    when the hypernetworks train, which happens between episodes, so one
    emission per (episode, mu) serves every step of that episode.
    """

    kind = "hyper"
    scope = "local"

    def __init__(self, pe_table, mu_dim, lo, hi, rng, probe_mus,
                 state_dim=1, action_dim=1, hyper=None, lrs=HYPER_LRS,
                 main_hidden=(256,), hyper_hidden=(256,)):
        super().__init__(hyper or td3.Td3Hyper(), lrs, lo, hi)
        self.pe_table = np.ascontiguousarray(pe_table, dtype=np.float64)
        if self.pe_table.ndim != 2:
            raise ConfigurationError(
                f"pe_table must be (n_agents, d), got {self.pe_table.shape}")
        self.mu_dim = int(mu_dim)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.pi_spec = policy_spec(state_dim, action_dim, main_hidden)
        self.q_spec = critic_spec(state_dim, action_dim, main_hidden)
        d = self.pe_table.shape[1]
        self.h_pi_spec = HyperSpec(self.pi_spec, d, mu_dim, hyper_hidden)
        self.h_q_spec = HyperSpec(self.q_spec, d, mu_dim, hyper_hidden)

        probes = self._probe_inputs(np.asarray(probe_mus, dtype=np.float64), rng)
        self.h_pi = TrainedNet(self.h_pi_spec.as_mlp(),
                               hyper_init(self.h_pi_spec, rng, probes))
        self.h_q1 = TrainedNet(self.h_q_spec.as_mlp(),
                               hyper_init(self.h_q_spec, rng, probes))
        self.h_q2 = TrainedNet(self.h_q_spec.as_mlp(),
                               hyper_init(self.h_q_spec, rng, probes))
        self.t_pi = self.h_pi.theta.copy()
        self.t_q1 = self.h_q1.theta.copy()
        self.t_q2 = self.h_q2.theta.copy()
        self._ep_pi = None

    def _probe_inputs(self, probe_mus, rng):
        if probe_mus.ndim != 2 or probe_mus.shape[1] != self.mu_dim:
            raise ConfigurationError(
                f"probe_mus must be (K, {self.mu_dim}), got {probe_mus.shape}")
        rows = rng.integers(0, self.pe_table.shape[0], size=probe_mus.shape[0])
        return hyper_input(self.pe_table[rows], probe_mus)

    # ------------------------------------------------------------ acting

    def begin_episode(self, mu):
        super().begin_episode(mu)
        self._ep_pi = None

    def _emitted_policy(self):
        if self._ep_pi is None:
            x = hyper_input(self.pe_table, self._mu)
            self._ep_pi = mlp_forward(self.h_pi_spec.as_mlp(), self.h_pi.theta, x)
        return self._ep_pi

    def _policy_tau_rows(self, y_rows):
        thetas = self._emitted_policy()
        if y_rows.shape[0] != thetas.shape[0]:
            raise UsageError(
                f"expected one state row per agent ({thetas.shape[0]}), "
                f"got {y_rows.shape[0]}")
        return grouped_forward(self.pi_spec, thetas, y_rows)

    # ------------------------------------------------------------ batch paths

    def _hyper_x(self, batch):
        return hyper_input(self.pe_table[batch["agent"]], batch["mu"])

    def target_policy_tau(self, batch):
        x = self._hyper_x(batch)
        thetas = mlp_forward(self.h_pi_spec.as_mlp(), self.t_pi, x)
        return grouped_forward(self.pi_spec, thetas, batch["y2"])

    def target_twin_q(self, batch, tau):
        x = self._hyper_x(batch)
        qin = np.concatenate([batch["y2"], tau], axis=1)
        hm = self.h_q_spec.as_mlp()
        q1 = grouped_forward(self.q_spec, mlp_forward(hm, self.t_q1, x), qin)[:, 0]
        q2 = grouped_forward(self.q_spec, mlp_forward(hm, self.t_q2, x), qin)[:, 0]
        return q1, q2

    def critic_q_tape(self, tape, batch):
        x = self._hyper_x(batch)
        qin = np.concatenate([batch["y"], self.tau_of(batch["u"])], axis=1)
        hm = self.h_q_spec.as_mlp()
        l1 = tape.leaf(self.h_q1.theta)
        l2 = tape.leaf(self.h_q2.theta)
        q1 = tape_grouped_mlp(tape, self.q_spec, tape_mlp(tape, hm, l1, x), qin)
        q2 = tape_grouped_mlp(tape, self.q_spec, tape_mlp(tape, hm, l2, x), qin)
        return q1, q2, {"c1": l1, "c2": l2}

    def actor_q_tape(self, tape, batch):
        x = self._hyper_x(batch)
        lp = tape.leaf(self.h_pi.theta)
        thetas = tape_mlp(tape, self.h_pi_spec.as_mlp(), lp, x)
        tau = tape_grouped_mlp(tape, self.pi_spec, thetas, batch["y"])
        qin = tape.concat_cols([batch["y"], tau])
        # Critic weights enter as plain arrays: frozen during the actor step.
        hm = self.h_q_spec.as_mlp()
        q1 = tape_grouped_mlp(tape, self.q_spec, mlp_forward(hm, self.h_q1.theta, x), qin)
        q2 = tape_grouped_mlp(tape, self.q_spec, mlp_forward(hm, self.h_q2.theta, x), qin)
        return q1, q2, {"actor": lp}

    # ------------------------------------------------------------ parameter IO

    def apply_critic_grads(self, leaves):
        self.h_q1.apply_grad(leaves["c1"].grad, self.lrs.critic)
        self.h_q2.apply_grad(leaves["c2"].grad, self.lrs.critic)

    def apply_actor_grads(self, leaves):
        self.h_pi.apply_grad(leaves["actor"].grad, self.lrs.actor)
        self._ep_pi = None

    def _polyak_targets(self):
        rho = self.hyper.rho
        self.t_pi = polyak(self.t_pi, self.h_pi.theta, rho)
        self.t_q1 = polyak(self.t_q1, self.h_q1.theta, rho)
        self.t_q2 = polyak(self.t_q2, self.h_q2.theta, rho)

    def _nets(self):
        return {"h_pi": self.h_pi, "h_q1": self.h_q1, "h_q2": self.h_q2}

    def state_dict(self):
        out = {"critic_steps": self.critic_steps, "actor_steps": self.actor_steps,
               "target.pi": self.t_pi.copy(),
               "target.q1": self.t_q1.copy(), "target.q2": self.t_q2.copy()}
        for name, net in self._nets().items():
            out[f"{name}.theta"] = net.theta.copy()
            out[f"{name}.m"] = net.opt.m.copy()
            out[f"{name}.v"] = net.opt.v.copy()
            out[f"{name}.step"] = net.opt.step
        return out

    def load_state_dict(self, state):
        for name, net in self._nets().items():
            theta = np.asarray(state[f"{name}.theta"], dtype=np.float64)
            if theta.shape != net.theta.shape:
                raise ConfigurationError(
                    f"stored {name} weights have shape {theta.shape}, "
                    f"expected {net.theta.shape}")
            net.theta = theta.copy()
            net.opt.m = np.asarray(state[f"{name}.m"], float).copy()
            net.opt.v = np.asarray(state[f"{name}.v"], float).copy()
            net.opt.step = int(state[f"{name}.step"])
        self.t_pi = np.asarray(state["target.pi"], float).copy()
        self.t_q1 = np.asarray(state["target.q1"], float).copy()
        self.t_q2 = np.asarray(state["target.q2"], float).copy()
        self.critic_steps = int(state["critic_steps"])
        self.actor_steps = int(state["actor_steps"])
        self._ep_pi = None


def agent_layout(env):
    """Agent placement used for positional encodings (row-major node index)."""
    if env.grid is None:
        return layout_positions(1, env.n_agents)
    return layout_positions(env.grid.rows, env.grid.cols)


def variant_select(variant, env, rng, hyper=None, lrs=None,
                   encoding=None, probe_count=64,
                   main_hidden=(256,), hyper_hidden=(256,),
                   plain_hidden=(256, 256)):
    """Build the agent stack for one training variant.

    hypemarl / mb-hypemarl share the same stack (the model-based part
    lives in the trainer); marl is the weight-shared decentralized
    baseline; single-rl observes the full state and emits the full
    control field as one action.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(
            f"unknown variant {variant!r}; expected one of {VARIANTS}")
    hyper = hyper or td3.Td3Hyper()
    if variant in ("hypemarl", "mb-hypemarl"):
        enc = encoding or EncodingConfig()
        pe = encode_layout(agent_layout(env), enc)
        probe_mus = np.stack([env.sample_task(rng)[1] for _ in range(probe_count)])
        return HyperStack(pe, env.mu_dim, env.u_min, env.u_max, rng,
                          probe_mus, hyper=hyper, lrs=lrs or HYPER_LRS,
                          main_hidden=main_hidden, hyper_hidden=hyper_hidden)
    if variant == "marl":
        return PlainStack(1, 1, env.mu_dim, env.u_min, env.u_max, rng,
                          hyper=hyper, lrs=lrs or PLAIN_LRS,
                          hidden=plain_hidden, scope="local")
    return PlainStack(env.n_agents, env.n_agents, env.mu_dim,
                      env.u_min, env.u_max, rng, hyper=hyper,
                      lrs=lrs or PLAIN_LRS, hidden=plain_hidden, scope="global")
