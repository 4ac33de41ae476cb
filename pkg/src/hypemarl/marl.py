"""Training orchestration: episodes, schedules, evaluation, and the
model-based interleaving.

One run is a seeded sequence of episodes. Warm-up episodes explore at
maximal noise with no updates; afterwards every episode (real or
synthetic) is followed by a block of TD3 updates from the shared replay
buffer. In model-based mode, each real episode refreshes the surrogate
(trained on real transitions only) and is followed by ``ratio``
synthetic episodes through it, so most of the episode budget never
touches the simulator. Evaluation runs noise-free on a fixed task set
drawn from a dedicated seed, shared across variants and seeds.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import td3
from .buffer import ReplayBuffer
from .errors import ConfigurationError
from .stacks import variant_select
from .surrogate import fit_surrogate, make_surrogate, surrogate_rollout


@dataclass(frozen=True)
class TrainSchedule:
    episodes: int = 500
    warmup: int = 25
    updates_per_episode: int = 0      # 0 -> one update per simulated step
    eval_every: int = 50
    eval_episodes: int = 5
    eval_seed: int = 20480
    surrogate_ratio: int = 10         # synthetic episodes per real one
    surrogate_initial_steps: int = 2000
    surrogate_steps_per_episode: int = 100
    surrogate_batch: int = 256
    sigma0: float = 0.2               # exploration noise, halfwidth units
    sigma_end: float = 0.05
    buffer_capacity: int = 500_000
    checkpoint_every: int = 0         # 0 -> final checkpoint only

    def __post_init__(self):
        if self.episodes < 1 or not 0 <= self.warmup <= self.episodes:
            raise ConfigurationError(
                f"need episodes >= 1 and 0 <= warmup <= episodes, got "
                f"episodes={self.episodes}, warmup={self.warmup}")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ConfigurationError(
                f"eval_every and eval_episodes must be >= 1, got "
                f"{self.eval_every}, {self.eval_episodes}")
        if self.surrogate_ratio < 0:
            raise ConfigurationError(
                f"surrogate_ratio must be >= 0, got {self.surrogate_ratio}")
        if self.sigma0 < 0 or self.sigma_end < 0:
            raise ConfigurationError(
                f"noise levels must be >= 0, got sigma0={self.sigma0}, "
                f"sigma_end={self.sigma_end}")
        if (self.updates_per_episode < 0 or self.buffer_capacity < 1
                or self.checkpoint_every < 0):
            raise ConfigurationError("bad schedule counts: "
                                     f"{self}")


def run_episode(env, stack, task, sigma, rng, mode="real", model=None):
    """Roll one episode; returns (steps, return).

    ``steps`` is a list of ReplayBuffer.add_batch-ready blocks, one per
    time step. Real mode steps the simulator; surrogate mode steps the
    learned model (and may truncate early on divergence). The return is
    the time-sum of agent-mean rewards.
    """
    if mode == "surrogate":
        steps, total, _ = surrogate_rollout(model, stack, env, rng, sigma,
                                            task=task)
        return steps, total
    mu0, mu = task
    y = env.reset(mu0)
    stack.begin_episode(mu)
    n = env.n_agents
    agent_idx = np.arange(n)
    steps = []
    total = 0.0
    for _ in range(env.t_max):
        if stack.scope == "global":
            u = stack.act(y[None, :], sigma, rng)[0]
        else:
            u = stack.act(y[:, None], sigma, rng)[:, 0]
        y2 = env.step(y, u, mu)
        r = env.rewards(y2, mu)
        if stack.scope == "global":
            steps.append((np.zeros(1, dtype=np.int64), y[None, :].copy(),
                          u[None, :].copy(), np.array([r.mean()]),
                          y2[None, :].copy(), mu))
        else:
            steps.append((agent_idx, y[:, None].copy(), u[:, None].copy(),
                          r, y2[:, None].copy(), mu))
        total += float(r.mean())
        y = y2
    return steps, total


def eval_tasks(env, eval_seed, count):
    """The fixed (mu0, mu) tuples used for every periodic evaluation."""
    rng = np.random.default_rng(eval_seed)
    return [env.sample_task(rng) for _ in range(count)]


def evaluate(env, stack, tasks):
    """Noise-free rollouts on fixed tasks; aggregate return and final error."""
    returns = []
    finals = []
    reward_maps = []
    for mu0, mu in tasks:
        y = env.reset(mu0)
        stack.begin_episode(mu)
        total = 0.0
        for _ in range(env.t_max):
            if stack.scope == "global":
                u = stack.eval_act(y[None, :])[0]
            else:
                u = stack.eval_act(y[:, None])[:, 0]
            y = env.step(y, u, mu)
            total += float(env.rewards(y, mu).mean())
        returns.append(total)
        target = env.target(mu)
        finals.append(float(np.mean((y - target) ** 2)))
        reward_maps.append(env.rewards(y, mu))
    returns = np.array(returns)
    return {
        "returns": returns,
        "mean_return": float(returns.mean()),
        "median_return": float(np.median(returns)),
        "final_mses": np.array(finals),
        "final_mse": float(np.mean(finals)),
        "reward_maps": np.stack(reward_maps),
    }


def uncontrolled(env, tasks):
    """Zero-action rollouts on the same tasks: the do-nothing baseline."""
    returns = []
    finals = []
    u = np.zeros(env.n_agents)
    for mu0, mu in tasks:
        y = env.reset(mu0)
        total = 0.0
        for _ in range(env.t_max):
            y = env.step(y, u, mu)
            total += float(env.rewards(y, mu).mean())
        returns.append(total)
        finals.append(float(np.mean((y - env.target(mu)) ** 2)))
    return {"returns": np.array(returns),
            "mean_return": float(np.mean(returns)),
            "median_return": float(np.median(returns)),
            "final_mses": np.array(finals),
            "final_mse": float(np.mean(finals))}


def _buffer_dims(env, stack):
    if stack.scope == "global":
        return env.n_agents, env.n_agents
    return 1, 1


def train(env, variant, seed, schedule, *, hyper=None, lrs=None, encoding=None,
          writer=None, checkpoint_cb=None, resume=None, stop_after=None,
          probe_count=64, main_hidden=(256,), hyper_hidden=(256,),
          plain_hidden=(256, 256)):
    """One seeded training run; returns (stack, artifacts).

    ``writer`` is an optional MetricWriter; ``checkpoint_cb(snapshot)``
    is invoked at the schedule's checkpoint points with a state snapshot
    sufficient to resume; ``resume`` restores such a snapshot and
    continues mid-run as if uninterrupted. ``stop_after`` interrupts the
    run at that episode without altering the schedule (noise decay and
    evaluation cadence still follow the full schedule).
    """
    rng = np.random.default_rng(seed)
    stack = variant_select(variant, env, rng, hyper=hyper, lrs=lrs,
                           encoding=encoding, probe_count=probe_count,
                           main_hidden=main_hidden, hyper_hidden=hyper_hidden,
                           plain_hidden=plain_hidden)
    hyper = stack.hyper
    sdim, adim = _buffer_dims(env, stack)
    replay = ReplayBuffer(schedule.buffer_capacity, sdim, adim, env.mu_dim)
    mb = variant == "mb-hypemarl" and schedule.surrogate_ratio > 0
    model = make_surrogate(env.mu_dim, rng) if mb else None
    real_buffer = (ReplayBuffer(schedule.buffer_capacity, 1, 1, env.mu_dim)
                   if mb else None)

    ep = 0
    real_eps = 0
    synth_left = 0
    fitted = False
    surr_loss = float("nan")

    if resume is not None:
        stack.load_state_dict(resume["stack"])
        replay.load_state_dict(resume["replay"])
        if mb:
            model.net.theta = np.asarray(resume["surrogate.theta"]).copy()
            model.net.opt.m = np.asarray(resume["surrogate.m"]).copy()
            model.net.opt.v = np.asarray(resume["surrogate.v"]).copy()
            model.net.opt.step = int(resume["surrogate.step"])
            model.y_absmax = float(resume["surrogate.y_absmax"])
            model.train_steps = int(resume["surrogate.train_steps"])
            model.truncations = int(resume["surrogate.truncations"])
            real_buffer.load_state_dict(resume["real_buffer"])
        rng.bit_generator.state = resume["rng_state"]
        ep = int(resume["episode"])
        real_eps = int(resume["real_episodes"])
        synth_left = int(resume["synth_left"])
        fitted = bool(resume["fitted"])
        surr_loss = float(resume["surrogate_loss"])

    def snapshot():
        snap = {
            "variant": variant,
            "seed": seed,
            "episode": ep,
            "real_episodes": real_eps,
            "synth_left": synth_left,
            "fitted": fitted,
            "surrogate_loss": surr_loss,
            "rng_state": rng.bit_generator.state,
            "stack": stack.state_dict(),
            "replay": replay.state_dict(),
        }
        if mb:
            snap["surrogate.theta"] = model.net.theta.copy()
            snap["surrogate.m"] = model.net.opt.m.copy()
            snap["surrogate.v"] = model.net.opt.v.copy()
            snap["surrogate.step"] = model.net.opt.step
            snap["surrogate.y_absmax"] = model.y_absmax
            snap["surrogate.train_steps"] = model.train_steps
            snap["surrogate.truncations"] = model.truncations
            snap["real_buffer"] = real_buffer.state_dict()
        return snap

    tasks = eval_tasks(env, schedule.eval_seed, schedule.eval_episodes)
    g_updates = schedule.updates_per_episode or env.t_max
    t_start = time.monotonic()
    history = {"eval_episode": [], "eval_return": [], "eval_final_mse": []}
    limit = (schedule.episodes if stop_after is None
             else min(schedule.episodes, int(stop_after)))

    while ep < limit:
        in_warmup = ep < schedule.warmup
        sigma = td3.sigma_schedule(ep, schedule.warmup, schedule.episodes,
                                   schedule.sigma0, schedule.sigma_end)
        if mb and not in_warmup and not fitted:
            surr_loss = fit_surrogate(model, real_buffer, rng,
                                      schedule.surrogate_initial_steps,
                                      schedule.surrogate_batch)
            fitted = True

        synthetic = mb and fitted and not in_warmup and synth_left > 0
        if synthetic:
            steps, ret = run_episode(env, stack, None, sigma, rng,
                                     mode="surrogate", model=model)
            synth_left -= 1
        else:
            task = env.sample_task(rng)
            steps, ret = run_episode(env, stack, task, sigma, rng)
            real_eps += 1
            if mb:
                for blk in steps:
                    real_buffer.add_batch(*blk)
                if fitted:
                    surr_loss = fit_surrogate(
                        model, real_buffer, rng,
                        schedule.surrogate_steps_per_episode,
                        schedule.surrogate_batch)
                    synth_left = schedule.surrogate_ratio
        for blk in steps:
            replay.add_batch(*blk)

        critic_loss = actor_loss = float("nan")
        if not in_warmup:
            cl, al = [], []
            for _ in range(g_updates):
                c, a = stack.update(replay.sample(hyper.batch_size, rng), rng)
                cl.append(c)
                if a is not None:
                    al.append(a)
            if cl:
                critic_loss = float(np.mean(cl))
            if al:
                actor_loss = float(np.mean(al))

        ep += 1
        if writer is not None:
            writer.log(ep, "surrogate" if synthetic else "real", ret,
                       critic_loss, actor_loss, surr_loss,
                       time.monotonic() - t_start, real_eps)

        if ep % schedule.eval_every == 0 or ep == schedule.episodes:
            ev = evaluate(env, stack, tasks)
            history["eval_episode"].append(ep)
            history["eval_return"].append(ev["mean_return"])
            history["eval_final_mse"].append(ev["final_mse"])
            if writer is not None:
                writer.log(ep, "eval", ev["mean_return"], float("nan"),
                           float("nan"), float("nan"),
                           time.monotonic() - t_start, real_eps)

        at_checkpoint = (schedule.checkpoint_every > 0
                         and ep % schedule.checkpoint_every == 0)
        if checkpoint_cb is not None and (at_checkpoint or ep == limit):
            checkpoint_cb(snapshot())

    artifacts = {
        "history": {k: np.array(v) for k, v in history.items()},
        "real_episodes": real_eps,
        "episodes": ep,
        "buffer_size": replay.size,
        "buffer_total_added": replay.total_added,
        "surrogate": model,
        "eval_tasks": tasks,
    }
    return stack, artifacts
