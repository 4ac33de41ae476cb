"""Surrogate transition model: regression quality, synthetic rollouts,
and the divergence guard."""

import numpy as np
import pytest

from hypemarl.buffer import ReplayBuffer
from hypemarl.encoding import EncodingConfig
from hypemarl.envs import make_env
from hypemarl.envs.fokker_planck import local_reward
from hypemarl.errors import UsageError
from hypemarl.stacks import variant_select
from hypemarl.surrogate import (
    fit_surrogate,
    make_surrogate,
    surrogate_predict,
    surrogate_rollout,
    surrogate_train_step,
)


def _small_stack(env, seed=0):
    return variant_select("hypemarl", env, np.random.default_rng(seed),
                          encoding=EncodingConfig(dim=16), probe_count=4,
                          main_hidden=(4,), hyper_hidden=(8,))


class TestPrediction:
    def test_output_shape(self):
        model = make_surrogate(2, np.random.default_rng(0))
        out = surrogate_predict(model, np.zeros(5), np.zeros(5), np.zeros((5, 2)))
        assert out.shape == (5,)

    def test_shared_mu_broadcast_matches_rows(self):
        model = make_surrogate(3, np.random.default_rng(1))
        rng = np.random.default_rng(2)
        y, u = rng.normal(size=5), rng.normal(size=5)
        mu = rng.normal(size=3)
        a = surrogate_predict(model, y, u, mu)
        b = surrogate_predict(model, y, u, np.tile(mu, (5, 1)))
        np.testing.assert_array_equal(a, b)


class TestRegression:
    def test_train_step_reduces_loss_on_fixed_batch(self):
        rng = np.random.default_rng(3)
        batch = {
            "y": rng.uniform(-1, 1, size=(128, 1)),
            "u": rng.uniform(-1, 1, size=(128, 1)),
            "mu": rng.uniform(-1, 1, size=(128, 1)),
        }
        batch["y2"] = batch["y"] + 0.1 * batch["u"]
        model = make_surrogate(1, np.random.default_rng(4), lr=1e-3)
        losses = [surrogate_train_step(model, batch) for _ in range(300)]
        assert losses[-1] < 0.1 * losses[0]
        assert model.train_steps == 300

    def test_fit_tracks_observed_state_magnitude(self):
        model = make_surrogate(1, np.random.default_rng(5))
        batch = {"y": np.array([[2.0]]), "u": np.zeros((1, 1)),
                 "mu": np.zeros((1, 1)), "y2": np.array([[-3.5]])}
        surrogate_train_step(model, batch)
        assert model.y_absmax == 3.5
        assert model.guard == pytest.approx(35.0)

    def test_fit_empty_buffer_raises(self):
        model = make_surrogate(1, np.random.default_rng(6))
        buf = ReplayBuffer(16, 1, 1, 1)
        with pytest.raises(UsageError):
            fit_surrogate(model, buf, np.random.default_rng(0), steps=1)

    def test_identity_dynamics_fit(self):
        """Data with y' = y regardless of (u, mu) is fitted to ~1e-2."""
        rng = np.random.default_rng(7)
        n = 5000
        buf = ReplayBuffer(n, 1, 1, 1)
        y = rng.uniform(-1, 1, size=(n, 1))
        buf.add_batch(np.zeros(n, dtype=int), y, rng.uniform(-1, 1, size=(n, 1)),
                      np.zeros(n), y, rng.uniform(-1, 1, size=(n, 1)))
        model = make_surrogate(1, np.random.default_rng(8), lr=1e-3)
        fit_surrogate(model, buf, np.random.default_rng(9), steps=2500)

        probe = np.random.default_rng(10)
        yp = probe.uniform(-1, 1, 512)
        pred = surrogate_predict(model, yp, probe.uniform(-1, 1, 512),
                                 probe.uniform(-1, 1, (512, 1)))
        err = pred - yp
        assert np.sqrt(np.mean(err ** 2)) < 1e-2
        assert np.abs(err).max() < 5e-2

    def test_vacuum_one_step_error_below_five_percent(self):
        """Fitted on random-policy transitions, held-out one-step predictions
        land within 5% (error normalized by the state range)."""
        env = make_env("vacuum", grid_rows=5)
        rng = np.random.default_rng(11)
        ys, us, y2s, mus = [], [], [], []
        for _ in range(40):
            mu0, mu = env.sample_task(rng)
            y = env.reset(mu0)
            for _ in range(env.t_max):
                u = rng.uniform(env.u_min, env.u_max, size=env.n_agents)
                y2 = env.step(y, u, mu)
                ys.append(y.copy())
                us.append(u)
                y2s.append(y2.copy())
                mus.append(np.broadcast_to(mu, (env.n_agents, 2)).copy())
                y = y2
        y = np.concatenate(ys)[:, None]
        u = np.concatenate(us)[:, None]
        y2 = np.concatenate(y2s)[:, None]
        mu = np.concatenate(mus)
        n = y.shape[0]
        split = int(0.9 * n)
        perm = np.random.default_rng(12).permutation(n)
        tr, te = perm[:split], perm[split:]

        buf = ReplayBuffer(split, 1, 1, 2)
        buf.add_batch(np.zeros(split, dtype=int), y[tr], u[tr],
                      np.zeros(split), y2[tr], mu[tr])
        model = make_surrogate(2, np.random.default_rng(13), lr=1e-3)
        fit_surrogate(model, buf, np.random.default_rng(14), steps=3000)

        pred = surrogate_predict(model, y[te][:, 0], u[te][:, 0], mu[te])
        err = pred - y2[te][:, 0]
        nrmse = np.sqrt(np.mean(err ** 2)) / (y2[te].max() - y2[te].min())
        assert nrmse < 0.05


class TestRollout:
    def test_rollout_is_buffer_ready_and_full_length(self):
        env = make_env("vacuum", grid_rows=2)
        stack = _small_stack(env)
        model = make_surrogate(env.mu_dim, np.random.default_rng(20))
        model.y_absmax = 5.0
        steps, total, truncated = surrogate_rollout(
            model, stack, env, np.random.default_rng(21), sigma=0.1)
        assert not truncated
        assert len(steps) == env.t_max
        n = env.n_agents
        buf = ReplayBuffer(n * env.t_max, 1, 1, env.mu_dim)
        for agent_idx, y, u, r, y2, mu in steps:
            assert y.shape == (n, 1) and u.shape == (n, 1)
            assert r.shape == (n,) and mu.shape == (env.mu_dim,)
            np.testing.assert_array_equal(agent_idx, np.arange(n))
            assert np.all(u >= env.u_min) and np.all(u <= env.u_max)
            buf.add_batch(agent_idx, y, u, r, y2, mu)
        assert buf.size == n * env.t_max  # n_agents * t_max transitions

    def test_rollout_chains_states_and_rewards(self):
        env = make_env("toy")
        stack = _small_stack(env, seed=1)
        model = make_surrogate(env.mu_dim, np.random.default_rng(22))
        model.y_absmax = 5.0
        steps, total, _ = surrogate_rollout(
            model, stack, env, np.random.default_rng(23), sigma=0.0)
        acc = 0.0
        for k, (idx, y, u, r, y2, mu) in enumerate(steps):
            if k > 0:
                np.testing.assert_array_equal(y, steps[k - 1][4])
            np.testing.assert_allclose(
                r, local_reward(y2[:, 0], env.target(mu)), rtol=0, atol=0)
            pred = surrogate_predict(model, y[:, 0], u[:, 0], mu)
            np.testing.assert_array_equal(y2[:, 0], pred)
            acc += r.mean()
        assert total == pytest.approx(acc)

    def test_rollout_deterministic_given_seed(self):
        env = make_env("toy")
        model = make_surrogate(env.mu_dim, np.random.default_rng(24))
        model.y_absmax = 5.0
        a = surrogate_rollout(model, _small_stack(env, 2), env,
                              np.random.default_rng(25), sigma=0.2)
        b = surrogate_rollout(model, _small_stack(env, 2), env,
                              np.random.default_rng(25), sigma=0.2)
        assert len(a[0]) == len(b[0])
        for sa, sb in zip(a[0], b[0]):
            for xa, xb in zip(sa, sb):
                np.testing.assert_array_equal(xa, xb)

    def test_divergence_guard_truncates_and_counts(self):
        env = make_env("toy")
        stack = _small_stack(env, seed=3)
        model = make_surrogate(env.mu_dim, np.random.default_rng(26))
        # Blow up the output layer so predictions leave the guard window.
        model.net.theta = model.net.theta * 0.0 + 100.0
        model.y_absmax = 1.0
        steps, _, truncated = surrogate_rollout(
            model, stack, env, np.random.default_rng(27), sigma=0.0)
        assert truncated
        assert model.truncations == 1
        assert len(steps) < env.t_max
