"""Hypernetwork emission, init statistics, and composite gradients."""

import numpy as np
import pytest

from hypemarl.encoding import EncodingConfig, encode_layout, layout_positions
from hypemarl.errors import ConfigurationError
from hypemarl.hypernet import (
    HyperSpec,
    critic_spec,
    hyper_forward,
    hyper_init,
    hyper_input,
    policy_act,
    policy_spec,
    value_eval,
)
from hypemarl.nn import (
    Tape,
    glorot_std,
    grad_check,
    mlp_forward,
    parameter_count,
    tape_grouped_mlp,
    tape_mlp,
    adam_state_for,
    adam_step,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def small_setup(seed=0, enc_dim=32, mu_dim=2, hidden=(24,), target=None):
    target = target or policy_spec(1, 1, hidden=(8,))
    hspec = HyperSpec(target_spec=target, encoding_dim=enc_dim,
                      mu_dim=mu_dim, hidden_dims=hidden)
    cfg = EncodingConfig(dim=enc_dim, base=100.0)
    lay = layout_positions(4, 4)
    pe = encode_layout(lay, cfg)
    r = rng(seed)
    mus = r.uniform(-0.75, 0.75, size=(pe.shape[0], mu_dim))
    probes = hyper_input(pe, mus)
    theta_h = hyper_init(hspec, r, probes)
    return hspec, pe, mus, theta_h


def test_zero_hypernet_emits_zero_weights_and_midpoint_action():
    hspec, pe, mus, _ = small_setup()
    theta_h = np.zeros(parameter_count(hspec.as_mlp()))
    emitted = hyper_forward(theta_h, hspec, pe[0], mus[0])
    np.testing.assert_array_equal(emitted, 0.0)
    u = policy_act(emitted, hspec.target_spec, np.array([0.7]), -5.0, 5.0)
    np.testing.assert_array_equal(u, [0.0])


def test_emitted_length_matches_target_parameter_count():
    target = policy_spec(1, 1, hidden=(256,))
    assert parameter_count(target) == 769
    hspec = HyperSpec(target_spec=target, encoding_dim=64, mu_dim=2,
                      hidden_dims=(32,))
    theta_h = rng(1).normal(size=parameter_count(hspec.as_mlp())) * 0.01
    pe = np.zeros(64)
    emitted = hyper_forward(theta_h, hspec, pe, np.zeros(2))
    assert emitted.shape == (769,)


def test_identical_inputs_get_bitwise_identical_weights():
    hspec, pe, mus, theta_h = small_setup()
    a = hyper_forward(theta_h, hspec, pe[3], mus[0])
    b = hyper_forward(theta_h, hspec, pe[3], mus[0])
    np.testing.assert_array_equal(a, b)
    # Batched emission agrees with one-at-a-time emission.
    batch = hyper_forward(theta_h, hspec, pe[:4], mus[0])
    for i in range(4):
        np.testing.assert_allclose(
            batch[i], hyper_forward(theta_h, hspec, pe[i], mus[0]), rtol=1e-14)


def test_dimension_mismatch_rejected():
    hspec, pe, mus, theta_h = small_setup()
    with pytest.raises(ConfigurationError):
        hyper_forward(theta_h, hspec, pe[0][:-1], mus[0])


def test_policy_bounds_respected_for_random_weights():
    spec = policy_spec(1, 1, hidden=(16,))
    for k in range(20):
        theta = rng(k).normal(size=parameter_count(spec)) * 3.0
        u = policy_act(theta, spec, rng(k + 100).normal(size=1), -5.0, 5.0)
        assert np.all(np.abs(u) <= 5.0)


def test_value_eval_gradient_wrt_action_matches_fd():
    spec = critic_spec(1, 1, hidden=(16,))
    theta = rng(2).normal(size=parameter_count(spec)) * 0.4
    y = np.array([0.3])
    u0 = 1.2
    h = 1e-5
    fd = (value_eval(theta, spec, y, [u0 + h], -5, 5)
          - value_eval(theta, spec, y, [u0 - h], -5, 5)) / (2 * h)

    # Analytic gradient via the tape: q as a function of tau, chain rule to u.
    t = Tape()
    tau0 = (np.array([u0]) - 0.0) / 5.0
    tau = t.leaf(np.array([[tau0[0]]]))
    qin = t.concat_cols([np.array([[0.3]]), tau])
    q = tape_mlp(t, spec, theta, qin)
    t.backward(t.mean_all(q))
    analytic = tau.grad[0, 0] / 5.0  # d tau / d u = 1 / halfwidth
    assert fd == pytest.approx(analytic, rel=1e-5)


def test_hyper_init_emitted_statistics():
    # Over 100 random (pe, mu): per-weight-slice std within [0.5x, 2x] of
    # the target Glorot std, emitted biases centered near zero.
    target = policy_spec(1, 1, hidden=(16,))
    hspec = HyperSpec(target_spec=target, encoding_dim=64, mu_dim=2,
                      hidden_dims=(48,))
    cfg = EncodingConfig(dim=64, base=1000.0)
    lay = layout_positions(10, 10)
    pe = encode_layout(lay, cfg)
    r = rng(3)
    mus = r.uniform(-0.75, 0.75, size=(100, 2))
    probes = hyper_input(pe, mus)
    theta_h = hyper_init(hspec, r, probes)

    emitted = hyper_forward(theta_h, hspec, pe, mus)  # (100, P)
    for (fi, fo), ((w0, w1), (b0, b1)) in zip(target.layer_dims(), target.slices()):
        slice_std = emitted[:, w0:w1].std()
        want = glorot_std(fi, fo)
        assert 0.5 * want <= slice_std <= 2.0 * want
        assert abs(emitted[:, b0:b1].mean()) < 0.05
        np.testing.assert_array_equal(emitted[:, b0:b1], 0.0)  # exact at init


def test_mu_changes_emitted_weights_after_a_training_step():
    hspec, pe, mus, theta_h = small_setup(seed=4)
    # One optimizer step with a synthetic gradient stands in for training.
    g = rng(5).normal(size=theta_h.shape)
    theta_h, _ = adam_step(theta_h, g, adam_state_for(theta_h), 1e-3)
    a = hyper_forward(theta_h, hspec, pe[0], np.array([0.1, 0.2]))
    b = hyper_forward(theta_h, hspec, pe[0], np.array([-0.3, 0.6]))
    assert np.abs(a - b).max() > 0.0


def test_composite_hypernet_to_mainnet_gradient():
    # End-to-end: d loss / d theta_H through emission and the emitted policy.
    hspec, pe, mus, theta_h = small_setup(seed=6)
    b = 6
    y = rng(7).normal(size=(b, 1))
    x = hyper_input(pe[:b], mus[:b])

    def f(th):
        t = Tape()
        leaf = t.leaf(th)
        emitted = tape_mlp(t, hspec.as_mlp(), leaf, x)
        tau = tape_grouped_mlp(t, hspec.target_spec, emitted, y)
        loss = t.mean_all(t.square(tau))
        t.backward(loss)
        return float(loss.value), leaf.grad

    assert grad_check(f, theta_h, probes=80, h=1e-5, rng=rng(8)) < 1e-5


def test_composite_value_matches_unbatched_reference():
    hspec, pe, mus, theta_h = small_setup(seed=9)
    b = 5
    y = rng(10).normal(size=(b, 1))
    x = hyper_input(pe[:b], mus[:b])
    t = Tape()
    emitted = tape_mlp(t, hspec.as_mlp(), t.leaf(theta_h), x)
    tau = tape_grouped_mlp(t, hspec.target_spec, emitted, y)
    for i in range(b):
        th_i = hyper_forward(theta_h, hspec, pe[i], mus[i])
        ref = mlp_forward(hspec.target_spec, th_i, y[i])
        np.testing.assert_allclose(tau.value[i], ref, rtol=1e-12)
