"""Replay buffer FIFO semantics, sampling, and serialization."""

import numpy as np
import pytest

from hypemarl.buffer import ReplayBuffer
from hypemarl.errors import UsageError


def make(capacity=5):
    return ReplayBuffer(capacity, state_dim=1, action_dim=1, mu_dim=2)


def add_single(buf, k):
    buf.add_batch(np.array([k]), [[float(k)]], [[0.1 * k]], [-float(k)],
                  [[float(k) + 0.5]], np.array([k * 1.0, -k * 1.0]))


def test_fifo_eviction_drops_oldest():
    buf = make(5)
    for k in range(7):
        add_single(buf, k)
    assert len(buf) == 5
    assert buf.total_added == 7
    kept = sorted(buf.rows()["y"].ravel().tolist())
    assert kept == [2.0, 3.0, 4.0, 5.0, 6.0]


def test_capacity_never_exceeded():
    buf = make(4)
    buf.add_batch(np.arange(10), np.arange(10.0)[:, None],
                  np.zeros((10, 1)), np.zeros(10), np.zeros((10, 1)),
                  np.zeros((10, 2)))
    assert len(buf) == 4
    # The last four survive a block insert that wraps several times.
    assert sorted(buf.rows()["y"].ravel().tolist()) == [6.0, 7.0, 8.0, 9.0]


def test_block_insert_crossing_the_wrap_point():
    buf = make(5)
    buf.add_batch(np.arange(3), np.arange(3.0)[:, None], np.zeros((3, 1)),
                  np.zeros(3), np.zeros((3, 1)), np.zeros((3, 2)))
    buf.add_batch(np.arange(3, 7), np.arange(3.0, 7.0)[:, None],
                  np.zeros((4, 1)), np.zeros(4), np.zeros((4, 1)),
                  np.zeros((4, 2)))
    assert sorted(buf.rows()["y"].ravel().tolist()) == [2.0, 3.0, 4.0, 5.0, 6.0]


def test_round_trip_of_stored_fields():
    buf = make(8)
    add_single(buf, 3)
    row = buf.sample(1, np.random.default_rng(0))
    assert row["agent"][0] == 3
    assert row["y"][0, 0] == 3.0
    assert row["u"][0, 0] == pytest.approx(0.3)
    assert row["r"][0] == -3.0
    assert row["y2"][0, 0] == 3.5
    np.testing.assert_array_equal(row["mu"][0], [3.0, -3.0])


def test_shared_mu_broadcasts_over_block():
    buf = make(8)
    buf.add_batch(np.arange(4), np.zeros((4, 1)), np.zeros((4, 1)),
                  np.zeros(4), np.zeros((4, 1)), np.array([0.25, -0.5]))
    np.testing.assert_array_equal(buf.rows()["mu"],
                                  np.tile([0.25, -0.5], (4, 1)))


def test_sampling_is_uniform_over_contents_and_seeded():
    buf = make(64)
    for k in range(64):
        add_single(buf, k)
    a = buf.sample(32, np.random.default_rng(7))
    b = buf.sample(32, np.random.default_rng(7))
    np.testing.assert_array_equal(a["y"], b["y"])
    counts = np.bincount(
        buf.sample(20000, np.random.default_rng(8))["agent"], minlength=64)
    # Every stored transition is reachable and no index dominates.
    assert counts.min() > 0
    assert counts.max() < 3 * counts.mean()


def test_empty_sample_raises():
    with pytest.raises(UsageError):
        make().sample(4, np.random.default_rng(0))


def test_state_dict_round_trip():
    buf = make(6)
    for k in range(9):
        add_single(buf, k)
    state = buf.state_dict()
    other = make(6)
    other.load_state_dict(state)
    a = buf.sample(5, np.random.default_rng(3))
    b = other.sample(5, np.random.default_rng(3))
    for key in a:
        np.testing.assert_array_equal(a[key], b[key])
    assert other.ptr == buf.ptr and other.size == buf.size
