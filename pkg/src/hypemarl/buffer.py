"""FIFO replay buffer over local transitions, stored as flat arrays.

One row per transition: (agent index, y, u, r, y', mu). Positional
encodings are not stored; they are looked up from the layout's cached
table via the agent index at sampling time.
"""

import numpy as np

from .errors import ConfigurationError, UsageError


class ReplayBuffer:
    def __init__(self, capacity, state_dim, action_dim, mu_dim):
        if capacity < 1:
            raise ConfigurationError(f"buffer capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.agent = np.zeros(capacity, dtype=np.int64)
        self.y = np.zeros((capacity, state_dim))
        self.u = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.y2 = np.zeros((capacity, state_dim))
        self.mu = np.zeros((capacity, mu_dim))
        self.ptr = 0
        self.size = 0
        self.total_added = 0

    def __len__(self):
        return self.size

    def add_batch(self, agent_idx, y, u, r, y2, mu):
        """Append a block of transitions; oldest rows are evicted at capacity.

        ``mu`` may be a single vector shared by the whole block.
        """
        y = np.atleast_2d(y)
        n = y.shape[0]
        idx = (self.ptr + np.arange(n)) % self.capacity
        self.agent[idx] = agent_idx
        self.y[idx] = y
        self.u[idx] = np.atleast_2d(u)
        self.r[idx] = np.asarray(r, dtype=np.float64).ravel()
        self.y2[idx] = np.atleast_2d(y2)
        mu = np.asarray(mu, dtype=np.float64)
        self.mu[idx] = mu if mu.ndim == 2 else mu[None, :]
        self.ptr = int((self.ptr + n) % self.capacity)
        self.size = min(self.size + n, self.capacity)
        self.total_added += n

    def sample(self, batch_size, rng):
        """Uniform sample with replacement over current contents."""
        if self.size == 0:
            raise UsageError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "agent": self.agent[idx],
            "y": self.y[idx],
            "u": self.u[idx],
            "r": self.r[idx],
            "y2": self.y2[idx],
            "mu": self.mu[idx],
        }

    def rows(self):
        """All stored transitions in storage order (for tests/serialization)."""
        idx = np.arange(self.size)
        return {
            "agent": self.agent[idx],
            "y": self.y[idx],
            "u": self.u[idx],
            "r": self.r[idx],
            "y2": self.y2[idx],
            "mu": self.mu[idx],
        }

    def state_dict(self):
        return {
            "agent": self.agent.copy(),
            "y": self.y.copy(),
            "u": self.u.copy(),
            "r": self.r.copy(),
            "y2": self.y2.copy(),
            "mu": self.mu.copy(),
            "ptr": self.ptr,
            "size": self.size,
            "total_added": self.total_added,
        }

    def load_state_dict(self, state):
        for name in ("agent", "y", "u", "r", "y2", "mu"):
            arr = getattr(self, name)
            if arr.shape != state[name].shape:
                raise ConfigurationError(
                    f"buffer field {name} shape {state[name].shape} does not "
                    f"match allocated {arr.shape}")
            arr[...] = state[name]
        self.ptr = int(state["ptr"])
        self.size = int(state["size"])
        self.total_added = int(state["total_added"])
