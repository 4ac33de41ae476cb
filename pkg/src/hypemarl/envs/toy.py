"""One-dimensional toy environment for fast tests.

Scalar integrator dynamics y' = y + u with actions in [-1, 1] and reward
-(y' - y_T)^2. The optimal single-step action from y is
clip(y_T - y, -1, 1), which doubles as a closed-form oracle for TD3
convergence tests.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


def toy_step(y, u):
    """Affine scalar dynamics; works on scalars or arrays."""
    return np.asarray(y, dtype=np.float64) + np.asarray(u, dtype=np.float64)


def toy_optimal_action(y, y_t, lo=-1.0, hi=1.0):
    """Closed-form greedy (and discounted-optimal) action."""
    return np.clip(np.asarray(y_t) - np.asarray(y), lo, hi)


@dataclass(frozen=True)
class ToyParams:
    u_min: float = -1.0
    u_max: float = 1.0
    y0_box: tuple = ((-1.0, 1.0),)
    target_box: tuple = ((-0.5, 0.5),)
    t_max: int = 10

    def __post_init__(self):
        if not self.u_max > self.u_min:
            raise ConfigurationError(
                f"empty action box [{self.u_min}, {self.u_max}]")
        if self.t_max < 0:
            raise ConfigurationError(f"t_max must be >= 0, got {self.t_max}")
