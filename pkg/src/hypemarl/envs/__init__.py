"""Control environments: Fokker-Planck on a grid (vacuum/fluid) and a 1-D toy.

Every environment exposes the same pure-step protocol:

- ``sample_task(rng) -> (mu0, mu)``: initial-condition and system params;
- ``reset(mu0) -> y``: initial state vector;
- ``target(mu) -> y_T``: per-node target values;
- ``step(y, u, mu) -> y'``: one transition;
- ``rewards(y_next, mu) -> r``: per-agent local rewards of the post-step
  state (the reward convention used throughout training).
"""

import numpy as np

from ..errors import ConfigurationError
from .fokker_planck import (
    FLUID_PARAMS,
    VACUUM_PARAMS,
    EnvParams,
    fp_fluid_step,
    fp_vacuum_step,
    initial_density,
    local_reward,
    sample_params,
    target_density,
    velocity_field,
)
from .grid import Grid2D
from .toy import ToyParams, toy_optimal_action, toy_step


class VacuumEnv:
    """Diffusion-only Fokker-Planck control; mu is the target center."""

    kind = "vacuum"
    mu_dim = 2

    def __init__(self, grid, params=VACUUM_PARAMS):
        self.grid = grid
        self.params = params

    @property
    def n_agents(self):
        return self.grid.n

    @property
    def u_min(self):
        return self.params.u_min

    @property
    def u_max(self):
        return self.params.u_max

    @property
    def t_max(self):
        return self.params.t_max

    def sample_task(self, rng):
        return sample_params(self.kind, rng, self.params)

    def reset(self, mu0):
        return initial_density(mu0, self.grid)

    def target(self, mu):
        return target_density(mu, self.grid)

    def step(self, y, u, mu):
        return fp_vacuum_step(y, u, self.params, self.grid)

    def rewards(self, y_next, mu):
        return local_reward(y_next, self.target(mu))


class FluidEnv(VacuumEnv):
    """Adds divergence-free transport; mu = (target center, angle of attack)."""

    kind = "fluid"
    mu_dim = 3

    def __init__(self, grid, params=FLUID_PARAMS):
        if params.alpha_box is None:
            raise ConfigurationError("fluid environment needs an alpha_box")
        super().__init__(grid, params)

    def step(self, y, u, mu):
        return fp_fluid_step(y, u, float(mu[2]), self.params, self.grid)


class ToyEnv:
    """Scalar integrator with one agent; mu is the target value itself."""

    kind = "toy"
    mu_dim = 1

    def __init__(self, params=None):
        self.params = params or ToyParams()
        self.grid = None

    n_agents = 1

    @property
    def u_min(self):
        return self.params.u_min

    @property
    def u_max(self):
        return self.params.u_max

    @property
    def t_max(self):
        return self.params.t_max

    def sample_task(self, rng):
        (lo0, hi0), = self.params.y0_box
        (lot, hit), = self.params.target_box
        return np.array([rng.uniform(lo0, hi0)]), np.array([rng.uniform(lot, hit)])

    def reset(self, mu0):
        return np.asarray(mu0, dtype=np.float64).copy()

    def target(self, mu):
        return np.asarray(mu, dtype=np.float64).copy()

    def step(self, y, u, mu):
        return toy_step(y, u)

    def rewards(self, y_next, mu):
        return local_reward(y_next, self.target(mu))


ENV_KINDS = ("vacuum", "fluid", "toy")


def make_env(kind, grid_rows=33, params=None):
    """Build one environment by kind; grid_rows is ignored for the toy."""
    if kind == "toy":
        return ToyEnv(params)
    grid = Grid2D(grid_rows, grid_rows)
    if kind == "vacuum":
        return VacuumEnv(grid, params or VACUUM_PARAMS)
    if kind == "fluid":
        return FluidEnv(grid, params or FLUID_PARAMS)
    raise ConfigurationError(
        f"unknown environment kind {kind!r}; expected one of {ENV_KINDS}")
