"""Fokker-Planck control environments on a finite-difference grid.

Dynamics: dy/dt = kappa * Lap(y) - div(v y) + u with zero-flux walls,
discretized by implicit Euler for diffusion (conjugate gradients on the
SPD system) and explicit flux-form upwinding for advection, sub-stepped
to respect the CFL limit. The vacuum case has v = 0; the fluid case uses
an analytic divergence-free velocity parametrized by an angle of attack.

The distributed source u is the joint action: one scalar per node.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .. import _kernels as kern
from ..errors import ConfigurationError, NumericalError
from .grid import Grid2D

CG_ATOL = 1e-12
CFL_LIMIT = 0.9


@dataclass(frozen=True)
class EnvParams:
    """Physical and task constants of one environment family."""

    kappa: float = 0.001
    dt: float = 0.1
    t_final: float = 1.0
    u_min: float = -5.0
    u_max: float = 5.0
    mu0_box: tuple = ((-0.75, 0.0), (-0.75, 0.75))
    target_box: tuple = ((0.0, 0.75), (-0.75, 0.75))
    alpha_box: tuple = None

    def __post_init__(self):
        if self.kappa < 0 or self.dt <= 0 or self.t_final <= 0:
            raise ConfigurationError(
                f"need kappa >= 0, dt > 0, t_final > 0; got kappa={self.kappa}, "
                f"dt={self.dt}, t_final={self.t_final}")
        if not self.u_max > self.u_min:
            raise ConfigurationError(
                f"empty action box [{self.u_min}, {self.u_max}]")
        for name, box in (("mu0_box", self.mu0_box), ("target_box", self.target_box)):
            for lo, hi in box:
                if hi < lo:
                    raise ConfigurationError(f"{name} component [{lo}, {hi}] is empty")

    @property
    def t_max(self):
        return int(round(self.t_final / self.dt))


VACUUM_PARAMS = EnvParams()
FLUID_PARAMS = EnvParams(
    mu0_box=((-0.75, -0.25), (-0.75, 0.75)),
    target_box=((0.25, 0.75), (-0.75, 0.75)),
    alpha_box=(-1.0, 1.0),
)


def gaussian_density(center, grid):
    """(10/pi) exp(-10 (x1-c1)^2 - 10 (x2-c2)^2) at every node; unit
    continuum mass, variance 0.05."""
    xy = grid.coords()
    d1 = xy[:, 0] - center[0]
    d2 = xy[:, 1] - center[1]
    return (10.0 / np.pi) * np.exp(-10.0 * d1 * d1 - 10.0 * d2 * d2)


def initial_density(mu0, grid):
    return gaussian_density(np.asarray(mu0, dtype=np.float64), grid)


def target_density(mu_t, grid):
    return gaussian_density(np.asarray(mu_t, dtype=np.float64)[:2], grid)


def local_reward(y, y_t):
    """Per-node reward -(y - y_T)^2; elementwise, always <= 0."""
    d = np.asarray(y) - np.asarray(y_t)
    return -d * d


def _check_actions(u, params):
    tol = 1e-9 * max(1.0, abs(params.u_max), abs(params.u_min))
    if np.min(u) < params.u_min - tol or np.max(u) > params.u_max + tol:
        raise ConfigurationError(
            f"actions outside [{params.u_min}, {params.u_max}]: "
            f"range [{np.min(u)}, {np.max(u)}]")


def _implicit_diffusion(rhs2d, coef, grid):
    """Solve (I - coef*Lap) x = rhs by CG; Lap is the zero-flux stencil."""
    if coef == 0.0:
        return rhs2d.copy()
    shape = rhs2d.shape
    inv_h2 = 1.0 / (grid.h * grid.h)

    def matvec(x):
        x2 = x.reshape(shape)
        return (x2 - coef * kern.laplacian_neumann(np.ascontiguousarray(x2),
                                                   inv_h2)).ravel()

    op = LinearOperator((grid.n, grid.n), matvec=matvec, dtype=np.float64)
    x, info = cg(op, rhs2d.ravel(), x0=rhs2d.ravel(), rtol=1e-14, atol=CG_ATOL,
                 maxiter=500)
    if info != 0:
        raise NumericalError(f"diffusion CG did not converge (info={info})")
    return x.reshape(shape)


def fp_vacuum_step(y, u, params, grid):
    """One implicit-Euler step of dy/dt = kappa*Lap(y) + u.

    Exact discrete mass identity: mass(y') = mass(y) + dt * mass(u),
    because the cell-centered zero-flux Laplacian has zero column sums.
    """
    _check_actions(u, params)
    y2 = grid.to_2d(y)
    u2 = grid.to_2d(u)
    rhs = y2 + params.dt * u2
    out = _implicit_diffusion(rhs, params.dt * params.kappa, grid)
    return out.ravel()


def velocity_field(alpha, grid):
    """Analytic divergence-free velocity at every node, shape (N, 2).

    Streamfunction psi = -cos(a)*x1 - sin(a)*x2*(1 - x1^2) gives
    v1 = -sin(a)*(1 - x1^2)  (zero on the x1 = +-1 walls),
    v2 = cos(a) - 2 sin(a) x1 x2  (upward bulk transport ~ cos(a)).
    Polynomial components make the central-difference divergence exactly
    zero, and a -> -a mirrors the field about x1 = 0.
    """
    xy = grid.coords()
    x1, x2 = xy[:, 0], xy[:, 1]
    sa, ca = np.sin(alpha), np.cos(alpha)
    v1 = -sa * (1.0 - x1 * x1)
    v2 = ca - 2.0 * sa * x1 * x2
    return np.stack([v1, v2], axis=1)


def _face_velocities(alpha, grid):
    """Face-normal velocities for the upwind scheme (wall faces included,
    but the scheme zeroes wall fluxes regardless)."""
    sa, ca = np.sin(alpha), np.cos(alpha)
    xf = -1.0 + np.arange(grid.cols + 1) * grid.h   # x1 at vertical faces
    xc = grid.x1
    yf = -1.0 + np.arange(grid.rows + 1) * grid.h   # x2 at horizontal faces
    v1f = np.broadcast_to(-sa * (1.0 - xf * xf), (grid.rows, grid.cols + 1)).copy()
    v2f = ca - 2.0 * sa * xc[None, :] * yf[:, None]
    return v1f, np.ascontiguousarray(v2f)


def fp_transport_step(y, u, v1f, v2f, params, grid):
    """Advection-diffusion-source step with explicit face velocities.

    Explicit upwind advection substeps (CFL-limited), then the implicit
    diffusion/source solve. Zero-total-flux walls conserve mass exactly
    up to the CG tolerance when u = 0; with zero velocities this reduces
    bitwise to ``fp_vacuum_step``.
    """
    _check_actions(u, params)
    y2 = grid.to_2d(y)
    u2 = grid.to_2d(u)
    vmax = max(np.abs(v1f).max(), np.abs(v2f).max())
    if vmax > 0.0:
        nsub = int(np.ceil(params.dt * vmax / (CFL_LIMIT * grid.h)))
        sub = params.dt / nsub / grid.h
        for _ in range(nsub):
            y2 = kern.advect_upwind(np.ascontiguousarray(y2), v1f, v2f, sub)
    rhs = y2 + params.dt * u2
    out = _implicit_diffusion(rhs, params.dt * params.kappa, grid)
    return out.ravel()


def fp_fluid_step(y, u, alpha, params, grid):
    """One step of dy/dt + div(-kappa grad y + v(alpha) y) = u."""
    v1f, v2f = _face_velocities(alpha, grid)
    return fp_transport_step(y, u, v1f, v2f, params, grid)


def sample_box(box, rng):
    return np.array([rng.uniform(lo, hi) for lo, hi in box])


def sample_params(kind, rng, params):
    """Draw one episode's (mu0, mu); mu is the system-parameter vector the
    agents condition on (target center, plus the angle in the fluid case)."""
    mu0 = sample_box(params.mu0_box, rng)
    mu_t = sample_box(params.target_box, rng)
    if kind == "vacuum":
        return mu0, mu_t
    if kind == "fluid":
        alpha = rng.uniform(*params.alpha_box)
        return mu0, np.concatenate([mu_t, [alpha]])
    raise ConfigurationError(f"unknown environment kind {kind!r}")
