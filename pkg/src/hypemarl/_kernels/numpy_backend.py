"""Pure-NumPy implementations of the hot kernels.

Same signatures as the compiled core in ``_core.pyx``; selected at import
time by ``hypemarl._kernels`` when the extension is unavailable or the
``HYPEMARL_PURE_PYTHON`` environment variable is set.
"""

import numpy as np

NAME = "numpy"


def adam_apply(p, g, m, v, step, lr, beta1, beta2, eps):
    """One bias-corrected Adam update. ``step`` is the new step count (>= 1)."""
    m2 = beta1 * m + (1.0 - beta1) * g
    v2 = beta2 * v + (1.0 - beta2) * (g * g)
    mhat = m2 / (1.0 - beta1**step)
    vhat = v2 / (1.0 - beta2**step)
    p2 = p - lr * mhat / (np.sqrt(vhat) + eps)
    return p2, m2, v2


def polyak_apply(target, source, rho):
    """rho*source + (1-rho)*target, elementwise."""
    return rho * source + (1.0 - rho) * target


def grouped_linear(w, x):
    """Per-sample linear map: w (B,n_in,n_out), x (B,n_in) -> (B,n_out)."""
    return np.einsum("bio,bi->bo", w, x)


def grouped_linear_backward(w, x, gy):
    """Gradients of grouped_linear: returns (gW, gx)."""
    gw = np.einsum("bi,bo->bio", x, gy)
    gx = np.einsum("bio,bo->bi", w, gy)
    return gw, gx


def huber_mean_grad(resid, delta):
    """Mean Huber loss over a residual vector and its gradient w.r.t. resid."""
    a = np.abs(resid)
    quad = a <= delta
    loss = np.where(quad, 0.5 * resid * resid, delta * (a - 0.5 * delta))
    grad = np.where(quad, resid, delta * np.sign(resid)) / resid.size
    return float(loss.mean()), grad


def laplacian_neumann(y, inv_h2):
    """Finite-volume 5-point Laplacian on a cell-centered grid, zero-flux walls.

    Missing neighbors contribute nothing, which makes the operator symmetric
    with zero row and column sums (exact discrete mass conservation).
    """
    out = np.zeros_like(y)
    out[:, 1:] += y[:, :-1] - y[:, 1:]
    out[:, :-1] += y[:, 1:] - y[:, :-1]
    out[1:, :] += y[:-1, :] - y[1:, :]
    out[:-1, :] += y[1:, :] - y[:-1, :]
    out *= inv_h2
    return out


def advect_upwind(y, v1f, v2f, dt_over_h):
    """One explicit upwind advection substep in flux form.

    v1f (R,C+1) and v2f (R+1,C) are face-normal velocities; boundary faces
    carry zero flux so total mass is conserved exactly (flux telescoping).
    """
    rows, cols = y.shape
    f1 = np.zeros((rows, cols + 1))
    v = v1f[:, 1:cols]
    f1[:, 1:cols] = v * np.where(v > 0.0, y[:, : cols - 1], y[:, 1:])
    f2 = np.zeros((rows + 1, cols))
    v = v2f[1:rows, :]
    f2[1:rows, :] = v * np.where(v > 0.0, y[: rows - 1, :], y[1:, :])
    div = (f1[:, 1:] - f1[:, :-1]) + (f2[1:, :] - f2[:-1, :])
    return y - dt_over_h * div
