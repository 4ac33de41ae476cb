# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels (fused loops, no temporaries).

Mirrors ``numpy_backend`` exactly; parity is enforced by tests.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()

NAME = "cython"


def adam_apply(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
               long step, double lr, double beta1, double beta2, double eps):
    """One bias-corrected Adam update. ``step`` is the new step count (>= 1)."""
    cdef Py_ssize_t n = p.shape[0], i
    cdef cnp.ndarray[double, ndim=1] p2 = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] m2 = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] v2 = np.empty(n)
    cdef double[::1] p2v = p2, m2v = m2, v2v = v2
    cdef double c1 = 1.0 - pow(beta1, <double> step)
    cdef double c2 = 1.0 - pow(beta2, <double> step)
    cdef double mi, vi
    for i in range(n):
        mi = beta1 * m[i] + (1.0 - beta1) * g[i]
        vi = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        m2v[i] = mi
        v2v[i] = vi
        p2v[i] = p[i] - lr * (mi / c1) / (sqrt(vi / c2) + eps)
    return p2, m2, v2


def polyak_apply(double[::1] target, double[::1] source, double rho):
    """rho*source + (1-rho)*target, elementwise."""
    cdef Py_ssize_t n = target.shape[0], i
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] ov = out
    for i in range(n):
        ov[i] = rho * source[i] + (1.0 - rho) * target[i]
    return out


def grouped_linear(double[:, :, ::1] w, double[:, ::1] x):
    """Per-sample linear map: w (B,n_in,n_out), x (B,n_in) -> (B,n_out)."""
    cdef Py_ssize_t b = w.shape[0], ni = w.shape[1], no = w.shape[2]
    cdef Py_ssize_t k, i, o
    cdef cnp.ndarray[double, ndim=2] y = np.zeros((b, no))
    cdef double[:, ::1] yv = y
    cdef double xi
    for k in range(b):
        for i in range(ni):
            xi = x[k, i]
            for o in range(no):
                yv[k, o] += w[k, i, o] * xi
    return y


def grouped_linear_backward(double[:, :, ::1] w, double[:, ::1] x,
                            double[:, ::1] gy):
    """Gradients of grouped_linear: returns (gW, gx)."""
    cdef Py_ssize_t b = w.shape[0], ni = w.shape[1], no = w.shape[2]
    cdef Py_ssize_t k, i, o
    cdef cnp.ndarray[double, ndim=3] gw = np.empty((b, ni, no))
    cdef cnp.ndarray[double, ndim=2] gx = np.zeros((b, ni))
    cdef double[:, :, ::1] gwv = gw
    cdef double[:, ::1] gxv = gx
    cdef double xi, acc
    for k in range(b):
        for i in range(ni):
            xi = x[k, i]
            acc = 0.0
            for o in range(no):
                gwv[k, i, o] = xi * gy[k, o]
                acc += w[k, i, o] * gy[k, o]
            gxv[k, i] = acc
    return gw, gx


def huber_mean_grad(double[::1] resid, double delta):
    """Mean Huber loss over a residual vector and its gradient w.r.t. resid."""
    cdef Py_ssize_t n = resid.shape[0], i
    cdef cnp.ndarray[double, ndim=1] grad = np.empty(n)
    cdef double[::1] gv = grad
    cdef double loss = 0.0, r, a, inv_n = 1.0 / n
    for i in range(n):
        r = resid[i]
        a = fabs(r)
        if a <= delta:
            loss += 0.5 * r * r
            gv[i] = r * inv_n
        else:
            loss += delta * (a - 0.5 * delta)
            gv[i] = (delta if r > 0.0 else -delta) * inv_n
    return loss * inv_n, grad


def laplacian_neumann(double[:, ::1] y, double inv_h2):
    """Finite-volume 5-point Laplacian on a cell-centered grid, zero-flux walls.

    Missing neighbors contribute nothing, which makes the operator symmetric
    with zero row and column sums (exact discrete mass conservation).
    """
    cdef Py_ssize_t rows = y.shape[0], cols = y.shape[1], r, c
    cdef cnp.ndarray[double, ndim=2] out = np.empty((rows, cols))
    cdef double[:, ::1] ov = out
    cdef double acc, yc
    for r in range(rows):
        for c in range(cols):
            yc = y[r, c]
            acc = 0.0
            if c > 0:
                acc += y[r, c - 1] - yc
            if c < cols - 1:
                acc += y[r, c + 1] - yc
            if r > 0:
                acc += y[r - 1, c] - yc
            if r < rows - 1:
                acc += y[r + 1, c] - yc
            ov[r, c] = acc * inv_h2
    return out


def advect_upwind(double[:, ::1] y, double[:, ::1] v1f, double[:, ::1] v2f,
                  double dt_over_h):
    """One explicit upwind advection substep in flux form.

    v1f (R,C+1) and v2f (R+1,C) are face-normal velocities; boundary faces
    carry zero flux so total mass is conserved exactly (flux telescoping).
    """
    cdef Py_ssize_t rows = y.shape[0], cols = y.shape[1], r, c
    cdef cnp.ndarray[double, ndim=2] f1 = np.zeros((rows, cols + 1))
    cdef cnp.ndarray[double, ndim=2] f2 = np.zeros((rows + 1, cols))
    cdef cnp.ndarray[double, ndim=2] out = np.empty((rows, cols))
    cdef double[:, ::1] f1v = f1, f2v = f2, ov = out
    cdef double vel
    for r in range(rows):
        for c in range(1, cols):
            vel = v1f[r, c]
            f1v[r, c] = vel * (y[r, c - 1] if vel > 0.0 else y[r, c])
    for r in range(1, rows):
        for c in range(cols):
            vel = v2f[r, c]
            f2v[r, c] = vel * (y[r - 1, c] if vel > 0.0 else y[r, c])
    for r in range(rows):
        for c in range(cols):
            ov[r, c] = y[r, c] - dt_over_h * (
                f1v[r, c + 1] - f1v[r, c] + f2v[r + 1, c] - f2v[r, c])
    return out
