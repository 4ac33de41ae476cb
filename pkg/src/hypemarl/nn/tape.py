"""Minimal reverse-mode autodiff over per-layer array primitives.

A Tape records operations as they execute; ``backward`` replays the
records in reverse order, accumulating vector-Jacobian products into
the gradient buffers of every Var touched along the way. The op set is
exactly what shallow feed-forward stacks need: matmul, bias add,
pointwise activations, per-sample (grouped) linear maps, slice/concat
glue, and the two training losses. Ops accept plain ndarrays wherever
a Var is allowed; plain arrays are treated as constants and receive no
gradient.
"""

import numpy as np

from .. import _kernels as kern
from ..errors import UsageError


def _asf64(x):
    return np.asarray(x, dtype=np.float64)


class Var:
    """Array node with a same-shaped gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = _asf64(value)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


def _val(x):
    return x.value if isinstance(x, Var) else _asf64(x)


class Tape:
    """Wengert list; creation order is topological order for these nets."""

    def __init__(self):
        self._vjps = []
        self._consumed = False

    def _record(self, vjp):
        if self._consumed:
            raise UsageError("tape already consumed by backward(); build a new one")
        self._vjps.append(vjp)

    def leaf(self, value):
        """Register a differentiable input (weights, or states needing grads)."""
        if self._consumed:
            raise UsageError("tape already consumed by backward(); build a new one")
        return Var(value)

    # ------------------------------------------------------------ linear algebra

    def matmul(self, a, b):
        """(B,n) @ (n,m) -> (B,m)."""
        av, bv = _val(a), _val(b)
        out = Var(av @ bv)

        def vjp():
            g = out.grad
            if isinstance(a, Var):
                a.grad += g @ bv.T
            if isinstance(b, Var):
                b.grad += av.T @ g

        self._record(vjp)
        return out

    def add_bias(self, x, b):
        """(B,m) + (m,) broadcast."""
        xv, bv = _val(x), _val(b)
        out = Var(xv + bv)

        def vjp():
            g = out.grad
            if isinstance(x, Var):
                x.grad += g
            if isinstance(b, Var):
                b.grad += g.sum(axis=0)

        self._record(vjp)
        return out

    def grouped_matvec(self, w, x):
        """Per-sample linear map: w (B,i,o) applied to x (B,i) -> (B,o)."""
        wv, xv = _val(w), _val(x)
        out = Var(kern.grouped_linear(wv, xv))

        def vjp():
            gw, gx = kern.grouped_linear_backward(wv, xv, out.grad)
            if isinstance(w, Var):
                w.grad += gw
            if isinstance(x, Var):
                x.grad += gx

        self._record(vjp)
        return out

    # ------------------------------------------------------------ pointwise

    def add(self, x, y):
        out = Var(_val(x) + _val(y))

        def vjp():
            if isinstance(x, Var):
                x.grad += out.grad
            if isinstance(y, Var):
                y.grad += out.grad

        self._record(vjp)
        return out

    def sub(self, x, y):
        out = Var(_val(x) - _val(y))

        def vjp():
            if isinstance(x, Var):
                x.grad += out.grad
            if isinstance(y, Var):
                y.grad -= out.grad

        self._record(vjp)
        return out

    def scale(self, x, c):
        c = float(c)
        out = Var(_val(x) * c)

        def vjp():
            if isinstance(x, Var):
                x.grad += c * out.grad

        self._record(vjp)
        return out

    def square(self, x):
        xv = _val(x)
        out = Var(xv * xv)

        def vjp():
            if isinstance(x, Var):
                x.grad += 2.0 * xv * out.grad

        self._record(vjp)
        return out

    def tanh(self, x):
        t = np.tanh(_val(x))
        out = Var(t)

        def vjp():
            if isinstance(x, Var):
                x.grad += (1.0 - t * t) * out.grad

        self._record(vjp)
        return out

    def relu(self, x):
        xv = _val(x)
        mask = xv > 0.0
        out = Var(np.where(mask, xv, 0.0))

        def vjp():
            if isinstance(x, Var):
                x.grad += mask * out.grad

        self._record(vjp)
        return out

    # ------------------------------------------------------------ shape glue

    def slice_flat(self, theta, start, stop, shape):
        """View theta[start:stop] of a flat vector as ``shape``."""
        tv = _val(theta)
        out = Var(tv[start:stop].reshape(shape).copy())

        def vjp():
            if isinstance(theta, Var):
                theta.grad[start:stop] += out.grad.ravel()

        self._record(vjp)
        return out

    def slice_cols(self, x, start, stop, shape):
        """View x[:, start:stop] of a (B,P) matrix as ``shape`` (leading B)."""
        xv = _val(x)
        out = Var(xv[:, start:stop].reshape(shape).copy())

        def vjp():
            if isinstance(x, Var):
                b = xv.shape[0]
                x.grad[:, start:stop] += out.grad.reshape(b, stop - start)

        self._record(vjp)
        return out

    def concat_cols(self, parts):
        """Concatenate (B,k_j) blocks along axis 1."""
        vals = [_val(p) for p in parts]
        out = Var(np.concatenate(vals, axis=1))

        def vjp():
            off = 0
            for p, v in zip(parts, vals):
                k = v.shape[1]
                if isinstance(p, Var):
                    p.grad += out.grad[:, off:off + k]
                off += k

        self._record(vjp)
        return out

    # ------------------------------------------------------------ losses

    def mean_all(self, x):
        xv = _val(x)
        out = Var(xv.mean())

        def vjp():
            if isinstance(x, Var):
                x.grad += out.grad / xv.size

        self._record(vjp)
        return out

    def huber_mean(self, resid, delta):
        """Mean Huber loss of a residual block; returns a 0-d Var."""
        rv = _val(resid)
        loss, grad = kern.huber_mean_grad(np.ascontiguousarray(rv.ravel()), delta)
        out = Var(loss)

        def vjp():
            if isinstance(resid, Var):
                resid.grad += (out.grad * grad).reshape(rv.shape)

        self._record(vjp)
        return out

    # ------------------------------------------------------------ backward

    def backward(self, out, seed=None):
        """Accumulate d(seed . out)/d(leaf) into every leaf's .grad."""
        if self._consumed:
            raise UsageError("tape already consumed by backward(); build a new one")
        self._consumed = True
        if seed is None:
            out.grad += np.ones_like(out.value)
        else:
            out.grad += _asf64(seed)
        for vjp in reversed(self._vjps):
            vjp()
