"""Central-difference verification of reverse-mode gradients.

``grad_check`` probes random coordinates of a parameter vector and
compares the analytic gradient against (f(x+h)-f(x-h))/2h. With f64
and h=1e-5 a correct implementation lands well below 1e-5 relative
error; anything near 1e-3 is a real bug, not noise.
"""

import numpy as np


def grad_check(f, theta, probes=50, h=1e-5, rng=None):
    """Max relative error between analytic and numeric gradient.

    ``f(theta) -> (value, grad)`` must be deterministic. Relative error
    uses max(|fd|, |analytic|, 1e-8) as the denominator so exact zeros
    compare as zero.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    theta = np.asarray(theta, dtype=np.float64)
    _, grad = f(theta)
    grad = np.asarray(grad)
    n = theta.size
    idx = rng.choice(n, size=min(probes, n), replace=False)
    worst = 0.0
    for i in idx:
        tp = theta.copy()
        tp[i] += h
        tm = theta.copy()
        tm[i] -= h
        # Divide by the realized spread, not 2h: theta[i] +- h rounds, and
        # the spread of the two rounded floats is exact.
        fd = (f(tp)[0] - f(tm)[0]) / (tp[i] - tm[i])
        denom = max(abs(fd), abs(grad[i]), 1e-8)
        worst = max(worst, abs(fd - grad[i]) / denom)
    return worst
