"""Backend selection for the hot kernels.

Prefers the compiled Cython core; falls back to the pure-NumPy
implementations if the extension is missing or if the environment
variable ``HYPEMARL_PURE_PYTHON`` is set to a non-empty value.
"""

import os

from . import numpy_backend

if os.environ.get("HYPEMARL_PURE_PYTHON"):
    impl = numpy_backend
else:
    try:
        from . import _core as impl  # type: ignore[no-redef]
    except ImportError:
        impl = numpy_backend

BACKEND = impl.NAME

adam_apply = impl.adam_apply
polyak_apply = impl.polyak_apply
grouped_linear = impl.grouped_linear
grouped_linear_backward = impl.grouped_linear_backward
huber_mean_grad = impl.huber_mean_grad
laplacian_neumann = impl.laplacian_neumann
advect_upwind = impl.advect_upwind
