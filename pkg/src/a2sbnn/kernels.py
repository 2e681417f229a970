"""Kernel backend selection.

The compiled extension is used when importable; set ``A2SBNN_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels

pure = _pykernels

if os.environ.get("A2SBNN_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

backend = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "python"

ndtri = backend.ndtri
# numpy's vectorized power beats a scalar libm loop here, so the fallback is
# used even when the extension is available (see benchmarks/bench_kernels.py)
a2_inv_generator = pure.a2_inv_generator
cholesky_lower = backend.cholesky_lower
sq_exp_cov = backend.sq_exp_cov
