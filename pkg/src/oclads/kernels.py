"""Backend selection for the numeric hot paths.

The compiled extension (``oclads._kernels``, built from Cython) is used
when importable; otherwise the pure NumPy module ``oclads._kernels_py``
takes over. Set the environment variable ``OCLADS_PURE_PYTHON=1`` to force
the fallback, e.g. for benchmarking one against the other.
"""

from __future__ import annotations

import os

if os.environ.get("OCLADS_PURE_PYTHON"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

t_l2_sorted = _impl.t_l2_sorted
perm_stats_sorted = _impl.perm_stats_sorted
kernel_mean_scores = _impl.kernel_mean_scores
pairwise_distances = _impl.pairwise_distances

COMPILED: bool = bool(_impl.COMPILED)


def backend_name() -> str:
    return "compiled" if COMPILED else "pure-python"
