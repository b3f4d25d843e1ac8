"""Optional numba kernels for the training hot path.

The numpy fallbacks compute bit-identical results; numba only removes
temporary-array traffic from the per-batch row gather.
"""

from __future__ import annotations

import numpy as np

try:
    import numba

    @numba.njit(cache=True)
    def _gather_rows(X, idx, out):  # pragma: no cover - exercised via gather_rows
        for i in range(idx.shape[0]):
            r = idx[i]
            for j in range(X.shape[1]):
                out[i, j] = X[r, j]

    def gather_rows(X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
        _gather_rows(X, idx, out)

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

    def gather_rows(X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
        np.copyto(out, X[idx])


def gather_rows_fallback(X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    """Pure-numpy reference used to test the accelerated path."""
    np.copyto(out, X[idx])
