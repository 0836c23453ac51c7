from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from ..core import NumericalError
from .kernels import Kernel, kernel_matrix


def gp_fit(X, y, kernel: Kernel, alpha: float, normalize_y: bool):
    """Exact GP posterior-mean weights via a Cholesky factor of ``K + alpha I``.

    Returns ``(weights, chol, y_mean, y_scale)``; the mean prediction at
    ``x`` is ``y_mean + y_scale * k(x, X) @ weights``.
    """
    y = np.asarray(y, dtype=float)
    if normalize_y:
        y_mean = float(y.mean())
        y_scale = float(y.std())
        if y_scale == 0.0:
            y_scale = 1.0
    else:
        y_mean, y_scale = 0.0, 1.0
    target = (y - y_mean) / y_scale
    K = kernel_matrix(kernel, X, X)
    K[np.diag_indices_from(K)] += alpha
    try:
        L = cholesky(K, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"Cholesky of K + alpha*I failed (alpha={alpha:g}); try a larger alpha"
        ) from exc
    weights = cho_solve((L, True), target)
    return weights, L, y_mean, y_scale
