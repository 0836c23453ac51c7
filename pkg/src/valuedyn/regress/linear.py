"""Penalised linear least squares on standardised features."""

from __future__ import annotations

import numpy as np


def soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def elasticnet_objective(X, y, w, alpha, l1_ratio) -> float:
    r = y - X @ w
    n = len(y)
    return float(r @ r / (2 * n) + alpha * l1_ratio * np.abs(w).sum()
                 + 0.5 * alpha * (1 - l1_ratio) * (w @ w))


def elasticnet_cd(X, y, alpha: float, l1_ratio: float, tol: float = 1e-4,
                  max_iter: int = 10_000, history: list | None = None):
    """Cyclic coordinate descent for centred ``X`` and ``y``.

    Minimises ``|y - Xw|^2 / 2n + alpha * (l1_ratio |w|_1 + (1 - l1_ratio)/2 |w|^2)``.
    Stops when the largest coordinate change in a sweep drops below ``tol``
    (relative to the largest coefficient once that exceeds one). Returns
    ``(w, n_sweeps)``; per-sweep objectives are appended to ``history``.
    """
    n, p = X.shape
    w = np.zeros(p)
    r = np.array(y, dtype=float)
    col_sq = (X * X).sum(axis=0) / n
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            xj = X[:, j]
            old = w[j]
            rho = xj @ r / n + col_sq[j] * old
            new = soft_threshold(rho, l1) / (col_sq[j] + l2)
            if new != old:
                r -= xj * (new - old)
                w[j] = new
                max_change = max(max_change, abs(new - old))
        if history is not None:
            history.append(elasticnet_objective(X, y, w, alpha, l1_ratio))
        if max_change <= tol * max(1.0, np.abs(w).max(initial=0.0)):
            break
    return w, sweeps


def ridge_solve(X, y, alpha: float) -> np.ndarray:
    """Minimise ``|y - Xw|^2 + alpha |w|^2`` for centred data."""
    p = X.shape[1]
    A = X.T @ X + alpha * np.eye(p)
    return np.linalg.lstsq(A, X.T @ y, rcond=None)[0]
