"""epsilon-SVR trained by SMO with second-order working-set selection.

The dual is written over 2n variables ``beta = [alpha, alpha*]`` with signs
``s = [+1]*n + [-1]*n``::

    min 1/2 beta' Q beta + p' beta,  s' beta = 0,  0 <= beta <= C
    Q[t, u] = s_t s_u K[t mod n, u mod n],  p = [eps - y, eps + y]

Each iteration picks the maximal-gain violating pair (Fan, Chen & Lin 2005)
and solves the two-variable subproblem analytically. The loop is compiled
with numba; one iteration is O(n).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12


@dataclass
class SmoResult:
    coef: np.ndarray  # alpha - alpha*, one per training point
    intercept: float
    n_iter: int
    converged: bool
    gap: float


@numba.njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = y.shape[0]
    m = 2 * n
    s = np.empty(m)
    G = np.empty(m)
    for t in range(n):
        s[t] = 1.0
        s[t + n] = -1.0
        G[t] = eps - y[t]
        G[t + n] = eps + y[t]
    beta = np.zeros(m)
    gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        gmin = np.inf
        for t in range(m):
            mg = -s[t] * G[t]
            if s[t] > 0:
                in_up = beta[t] < C
                in_low = beta[t] > 0
            else:
                in_up = beta[t] > 0
                in_low = beta[t] < C
            if in_up and mg >= gmax:
                if mg > gmax or i < 0:
                    gmax = mg
                    i = t
            if in_low and mg < gmin:
                gmin = mg
        gap = gmax - gmin
        if i < 0 or gap < tol:
            converged = True
            break
        ii = i % n
        # j: best second-order gain in I_low
        j = -1
        best = np.inf
        for t in range(m):
            if s[t] > 0:
                in_low = beta[t] > 0
            else:
                in_low = beta[t] < C
            if not in_low:
                continue
            b = gmax + s[t] * G[t]
            if b <= 0:
                continue
            tt = t % n
            quad = K[ii, ii] + K[tt, tt] - 2.0 * K[ii, tt]
            if quad <= 0:
                quad = 1e-12
            obj = -(b * b) / quad
            if obj < best:
                best = obj
                j = t
        if j < 0:
            converged = True
            break
        jj = j % n
        si = s[i]
        sj = s[j]
        old_i = beta[i]
        old_j = beta[j]
        q = K[ii, ii] + K[jj, jj] - 2.0 * K[ii, jj]
        if q <= 0:
            q = 1e-12
        ai = old_i
        aj = old_j
        if si != sj:
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            elif ai < 0:
                ai = 0.0
                aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            elif aj > C:
                aj = C
                ai = C + diff
        else:
            delta = (G[i] - G[j]) / q
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            elif aj < 0:
                aj = 0.0
                ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            elif ai < 0:
                ai = 0.0
                aj = total
        beta[i] = ai
        beta[j] = aj
        di = (ai - old_i) * si
        dj = (aj - old_j) * sj
        for t in range(m):
            tt = t % n
            G[t] += s[t] * (di * K[ii, tt] + dj * K[jj, tt])
        it += 1

    # intercept: mean over free variables, else midpoint of the feasible interval
    nfree = 0
    sfree = 0.0
    ub = np.inf
    lb = -np.inf
    for t in range(m):
        sg = s[t] * G[t]
        if beta[t] >= C:
            if s[t] < 0:
                ub = min(ub, sg)
            else:
                lb = max(lb, sg)
        elif beta[t] <= 0:
            if s[t] > 0:
                ub = min(ub, sg)
            else:
                lb = max(lb, sg)
        else:
            nfree += 1
            sfree += sg
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = (ub + lb) / 2.0
    coef = beta[:n] - beta[n:]
    return coef, -rho, it, converged, gap


def solve_svr_dual(K: np.ndarray, y: np.ndarray, C: float, epsilon: float,
                   tol: float = 1e-3, max_iter: int = 100_000) -> SmoResult:
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    coef, intercept, it, converged, gap = _smo(K, y, float(C), float(epsilon), float(tol), int(max_iter))
    if not converged:
        log.debug("SMO stopped after %d iterations with KKT gap %.3g", it, gap)
    return SmoResult(coef, float(intercept), int(it), bool(converged), float(gap))
