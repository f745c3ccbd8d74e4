"""Greedy sparse recovery: OMP and CoSaMP for complex measurements."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import StagnationError
from ..measurement import MeasurementSystem
from .base import EstimateReport, Method, SolverParams, timed


def _top(values: np.ndarray, count: int) -> np.ndarray:
    # stable sort keeps the lowest index first among equal magnitudes
    return np.argsort(-values, kind="stable")[:count]


def omp(system: MeasurementSystem, params: SolverParams) -> EstimateReport:
    """Orthogonal matching pursuit.

    Stops once ``k`` indices are selected or the residual norm drops to
    ``tol * ||y||``. The residual history is kept in ``info["residual"]``.
    """
    X, y = system.X, system.y
    n = X.shape[1]
    k = min(params.k, X.shape[0], n)
    y_norm = np.linalg.norm(y)
    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    r = y.copy()
    history = [float(y_norm)]
    with timed() as t:
        while len(support) < k and history[-1] > params.tol * y_norm:
            proxy = np.abs(X.conj().T @ r)
            j = int(np.argmax(proxy))
            if j in support:
                raise StagnationError(f"OMP reselected index {j} with residual {history[-1]:.3g}")
            support.append(j)
            coef = np.linalg.lstsq(X[:, support], y, rcond=None)[0]
            r = y - X[:, support] @ coef
            history.append(float(np.linalg.norm(r)))
    est = np.zeros(n, dtype=complex)
    est[support] = coef
    return EstimateReport(est, Method.OMP, iterations=len(support), wall_time=t[0],
                          info={"residual": history, "order": list(support)})


def cosamp(system: MeasurementSystem, params: SolverParams) -> EstimateReport:
    """Compressive sampling matching pursuit with a ``k``-term output.

    Returns the best iterate seen. Three consecutive non-decreasing residuals
    end the run with a ``"stagnation"`` flag.
    """
    X, y = system.X, system.y
    m, n = X.shape
    k = min(params.k, n)
    if 3 * k > m:
        warnings.warn(f"CoSaMP with 3k={3 * k} > NE={m}; merged LS is underdetermined", RuntimeWarning)
    y_norm = np.linalg.norm(y)
    x = np.zeros(n, dtype=complex)
    best, best_res = x.copy(), y_norm
    prev_res, stall, flags = y_norm, 0, []
    prev_support = None
    r = y.copy()
    it = 0
    with timed() as t:
        for it in range(1, params.max_iter + 1):
            proxy = np.abs(X.conj().T @ r)
            merged = np.union1d(_top(proxy, 2 * k), np.flatnonzero(x))
            b = np.linalg.lstsq(X[:, merged], y, rcond=None)[0]
            keep = _top(np.abs(b), k)
            x = np.zeros(n, dtype=complex)
            x[merged[keep]] = b[keep]
            r = y - X @ x
            res = float(np.linalg.norm(r))
            if res < best_res:
                best, best_res = x.copy(), res
            if res <= params.tol * y_norm:
                break
            support = frozenset(np.flatnonzero(x).tolist())
            if support == prev_support:
                break
            prev_support = support
            stall = stall + 1 if res >= prev_res else 0
            if stall >= 3:
                flags.append("stagnation")
                break
            prev_res = res
        else:
            flags.append("max-iter")
    return EstimateReport(best, Method.COSAMP, iterations=it, wall_time=t[0],
                          flags=tuple(flags), info={"residual": best_res})
