"""Iteratively reweighted l1 minimization.

Each outer pass solves

    min_h ||y - X h||^2 + lam * sum_i w_i |h_i|

with FISTA and a backtracking step, then sets ``w_i = eps / (|h_i| + eps)``.
The first pass is a plain LASSO (``w = 1``).
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..measurement import MeasurementSystem
from .base import EstimateReport, Method, SolverParams, timed


def lambda_rule(noise_var: float, n_unknowns: int, k: int) -> float:
    """``4 sigma sqrt(M + L - k)``."""
    return 4.0 * np.sqrt(noise_var) * np.sqrt(max(n_unknowns - k, 0))


def soft_threshold(z: np.ndarray, thresh) -> np.ndarray:
    mag = np.abs(z)
    scale = np.maximum(1.0 - thresh / np.maximum(mag, np.finfo(float).tiny), 0.0)
    return z * scale


def _lipschitz_guess(X: np.ndarray, iters: int = 15, seed: int = 0) -> float:
    v = np.random.default_rng(seed).standard_normal(X.shape[1]).astype(complex)
    for _ in range(iters):
        v = X.conj().T @ (X @ v)
        v /= np.linalg.norm(v)
    return 2.0 * float(np.linalg.norm(X @ v) ** 2)


def weighted_lasso(X, y, penalty, h0=None, lip=None, max_iter=2000, tol=1e-6):
    """FISTA with backtracking for ``||y - Xh||^2 + sum_i penalty_i |h_i|``.

    Returns ``(h, iterations, converged, lip)``; ``lip`` is the final step
    constant so callers can warm start.
    """
    n = X.shape[1]
    h = np.zeros(n, dtype=complex) if h0 is None else np.array(h0, dtype=complex)
    lip = _lipschitz_guess(X) if lip is None else lip
    Xh = X.conj().T

    def smooth(v):
        res = X @ v - y
        return float(np.vdot(res, res).real), res

    z, tk = h.copy(), 1.0
    for it in range(1, max_iter + 1):
        fz, res_z = smooth(z)
        grad = 2.0 * (Xh @ res_z)
        while True:
            h_new = soft_threshold(z - grad / lip, penalty / lip)
            d = h_new - z
            f_new, _ = smooth(h_new)
            if f_new <= fz + float(np.vdot(grad, d).real) + 0.5 * lip * float(np.vdot(d, d).real):
                break
            lip *= 2.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        z = h_new + ((tk - 1.0) / t_next) * (h_new - h)
        change = np.linalg.norm(h_new - h)
        h, tk = h_new, t_next
        if change <= tol * max(np.linalg.norm(h), np.finfo(float).tiny):
            return h, it, True, lip
    return h, max_iter, False, lip


def reweighted_l1(system: MeasurementSystem, params: SolverParams) -> EstimateReport:
    X, y = system.X, system.y
    n = X.shape[1]
    lam = params.lam
    if lam is None:
        lam = lambda_rule(params.noise_var, n, params.k)
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    weights = np.ones(n)
    h, lip, eps = None, None, None
    total, flags = 0, []
    with timed() as t:
        for outer in range(params.reweights):
            h_new, its, ok, lip = weighted_lasso(
                X, y, lam * weights, h0=h, lip=lip,
                max_iter=params.inner_max_iter, tol=params.tol,
            )
            total += its
            if not ok and "inner-max-iter" not in flags:
                flags.append("inner-max-iter")
            if eps is None:
                eps = params.eps_rel * max(float(np.abs(h_new).max()), np.finfo(float).tiny)
            done = h is not None and np.linalg.norm(h_new - h) <= params.tol * max(
                np.linalg.norm(h), np.finfo(float).tiny)
            h = h_new
            if done:
                break
            weights = eps / (np.abs(h) + eps)
    return EstimateReport(h, Method.RL1, iterations=total, wall_time=t[0], flags=tuple(flags),
                          info={"lambda": lam, "eps": eps, "outer": outer + 1})
