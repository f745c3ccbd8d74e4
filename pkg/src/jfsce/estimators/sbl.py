"""Sparse Bayesian learning with EM hyper-parameter updates.

Prior ``h ~ CN(0, diag(gamma))``. With ``G = diag(sqrt(gamma))`` and
``A = X G / sigma`` the posterior is

    Sigma = G (I + A^H A)^-1 G,    mu = Sigma X^H y / sigma^2

which stays well conditioned as entries of ``gamma`` collapse to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, solve_triangular

from ..measurement import MeasurementSystem
from .base import EstimateReport, Method, SolverParams, timed


@dataclass
class SblState:
    gamma: np.ndarray
    mu: np.ndarray
    sigma_diag: np.ndarray
    log_evidence: float
    noise_var: float


def _noise_floor(y: np.ndarray, noise_var: float) -> float:
    return max(noise_var, 1e-12 * float(np.vdot(y, y).real) / y.size, 1e-300)


def posterior(X, y, gamma, noise_var, gram=None, jitter=0.0):
    """E-step. Returns ``(SblState, jittered)``."""
    n = X.shape[1]
    if gram is None:
        gram = X.conj().T @ X
    g = np.sqrt(gamma)
    B = (g[:, None] * gram * g[None, :]) / noise_var
    B[np.diag_indices(n)] += 1.0 + jitter
    jittered = jitter > 0
    while True:
        try:
            C, _ = cho_factor(B, lower=True, check_finite=False)
            break
        except LinAlgError:
            step = max(jitter, 1e-10) * 10.0
            B[np.diag_indices(n)] += step
            jitter += step
            jittered = True
    C = np.tril(C)
    Cinv = solve_triangular(C, np.eye(n), lower=True, check_finite=False)
    b_inv_diag = np.sum(np.abs(Cinv) ** 2, axis=0)
    Ahy = g * (X.conj().T @ y) / np.sqrt(noise_var)
    v = Cinv @ Ahy
    mu = g * (Cinv.conj().T @ v) / np.sqrt(noise_var)
    sigma_diag = gamma * b_inv_diag
    m = X.shape[0]
    logdet_c = m * np.log(noise_var) + 2.0 * float(np.sum(np.log(np.diag(C).real)))
    quad = (float(np.vdot(y, y).real) - float(np.vdot(v, v).real)) / noise_var
    log_ev = -m * np.log(np.pi) - logdet_c - quad
    return SblState(gamma, mu, sigma_diag, log_ev, noise_var), jittered


def sbl(system: MeasurementSystem, params: SolverParams, track_evidence: bool = False) -> EstimateReport:
    """EM iterations until ``max |gamma change| < tol * max gamma``.

    Hyper-parameters below ``sbl_prune * max gamma`` are fixed at zero and
    dropped from the posterior solve; their coefficients are zero in the output.
    """
    X, y = system.X, system.y
    m, n = X.shape
    noise_var = _noise_floor(y, params.noise_var)
    gram = X.conj().T @ X
    gamma = np.ones(n)
    active = np.arange(n)
    flags, evidence = [], []
    it = 0
    with timed() as t:
        for it in range(1, params.max_iter + 1):
            Xa = X[:, active]
            state, jittered = posterior(Xa, y, gamma[active], noise_var, gram[np.ix_(active, active)])
            if jittered and "jitter" not in flags:
                flags.append("jitter")
            if track_evidence:
                evidence.append(state.log_evidence)
            new_gamma = np.abs(state.mu) ** 2 + state.sigma_diag
            if params.sbl_learn_noise:
                resid = y - Xa @ state.mu
                dof = np.sum(1.0 - state.sigma_diag / np.maximum(gamma[active], 1e-300))
                noise_var = _noise_floor(
                    y, (float(np.vdot(resid, resid).real) + noise_var * dof) / m)
            change = float(np.max(np.abs(new_gamma - gamma[active])))
            gamma[active] = new_gamma
            top = float(gamma.max())
            keep = gamma[active] >= params.sbl_prune * top
            gamma[active[~keep]] = 0.0
            active = active[keep]
            if change < params.tol * max(top, 1e-300):
                break
        else:
            flags.append("max-iter")
        state, _ = posterior(X[:, active], y, gamma[active], noise_var, gram[np.ix_(active, active)])
        if track_evidence:
            evidence.append(state.log_evidence)
        est = np.zeros(n, dtype=complex)
        est[active] = state.mu
    info = {"gamma": gamma, "noise_var": noise_var, "active": active.size}
    if track_evidence:
        info["log_evidence"] = evidence
    return EstimateReport(est, Method.SBL, iterations=it, wall_time=t[0], flags=tuple(flags), info=info)
