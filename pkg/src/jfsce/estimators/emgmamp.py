"""EM-tuned Gaussian-mixture GAMP for complex sparse vectors.

Prior per coefficient::

    p(h) = (1 - eta) delta(h) + eta * sum_l w_l CN(h; mean_l, var_l)

with AWGN of variance ``phi``. GAMP computes approximate posterior means and
variances; EM then re-fits ``eta, w, mean, var, phi`` from those posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from ..measurement import MeasurementSystem
from .base import EstimateReport, Method, SolverParams, timed

_TINY = 1e-300


@dataclass(frozen=True)
class GmPrior:
    eta: float
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    noise_var: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"sparsity rate {self.eta} outside [0, 1]")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-9 or np.any(self.weights < 0):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(self.variances <= 0):
            raise ValueError("mixture variances must be positive")


def sparsity_from_measurements(m: int, n: int, c: float = 1.0) -> float:
    """Invert ``m = c k log(n/k)`` for ``k`` and return the rate ``k / n``."""
    f = lambda k: c * k * np.log(n / k) - m
    k_max = n / np.e
    if f(k_max) <= 0:
        return k_max / n
    if f(1.0) >= 0:
        return 1.0 / n
    return brentq(f, 1.0, k_max) / n


def initial_prior(X, y, n_components=3, eta=None, noise_var=None) -> GmPrior:
    m, n = X.shape
    y_energy = float(np.vdot(y, y).real)
    if noise_var is None or noise_var <= 0:
        noise_var = y_energy / (101.0 * m)
    if eta is None:
        eta = sparsity_from_measurements(m, n)
    signal_var = max(y_energy - m * noise_var, 1e-3 * y_energy) / (np.sum(np.abs(X) ** 2) * eta)
    scales = 4.0 ** (np.arange(n_components) - (n_components - 1) / 2.0)
    weights = np.full(n_components, 1.0 / n_components)
    scales /= np.dot(weights, scales)
    return GmPrior(eta, weights, np.zeros(n_components, dtype=complex), signal_var * scales, noise_var)


def _denoise(r, vr, prior: GmPrior):
    """Posterior of ``h`` given ``r = h + CN(0, vr)`` under the BG-mixture prior."""
    r = r[:, None]
    vr = vr[:, None]
    var = prior.variances[None, :]
    mean = prior.means[None, :]
    tot = var + vr
    log_on = (np.log(max(prior.eta, _TINY)) + np.log(prior.weights[None, :] + _TINY)
              - np.log(np.pi * tot) - np.abs(r - mean) ** 2 / tot)
    log_off = np.log(max(1.0 - prior.eta, _TINY)) - np.log(np.pi * vr) - np.abs(r) ** 2 / vr
    logs = np.concatenate([log_off, log_on], axis=1)
    probs = np.exp(logs - logsumexp(logs, axis=1, keepdims=True))
    p_on = probs[:, 1:]
    comp_mean = (r * var + mean * vr) / tot
    comp_var = var * vr / tot
    x_hat = np.sum(p_on * comp_mean, axis=1)
    second = np.sum(p_on * (comp_var + np.abs(comp_mean) ** 2), axis=1)
    v_x = np.maximum(second - np.abs(x_hat) ** 2, 1e-30)
    return x_hat, v_x, p_on, comp_mean, comp_var


@dataclass
class _GampState:
    x: np.ndarray
    vx: np.ndarray
    s: np.ndarray
    vs: np.ndarray
    p: np.ndarray = None
    vp: np.ndarray = None
    r: np.ndarray = None
    vr: np.ndarray = None


def _gamp(X, X2, y, prior: GmPrior, state: _GampState, damping, max_iter, tol):
    """Damped sum-product GAMP for the AWGN channel. Returns ``(state, iterations)``."""
    Xh = X.conj().T
    X2t = X2.T
    phi = prior.noise_var
    it = 0
    for it in range(1, max_iter + 1):
        vp = X2 @ state.vx
        p = X @ state.x - vp * state.s
        vs_new = 1.0 / (vp + phi)
        s_new = (y - p) * vs_new
        state.s = damping * s_new + (1.0 - damping) * state.s
        state.vs = damping * vs_new + (1.0 - damping) * state.vs
        vr = 1.0 / np.maximum(X2t @ state.vs, _TINY)
        r = state.x + vr * (Xh @ state.s)
        x_new, vx_new, *_ = _denoise(r, vr, prior)
        change = np.linalg.norm(x_new - state.x)
        state.x = damping * x_new + (1.0 - damping) * state.x
        state.vx = damping * vx_new + (1.0 - damping) * state.vx
        state.p, state.vp, state.r, state.vr = p, vp, r, vr
        if change <= tol * max(np.linalg.norm(state.x), _TINY):
            break
    return state, it


def _em_update(y, state: _GampState, prior: GmPrior) -> GmPrior:
    _, _, p_on, comp_mean, comp_var = _denoise(state.r, state.vr, prior)
    n = p_on.shape[0]
    active = p_on.sum(axis=1)
    mass = np.maximum(p_on.sum(axis=0), _TINY)
    eta = float(np.clip(active.sum() / n, 1.0 / (10 * n), 1.0))
    weights = mass / mass.sum()
    means = (p_on * comp_mean).sum(axis=0) / mass
    variances = (p_on * (np.abs(means[None, :] - comp_mean) ** 2 + comp_var)).sum(axis=0) / mass
    variances = np.maximum(variances, 1e-12 * max(float(variances.max()), _TINY))
    phi = prior.noise_var
    z_hat = state.p + state.vp * (y - state.p) / (state.vp + phi)
    v_z = state.vp * phi / (state.vp + phi)
    noise_var = float(np.mean(np.abs(y - z_hat) ** 2 + v_z))
    noise_var = max(noise_var, 1e-14 * float(np.vdot(y, y).real) / y.size)
    return GmPrior(eta, weights, means, variances, noise_var)


def _fresh_state(prior: GmPrior, n: int, m: int) -> _GampState:
    mean0 = prior.eta * np.dot(prior.weights, prior.means)
    var0 = prior.eta * np.dot(prior.weights, prior.variances + np.abs(prior.means) ** 2) - abs(mean0) ** 2
    return _GampState(
        x=np.full(n, mean0, dtype=complex),
        vx=np.full(n, max(float(var0), 1e-30)),
        s=np.zeros(m, dtype=complex),
        vs=np.zeros(m),
    )


def emgmamp(system: MeasurementSystem, params: SolverParams, prior: GmPrior | None = None) -> EstimateReport:
    X, y = system.X, system.y
    m, n = X.shape
    X2 = np.abs(X) ** 2
    if prior is None:
        prior = initial_prior(X, y, params.gm_components, params.gm_sparsity,
                              params.noise_var if params.noise_var > 0 else None)
    y_energy = float(np.vdot(y, y).real)
    damping = params.damping
    flags = []
    total = 0
    em_it = 0
    with timed() as t:
        state = _fresh_state(prior, n, m)
        x_prev = state.x.copy()
        for em_it in range(1, params.em_max_iter + 1):
            state, its = _gamp(X, X2, y, prior, state, damping, params.gamp_max_iter, params.tol)
            total += its
            resid = y - X @ state.x
            if (not np.all(np.isfinite(state.x))
                    or float(np.vdot(resid, resid).real) > 5.0 * y_energy):
                if damping <= 0.3:
                    flags.append("diverged")
                    break
                damping = 0.3
                if "damped-fallback" not in flags:
                    flags.append("damped-fallback")
                state = _fresh_state(prior, n, m)
                continue
            prior = _em_update(y, state, prior)
            change = np.linalg.norm(state.x - x_prev)
            x_prev = state.x.copy()
            if em_it > 1 and change <= params.tol * max(np.linalg.norm(state.x), _TINY):
                break
        else:
            flags.append("max-iter")
    est = state.x if np.all(np.isfinite(state.x)) else np.zeros(n, dtype=complex)
    return EstimateReport(est, Method.EMGMAMP, iterations=total, wall_time=t[0], flags=tuple(flags),
                          info={"prior": prior, "em_iterations": em_it, "damping": damping})
