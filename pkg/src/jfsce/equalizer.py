"""Sparse FIR linear MMSE equalizer designed from a channel estimate.

Equalizer output is ``xe(n) = sum_k y(n - k) w[k]`` for ``k < N`` and it
targets ``x(n - delay)``. With unit-energy symbols and noise variance
``sigma2``, stacking ``N`` received samples gives ``Y = H X + Z`` where
``H`` is the ``N x (N + Lh - 1)`` convolution matrix, so for taps
``w = conj(v)``

    MSE(v) = v^H R v - 2 Re(v^H h_delay) + 1,   R = H H^H + sigma2 I

Sparse designs pick taps greedily: each step adds the tap with the largest
MSE reduction and re-solves on the active set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, toeplitz

from .errors import ParameterError, WindowError


@dataclass(frozen=True)
class EqualizerDesign:
    w: np.ndarray
    active: np.ndarray
    delay: int
    mse: float
    N: int
    flags: tuple = ()

    @property
    def budget(self) -> int:
        return self.active.size


def convolution_matrix(h, N: int) -> np.ndarray:
    """``N x (N + len(h) - 1)`` matrix with ``H[i, i + l] = h[l]``."""
    h = np.asarray(h, dtype=complex)
    first_row = np.concatenate([h, np.zeros(N - 1, dtype=complex)])
    first_col = np.zeros(N, dtype=complex)
    first_col[0] = h[0]
    return toeplitz(first_col, first_row)


def _autocorrelation_matrix(h, N: int, noise_var: float) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    full = np.correlate(h, h, mode="full")  # full[Lh-1+j] = sum_l h[l+j] conj(h[l])
    mid = h.size - 1
    lags = np.arange(N)
    r = np.where(lags <= mid, full[np.minimum(mid + lags, full.size - 1)], 0.0)
    # R[i, j] = sum_l h[l] conj(h[l + i - j]) -> first column conj(r), first row r
    R = toeplitz(np.conj(r), r)
    R[np.diag_indices(N)] += noise_var
    return R


def _factor(R):
    """Cholesky factor with diagonal jitter on failure. Returns ``(factor, jittered)``."""
    jitter = 0.0
    scale = max(float(np.real(np.trace(R))) / R.shape[0], 1e-300)
    while True:
        try:
            A = R if jitter == 0.0 else R + jitter * np.eye(R.shape[0])
            return cho_factor(A, lower=True, check_finite=False), jitter > 0
        except LinAlgError:
            jitter = 1e-12 * scale if jitter == 0.0 else jitter * 10.0


def dense_delay_mse(h, N: int, noise_var: float):
    """Full-length MMSE design for every delay. Returns ``(mse, V, R, H)``."""
    H = convolution_matrix(h, N)
    R = _autocorrelation_matrix(h, N, noise_var)
    fac, _ = _factor(R)
    V = cho_solve(fac, H, check_finite=False)
    mse = 1.0 - np.real(np.sum(np.conj(H) * V, axis=0))
    return np.maximum(mse, 0.0), V, R, H


def greedy_path(R: np.ndarray, p: np.ndarray, budget: int):
    """Forward tap selection on ``min v^H R v - 2 Re(v^H p) + 1``.

    Returns ``(order, mse)`` where ``mse[b]`` is the design MSE with the first
    ``b`` taps of ``order`` (``mse[0] = 1``). Schur-complement updates keep
    each step at ``O(N * active)``.
    """
    N = R.shape[0]
    budget = min(budget, N)
    diag = np.real(np.diag(R)).copy()
    c = p.copy()  # p_j - R_jS R_SS^-1 p_S
    d = diag.copy()  # R_jj - R_jS R_SS^-1 R_Sj
    B = np.zeros((N, 0), dtype=complex)  # R[:, S] R_SS^-1
    order: list[int] = []
    mse = [1.0]
    chosen = np.zeros(N, dtype=bool)
    floor = 1e-14 * max(diag.max(), 1e-300)
    for _ in range(budget):
        gain = np.where(chosen | (d <= floor), -np.inf, np.abs(c) ** 2 / np.maximum(d, floor))
        q = int(np.argmax(gain))
        if not np.isfinite(gain[q]):
            break
        r = R[order, q] if order else np.zeros(0, dtype=complex)
        u = (R[:, q] - B @ r) / d[q]
        B = np.column_stack([B - np.outer(u, B[q, :]), u]) if order else u[:, None]
        mse.append(max(mse[-1] - gain[q], 0.0))
        c = c - u * c[q]
        d = d - d[q] * np.abs(u) ** 2
        order.append(q)
        chosen[q] = True
    return np.array(order, dtype=int), np.array(mse)


def _trim(h):
    """Drop leading and trailing zero taps. Returns ``(taps, leading_zeros)``.

    Leading zeros only shift the optimal delay, so designing on the trimmed
    channel and adding the offset back is exact and much cheaper for
    combined channels padded with ``~M`` zeros.
    """
    nz = np.flatnonzero(h)
    if nz.size == 0:
        raise ParameterError("channel estimate is all zero")
    return h[nz[0]:nz[-1] + 1], int(nz[0])


def _restricted_weights(R, p, active):
    sub = R[np.ix_(active, active)]
    fac, jittered = _factor(sub)
    v = cho_solve(fac, p[active], check_finite=False)
    return v, jittered


def design_mmse_equalizer(h, N: int, noise_var: float, budget: int | None = None,
                          delay_candidates: int = 8, delays=None) -> EqualizerDesign:
    """MMSE equalizer with at most ``budget`` active taps and optimized delay.

    Every delay in ``[0, N + len(h) - 2]`` is scored by its dense MMSE; the
    ``delay_candidates`` best are then run through greedy tap selection and
    the lowest resulting design MSE wins. ``delays`` restricts the search.
    """
    h = np.asarray(h, dtype=complex)
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    budget = N if budget is None else budget
    if not 1 <= budget <= N:
        raise ParameterError(f"budget must be in [1, N={N}], got {budget}")
    h, lead = _trim(h)
    mse_all, V, R, H = dense_delay_mse(h, N, noise_var)
    if delays is None:
        cand = np.arange(H.shape[1])
    else:
        cand = np.asarray(delays, dtype=int) - lead
        cand = cand[(cand >= 0) & (cand < H.shape[1])]
        if cand.size == 0:
            raise ParameterError("no requested delay overlaps the channel support")
    if budget == N:
        best = int(cand[np.argmin(mse_all[cand])])
        v = V[:, best]
        return EqualizerDesign(np.conj(v), np.arange(N), best + lead, float(mse_all[best]), N)
    shortlist = cand[np.argsort(mse_all[cand], kind="stable")[:delay_candidates]]
    best = None
    for delay in sorted(shortlist.tolist()):
        order, path = greedy_path(R, H[:, delay], budget)
        if best is None or path[-1] < best[0]:
            best = (path[-1], delay, order)
    _, delay, order = best
    active = np.sort(order)
    v_act, jittered = _restricted_weights(R, H[:, delay], active)
    w = np.zeros(N, dtype=complex)
    w[active] = np.conj(v_act)
    p = H[active, delay]
    mse = 1.0 - float(np.real(np.vdot(p, v_act)))
    return EqualizerDesign(w, active, delay + lead, max(mse, 0.0), N, ("jitter",) if jittered else ())


def budget_sweep(h, N: int, noise_var: float, budgets, delay_candidates: int = 8) -> dict:
    """Design MSE for each budget, reusing one greedy path per candidate delay."""
    h, _ = _trim(np.asarray(h, dtype=complex))
    mse_all, _, R, H = dense_delay_mse(h, N, noise_var)
    top = max(budgets)
    shortlist = np.argsort(mse_all, kind="stable")[:delay_candidates]
    paths = {int(dl): greedy_path(R, H[:, dl], top) for dl in shortlist}
    out = {}
    for b in budgets:
        if b >= N:
            out[b] = float(mse_all.min())
            continue
        out[b] = min(float(path[min(b, path.size - 1)]) for _, path in paths.values())
    return out


def equalize(design: EqualizerDesign, y) -> np.ndarray:
    """``xe(n) = sum_k y(n-k) w[k]`` for ``n = N-1 .. len(y)-1``."""
    y = np.asarray(y, dtype=complex)
    if y.size < design.N:
        raise WindowError(f"need at least N={design.N} samples, got {y.size}")
    return np.convolve(y, design.w, mode="valid")


def evaluate_symbol_mse(design: EqualizerDesign, y, x, start: int | None = None, stop: int | None = None) -> float:
    """Empirical ``mean |xe(n) - x(n - delay)|^2`` on a shared timeline.

    ``y[n]`` and ``x[n]`` share the index ``n``. The average runs over every
    ``n`` in ``[start, stop)`` (default: all evaluable ``n``) for which
    ``y(n-N+1 .. n)`` and ``x(n - delay)`` exist.
    """
    y = np.asarray(y, dtype=complex)
    x = np.asarray(x, dtype=complex)
    lo = max(design.N - 1, design.delay)
    hi = min(y.size, x.size + design.delay)
    start = lo if start is None else start
    stop = hi if stop is None else stop
    if start < lo or stop > hi or stop <= start:
        raise WindowError(
            f"evaluation window [{start}, {stop}) needs n >= {lo} and n < {hi} "
            f"(N={design.N}, delay={design.delay})"
        )
    seg = y[start - design.N + 1:stop]
    xe = np.convolve(seg, design.w, mode="valid")
    ref = x[start - design.delay:stop - design.delay]
    return float(np.mean(np.abs(xe - ref) ** 2))


def slice_qpsk(xe) -> np.ndarray:
    """Nearest unit-energy QPSK point."""
    xe = np.asarray(xe, dtype=complex)
    re = np.where(xe.real >= 0, 1.0, -1.0)
    im = np.where(xe.imag >= 0, 1.0, -1.0)
    return (re + 1j * im) / np.sqrt(2)


def symbol_error_rate(design: EqualizerDesign, y, x, start=None, stop=None) -> float:
    y = np.asarray(y, dtype=complex)
    x = np.asarray(x, dtype=complex)
    lo = max(design.N - 1, design.delay)
    start = lo if start is None else start
    stop = min(y.size, x.size + design.delay) if stop is None else stop
    xe = np.convolve(y[start - design.N + 1:stop], design.w, mode="valid")
    ref = x[start - design.delay:stop - design.delay]
    return float(np.mean(slice_qpsk(xe) != ref))

