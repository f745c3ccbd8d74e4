"""Baselines: correlate-then-LS, the minimum-norm joint solution, and the ideal passthrough."""

from __future__ import annotations

import numpy as np

from ..errors import IllConditionedError, InsufficientSamplesError
from ..measurement import ConventionalSystem, MeasurementSystem
from ..signal_model import CombinedChannel
from .base import EstimateReport, Method, timed


def correlate_boundary(received, training, M: int) -> int:
    """Offset in ``[0, M-1]`` maximizing ``|sum_n received[n+d] conj(training[n])|``.

    Offsets whose window would run past the end of ``received`` are not
    searched. Ties go to the smallest offset.
    """
    received = np.asarray(received, dtype=complex)
    training = np.asarray(training, dtype=complex)
    if received.size < training.size:
        raise InsufficientSamplesError(
            f"received block has {received.size} samples, training frame needs {training.size}"
        )
    n_lags = min(M, received.size - training.size + 1)
    corr = np.correlate(received[:training.size + n_lags - 1], training, mode="valid")
    return int(np.argmax(np.abs(corr)))


def conventional_estimate(system: ConventionalSystem, method=Method.CONVENTIONAL) -> EstimateReport:
    """Least squares on the ``L+1`` columns at the detected boundary, zero padded to ``M+L``."""
    cfg = system.cfg
    with timed() as t:
        coef, _, rank, sv = np.linalg.lstsq(system.X, system.y, rcond=None)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
        if rank < cfg.L + 1:
            raise IllConditionedError(
                f"conventional LS matrix has rank {rank} < L+1 = {cfg.L + 1} (cond={cond:.3g})",
                cond,
            )
        est = np.zeros(cfg.n_unknowns, dtype=complex)
        est[system.boundary:system.boundary + cfg.L + 1] = coef
    return EstimateReport(est, Method(method), boundary=system.boundary,
                          wall_time=t[0], info={"cond": cond})


def classical_jfsce(system: MeasurementSystem) -> EstimateReport:
    """Minimum-norm least-squares solution over all ``M+L`` unknowns."""
    with timed() as t:
        est, _, rank, sv = np.linalg.lstsq(system.X, system.y, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    return EstimateReport(est, Method.CLASSICAL, wall_time=t[0],
                          info={"cond": cond, "rank": int(rank)})


def ideal_estimate(truth: CombinedChannel) -> EstimateReport:
    return EstimateReport(np.array(truth.taps, dtype=complex), Method.IDEAL)
