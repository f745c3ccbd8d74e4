"""Frame-sync / channel-estimation methods behind one dispatch function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..measurement import MeasurementSystem, conventional_system
from ..signal_model import CombinedChannel
from .base import SSR_METHODS, EstimateReport, Method, SolverParams, derive_boundary, timed
from .conventional import classical_jfsce, conventional_estimate, correlate_boundary, ideal_estimate
from .emgmamp import GmPrior, emgmamp
from .greedy import cosamp, omp
from .reweighted_l1 import lambda_rule, reweighted_l1
from .sbl import SblState, sbl

__all__ = [
    "Method", "SSR_METHODS", "EstimateReport", "SolverParams", "GmPrior", "SblState", "Problem",
    "correlate_boundary", "conventional_estimate", "classical_jfsce", "ideal_estimate",
    "omp", "cosamp", "reweighted_l1", "lambda_rule", "sbl", "emgmamp",
    "derive_boundary", "estimate", "parse_methods",
]


@dataclass(frozen=True)
class Problem:
    """Everything an estimator may look at for one training frame.

    ``received`` starts at the first collected sample and must hold at least
    ``M~ + M - 1`` samples so every candidate boundary can be correlated.
    ``truth`` is only read by the genie and ideal baselines.
    """

    system: MeasurementSystem
    received: np.ndarray
    truth: CombinedChannel | None = None


def parse_methods(names) -> list[Method]:
    if isinstance(names, str):
        names = [n for n in names.split(",") if n.strip()]
    out = []
    for name in names:
        try:
            out.append(Method(name.strip()))
        except ValueError:
            valid = ", ".join(m.value for m in Method)
            raise ParameterError(f"unknown method {name!r}; valid: {valid}") from None
    return out


def estimate(method, problem: Problem, params: SolverParams) -> EstimateReport:
    method = Method(method)
    system = problem.system
    cfg = system.cfg
    if method is Method.CONVENTIONAL:
        with timed() as t:
            boundary = correlate_boundary(problem.received, system.training, cfg.M)
            report = conventional_estimate(conventional_system(system, boundary))
        report.wall_time = t[0]
        return report
    if method is Method.GENIE_CONVENTIONAL:
        if problem.truth is None:
            raise ParameterError("genie-conventional needs the true boundary")
        return conventional_estimate(conventional_system(system, problem.truth.boundary),
                                     Method.GENIE_CONVENTIONAL)
    if method is Method.IDEAL:
        if problem.truth is None:
            raise ParameterError("ideal needs the true channel")
        return ideal_estimate(problem.truth)
    solver = {
        Method.CLASSICAL: lambda s, p: classical_jfsce(s),
        Method.OMP: omp,
        Method.COSAMP: cosamp,
        Method.RL1: reweighted_l1,
        Method.SBL: sbl,
        Method.EMGMAMP: emgmamp,
    }[method]
    return solver(system, params)
