from __future__ import annotations

import enum
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoBoundaryError, ParameterError


class Method(str, enum.Enum):
    CONVENTIONAL = "conventional"
    GENIE_CONVENTIONAL = "genie-conventional"
    CLASSICAL = "classical"
    OMP = "omp"
    COSAMP = "cosamp"
    RL1 = "rl1"
    SBL = "sbl"
    EMGMAMP = "emgmamp"
    IDEAL = "ideal"

    def __str__(self):
        return self.value


SSR_METHODS = (Method.OMP, Method.COSAMP, Method.RL1, Method.SBL, Method.EMGMAMP)


@dataclass
class EstimateReport:
    """Combined-channel estimate plus bookkeeping.

    ``boundary`` is only set by the conventional estimators, which pick the
    frame boundary before estimating the channel. ``flags`` collects
    non-fatal conditions such as ``"max-iter"`` or ``"stagnation"``.
    """

    estimate: np.ndarray
    method: Method
    boundary: int | None = None
    iterations: int = 0
    wall_time: float = 0.0
    flags: tuple = ()
    info: dict = field(default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.estimate)


@dataclass(frozen=True)
class SolverParams:
    """Knobs shared by the sparse solvers.

    k : sparsity budget for OMP/CoSaMP (and the R-l1 lambda rule)
    lam : R-l1 penalty; ``None`` applies ``4 sigma sqrt(M+L-k)``
    eps_rel : R-l1 weight damping, relative to max |h| of the first iterate
    noise_var : noise variance known to SBL, R-l1 and the EMGMAMP initializer
    """

    k: int = 10
    lam: float | None = None
    eps_rel: float = 1e-3
    max_iter: int = 200
    tol: float = 1e-6
    noise_var: float = 0.0
    reweights: int = 5
    inner_max_iter: int = 2000
    sbl_prune: float = 1e-6
    sbl_learn_noise: bool = False
    gm_components: int = 3
    damping: float = 0.7
    em_max_iter: int = 50
    gamp_max_iter: int = 200
    gm_sparsity: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.lam is not None and self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.eps_rel <= 0:
            raise ParameterError(f"eps must be > 0, got {self.eps_rel}")
        if self.tol <= 0:
            raise ParameterError(f"tol must be > 0, got {self.tol}")
        if self.noise_var < 0:
            raise ParameterError(f"noise variance must be >= 0, got {self.noise_var}")
        if not 0 < self.damping <= 1:
            raise ParameterError(f"damping must lie in (0, 1], got {self.damping}")


@contextmanager
def timed():
    """Yield a one-element list that receives the elapsed seconds."""
    out = [0.0]
    t0 = time.perf_counter()
    try:
        yield out
    finally:
        out[0] = time.perf_counter() - t0


def derive_boundary(report: EstimateReport, M: int, theta: float = 0.1) -> int:
    """First index whose magnitude reaches ``theta * max``, clipped to ``[0, M-1]``."""
    mag = np.abs(report.estimate)
    peak = mag.max(initial=0.0)
    if peak == 0.0:
        raise NoBoundaryError(f"{report.method} estimate is all zero")
    first = int(np.argmax(mag >= theta * peak))
    return min(max(first, 0), M - 1)
