"""Linear measurement systems built from a known training frame.

The last ``NE`` received samples of a training frame, read newest first,
satisfy ``y = Xt @ htilde + z`` where ``Xt[r, c] = x_t[Mt - 1 - r - c]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hankel

from .errors import BoundaryRangeError, DimensionError
from .signal_model import FrameConfig, generate_qpsk

# Seed for the training sequence shared by transmitter and receiver.
TRAINING_SEED = 0x7A11


@dataclass(frozen=True)
class MeasurementSystem:
    y: np.ndarray
    X: np.ndarray
    training: np.ndarray
    cfg: FrameConfig


@dataclass(frozen=True)
class ConventionalSystem:
    y: np.ndarray
    X: np.ndarray
    boundary: int
    cfg: FrameConfig


def training_sequence(cfg: FrameConfig, seed=TRAINING_SEED) -> np.ndarray:
    return generate_qpsk(cfg.M_tilde, seed)


def _check_training(training, cfg: FrameConfig) -> np.ndarray:
    training = np.asarray(training, dtype=complex).ravel()
    if training.size != cfg.M_tilde:
        raise DimensionError(
            f"training length {training.size} != M~ = M+L+NE-1 = "
            f"{cfg.M}+{cfg.L}+{cfg.NE}-1 = {cfg.M_tilde}"
        )
    return training


def build_training_matrix(training, cfg: FrameConfig) -> np.ndarray:
    """``NE x (M+L)`` Hankel matrix with ``X[r, c] = training[M~-1-r-c]``."""
    rev = _check_training(training, cfg)[::-1]
    return hankel(rev[:cfg.NE], rev[cfg.NE - 1:cfg.NE - 1 + cfg.n_unknowns])


def collect_received_vector(samples, cfg: FrameConfig) -> np.ndarray:
    """Last ``NE`` of the ``M~`` training-frame samples, newest first."""
    samples = np.asarray(samples, dtype=complex).ravel()
    if samples.size != cfg.M_tilde:
        raise DimensionError(f"expected {cfg.M_tilde} training-frame samples, got {samples.size}")
    return samples[::-1][:cfg.NE].copy()


def build_conventional_matrix(training, boundary: int, cfg: FrameConfig) -> np.ndarray:
    """``NE x (L+1)`` matrix for a known boundary: columns ``boundary..boundary+L`` of the full matrix."""
    if not 0 <= boundary <= cfg.M - 1:
        raise BoundaryRangeError(f"boundary {boundary} outside [0, {cfg.M - 1}]")
    rev = _check_training(training, cfg)[::-1]
    first = boundary
    return hankel(rev[first:first + cfg.NE], rev[first + cfg.NE - 1:first + cfg.NE + cfg.L])


def measurement_system(samples, training, cfg: FrameConfig) -> MeasurementSystem:
    training = _check_training(training, cfg)
    return MeasurementSystem(
        y=collect_received_vector(samples, cfg),
        X=build_training_matrix(training, cfg),
        training=training,
        cfg=cfg,
    )


def conventional_system(system: MeasurementSystem, boundary: int) -> ConventionalSystem:
    return ConventionalSystem(
        y=system.y,
        X=build_conventional_matrix(system.training, boundary, system.cfg),
        boundary=boundary,
        cfg=system.cfg,
    )
