import numpy as np
import pytest

from jfsce.estimators import Problem
from jfsce.measurement import measurement_system, training_sequence
from jfsce.signal_model import (
    FrameConfig, NoiseSpec, build_combined_channel, channel_output, reference_cir, generate_qpsk,
)


def build_instance(cfg, cir, boundary, noise_var=0.0, seed=0):
    """Training frame with a random previous frame as history. Returns a Problem."""
    rng = np.random.default_rng(seed)
    training = training_sequence(cfg)
    truth = build_combined_channel(cir, boundary, cfg.M)
    pre = generate_qpsk(cfg.M + cfg.L, rng)
    post = generate_qpsk(cfg.M, rng)
    x = np.concatenate([pre, training, post])
    y = channel_output(x, truth, NoiseSpec(noise_var), rng=rng)
    t0 = pre.size
    system = measurement_system(y[t0:t0 + cfg.M_tilde], training, cfg)
    return Problem(system, y[t0:t0 + cfg.M_tilde + cfg.M - 1], truth)


@pytest.fixture(scope="session")
def ref_cfg():
    return FrameConfig(M=1000, L=100, NE=148)


@pytest.fixture(scope="session")
def ref_noiseless(ref_cfg):
    return build_instance(ref_cfg, reference_cir(), 500, 0.0, seed=11)


@pytest.fixture(scope="session")
def ref_20db(ref_cfg):
    return build_instance(ref_cfg, reference_cir(), 500, 0.01, seed=12)


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, passed, detail)``."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
