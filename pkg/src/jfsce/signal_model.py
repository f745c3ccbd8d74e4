"""Channels, frame geometry and the symbol-spaced forward model.

The received sample at time ``n`` is

    y(n) = sum_l x(n - l) * htilde[l] + z(n)

where ``htilde`` is the combined channel: the physical CIR shifted by the
frame boundary offset and zero padded to length ``M + L``.

SNR convention: symbols have unit energy and ``z`` is circularly symmetric
complex Gaussian with total variance ``sigma2`` (``sigma2 / 2`` per real and
imaginary part), so ``SNR = 1 / sigma2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryRangeError, DimensionError, ParameterError

QPSK_POINTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2)

# Sparse CIR used throughout the simulation studies: tap index -> value.
REFERENCE_TAPS = {
    0: -0.5,
    7: 0.1,
    14: 0.9,
    33: -0.3,
    49: 0.5,
    51: -0.25,
    69: -0.3,
    73: 0.3,
    89: 0.4,
    100: -0.1,
}
# strongest tap off the first lag so correlation sync locks late
SMALL_TAPS = {0: -0.5, 3: 0.9, 9: 0.5, 14: -0.3, 20: 0.2}


def make_rng(seed=None) -> np.random.Generator:
    """Return a generator for ``seed`` (int, SeedSequence, Generator or None)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def snr_to_noise_var(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


@dataclass(frozen=True)
class FrameConfig:
    """Frame geometry.

    ``M`` data-frame length, ``L`` CIR memory, ``NE`` number of equations,
    ``P`` training period in frames. The training frame length is always
    ``M + L + NE - 1``.
    """

    M: int
    L: int
    NE: int
    P: int = 1

    def __post_init__(self):
        if self.M < 1:
            raise ParameterError(f"M must be >= 1, got {self.M}")
        if self.L < 0:
            raise ParameterError(f"L must be >= 0, got {self.L}")
        if self.NE < 1:
            raise ParameterError(f"NE must be >= 1, got {self.NE}")
        if self.P < 1:
            raise ParameterError(f"P must be >= 1, got {self.P}")

    @property
    def M_tilde(self) -> int:
        return self.M + self.L + self.NE - 1

    @property
    def M_bar(self) -> int:
        return (self.P - 1) * self.M + self.M_tilde

    @property
    def n_unknowns(self) -> int:
        return self.M + self.L


@dataclass(frozen=True)
class Cir:
    """Symbol-spaced channel impulse response ``h_0 .. h_L``."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex).ravel()
        if taps.size == 0:
            raise DimensionError("CIR needs at least one tap")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def L(self) -> int:
        return self.taps.size - 1

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.taps))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.taps)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))

    @classmethod
    def from_dict(cls, taps: dict, L: int) -> "Cir":
        h = np.zeros(L + 1, dtype=complex)
        for idx, val in taps.items():
            h[idx] = val
        return cls(h)


def reference_cir() -> Cir:
    """The 101-tap, 10-sparse CIR of the simulation studies (strongest tap at 14)."""
    return Cir.from_dict(REFERENCE_TAPS, L=100)


def small_cir() -> Cir:
    """Desk-scale analogue of the simulation CIR: L=20, 5 taps, strongest at lag 3."""
    return Cir.from_dict(SMALL_TAPS, L=20)


def random_sparse_cir(L: int, k: int, rng=None) -> Cir:
    """Random ``k``-sparse CIR: uniform support, CN(0, 1/k) amplitudes."""
    if not 1 <= k <= L + 1:
        raise ParameterError(f"need 1 <= k <= L+1, got k={k}, L={L}")
    rng = make_rng(rng)
    h = np.zeros(L + 1, dtype=complex)
    idx = rng.choice(L + 1, size=k, replace=False)
    h[idx] = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2 * k)
    return Cir(h)


@dataclass(frozen=True)
class DelayModel:
    """Total delay ``D = m*M + Dbar``."""

    D: int
    M: int

    def __post_init__(self):
        if self.D < 0 or self.M < 1:
            raise ParameterError(f"invalid delay D={self.D}, M={self.M}")

    @property
    def m(self) -> int:
        return self.D // self.M

    @property
    def boundary(self) -> int:
        return self.D % self.M


@dataclass(frozen=True)
class CombinedChannel:
    taps: np.ndarray
    boundary: int
    support: np.ndarray = field(repr=False)

    @property
    def length(self) -> int:
        return self.taps.size


def build_combined_channel(h: Cir, boundary: int, M: int) -> CombinedChannel:
    """Delay ``h`` by ``boundary`` samples and zero pad to length ``M + L``."""
    if not 0 <= boundary <= M - 1:
        raise BoundaryRangeError(f"boundary {boundary} outside [0, {M - 1}]")
    taps = np.zeros(M + h.L, dtype=complex)
    taps[boundary:boundary + h.L + 1] = h.taps
    taps.setflags(write=False)
    support = boundary + h.support
    return CombinedChannel(taps=taps, boundary=boundary, support=support)


@dataclass(frozen=True)
class NoiseSpec:
    variance: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise ParameterError(f"noise variance must be >= 0, got {self.variance}")

    @classmethod
    def from_snr_db(cls, snr_db: float, seed=None) -> "NoiseSpec":
        return cls(snr_to_noise_var(snr_db), seed)


def complex_noise(shape, variance: float, rng=None) -> np.ndarray:
    rng = make_rng(rng)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def channel_output(x, htilde, noise: NoiseSpec | None = None, history=None, rng=None) -> np.ndarray:
    """Pass ``x`` through the combined channel and add AWGN.

    Parameters
    ----------
    x : array_like
        Transmitted symbols ``x(0) .. x(n-1)``.
    htilde : CombinedChannel or array_like
        Channel taps.
    noise : NoiseSpec, optional
        Noise variance and seed. ``None`` means noiseless.
    history : array_like, optional
        The ``len(htilde) - 1`` symbols preceding ``x(0)``, oldest first.
        Missing history is taken as zeros.
    rng : optional
        Overrides ``noise.seed`` as the noise source.

    Returns
    -------
    ndarray
        ``y(0) .. y(n-1)``, same length as ``x``.
    """
    h = np.asarray(htilde.taps if isinstance(htilde, CombinedChannel) else htilde, dtype=complex)
    x = np.asarray(x, dtype=complex)
    n_hist = h.size - 1
    if history is None:
        history = np.zeros(n_hist, dtype=complex)
    history = np.asarray(history, dtype=complex)
    if history.size < n_hist:
        history = np.concatenate([np.zeros(n_hist - history.size, dtype=complex), history])
    else:
        history = history[history.size - n_hist:] if n_hist else history[:0]
    full = np.concatenate([history, x])
    y = np.convolve(full, h)[n_hist:n_hist + x.size]
    if noise is not None and noise.variance > 0:
        src = rng if rng is not None else noise.seed
        y = y + complex_noise(y.shape, noise.variance, src)
    return y


def generate_qpsk(count: int, seed=None) -> np.ndarray:
    """Unit-energy Gray-mapped QPSK symbols ``(+-1 +- 1j)/sqrt(2)``."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    rng = make_rng(seed)
    bits = rng.integers(0, 2, size=(count, 2))
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / np.sqrt(2)
