"""Software replay of the SDR loopback experiment at symbol rate.

Transmitter: one training frame followed by ``P - 1`` data frames form a
block of ``M_bar`` QPSK symbols that is sent repeatedly. Symbols are
upsampled, RRC filtered, passed through a two-tap symbol-spaced channel and
the start-up period is discarded, leaving one steady-state period.

Receiver: the period is circularly delayed by ``D`` symbols, tiled, noise is
added, then RRC matched filtering and decimation give a symbol-rate stream.
The front end is ideal: no carrier or clock offsets.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .measurement import training_sequence
from .signal_model import Cir, FrameConfig, NoiseSpec, complex_noise, generate_qpsk, make_rng

SAMPLE_RATE = 200_000.0


@dataclass(frozen=True)
class LoopbackConfig:
    P: int = 10
    M: int = 100
    L: int = 5
    NE: int = 43
    osf: int = 4
    rolloff: float = 0.5
    span: int = 10
    channel_index: int = 1
    delay: int = 0

    def __post_init__(self):
        if self.osf < 1 or self.span < 1:
            raise ParameterError("osf and span must be >= 1")
        if not 0 < self.rolloff <= 1:
            raise ParameterError(f"roll-off must lie in (0, 1], got {self.rolloff}")
        if self.channel_index < 1:
            raise ParameterError(f"channel index must be >= 1, got {self.channel_index}")
        if not 0 <= self.delay < self.M_bar:
            raise ParameterError(f"delay {self.delay} outside [0, {self.M_bar})")

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.M, self.L, self.NE, self.P)

    @property
    def M_tilde(self) -> int:
        return self.frame.M_tilde

    @property
    def M_bar(self) -> int:
        return self.frame.M_bar


def rrc_taps(rolloff: float, span: int, osf: int) -> np.ndarray:
    """Unit-energy root-raised-cosine filter with ``span * osf + 1`` taps."""
    if not 0 < rolloff <= 1:
        raise ParameterError(f"roll-off must lie in (0, 1], got {rolloff}")
    if span < 1 or osf < 1:
        raise ParameterError("span and osf must be >= 1")
    b = rolloff
    t = (np.arange(span * osf + 1) - span * osf / 2) / osf
    g = np.empty_like(t)
    for j, tj in enumerate(t):
        if abs(tj) < 1e-12:
            g[j] = 1.0 - b + 4.0 * b / np.pi
        elif abs(abs(tj) - 1.0 / (4.0 * b)) < 1e-12:
            g[j] = (b / np.sqrt(2)) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                                       + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
        else:
            num = np.sin(np.pi * tj * (1 - b)) + 4 * b * tj * np.cos(np.pi * tj * (1 + b))
            g[j] = num / (np.pi * tj * (1 - (4 * b * tj) ** 2))
    # exact mirror so the taps are symmetric to the last bit
    g = 0.5 * (g + g[::-1])
    return g / np.sqrt(np.sum(g ** 2))


def manual_cir(i: int) -> Cir:
    """``h[0] = 1``, ``h[i] = 0.7``, zeros elsewhere."""
    if i < 1:
        raise ParameterError(f"channel index must be >= 1, got {i}")
    h = np.zeros(i + 1)
    h[0], h[i] = 1.0, 0.7
    return Cir(h)


def locate_training_window(D: int, cfg: LoopbackConfig):
    """Frame delay ``m`` and 1-indexed inclusive window ``(first, last)`` in the central block."""
    if not 0 <= D < cfg.M_bar:
        raise ParameterError(f"delay {D} outside [0, {cfg.M_bar})")
    m = min(D // cfg.M, cfg.P)
    return m, (m * cfg.M + 1, m * cfg.M + cfg.M_tilde)


def _shape(symbols: np.ndarray, g: np.ndarray, osf: int) -> np.ndarray:
    up = np.zeros(symbols.size * osf, dtype=complex)
    up[::osf] = symbols
    half = (g.size - 1) // 2
    return np.convolve(up, g)[half:half + up.size]


def _matched(samples: np.ndarray, g: np.ndarray, osf: int) -> np.ndarray:
    half = (g.size - 1) // 2
    return np.convolve(samples, g)[half:half + samples.size][::osf]


def _apply_cir(samples: np.ndarray, cir: Cir, osf: int) -> np.ndarray:
    up = np.zeros(cir.L * osf + 1, dtype=complex)
    up[::osf] = cir.taps
    return np.convolve(samples, up)[:samples.size]


def transmit_block(block: np.ndarray, cfg: LoopbackConfig) -> np.ndarray:
    """One steady-state oversampled period of the repeated block."""
    g = rrc_taps(cfg.rolloff, cfg.span, cfg.osf)
    period = block.size * cfg.osf
    tx = _apply_cir(_shape(np.tile(block, 3), g, cfg.osf), manual_cir(cfg.channel_index), cfg.osf)
    return tx[period:2 * period]


def receive(samples: np.ndarray, cfg: LoopbackConfig) -> np.ndarray:
    """RRC matched filter and decimate to one sample per symbol."""
    g = rrc_taps(cfg.rolloff, cfg.span, cfg.osf)
    return _matched(np.asarray(samples, dtype=complex), g, cfg.osf)


def composite_channel(cfg: LoopbackConfig):
    """Symbol-spaced TX filter -> CIR -> RX filter response by impulse probing.

    Returns ``(lags, taps)`` covering every lag where the response can be
    nonzero.
    """
    g = rrc_taps(cfg.rolloff, cfg.span, cfg.osf)
    pad = cfg.span + 1
    probe = np.zeros(2 * pad + cfg.channel_index + 1, dtype=complex)
    probe[pad] = 1.0
    out = _matched(_apply_cir(_shape(probe, g, cfg.osf), manual_cir(cfg.channel_index), cfg.osf), g, cfg.osf)
    lags = np.arange(out.size) - pad
    keep = (lags >= -cfg.span) & (lags <= cfg.span + cfg.channel_index)
    return lags[keep], out[keep]


@dataclass
class LoopbackRecord:
    """Ground truth for one loopback run (buffer indices are 0-based)."""

    cfg: LoopbackConfig
    block: np.ndarray
    training: np.ndarray
    m: int
    boundary: int
    window_start: int
    composite_lags: np.ndarray
    composite_taps: np.ndarray
    noise_var: float
    oversampled: np.ndarray

    def combined_channel(self) -> np.ndarray:
        """Composite response placed at the boundary, truncated to ``M + L`` taps."""
        n = self.cfg.M + self.cfg.L
        h = np.zeros(n, dtype=complex)
        idx = self.boundary + self.composite_lags
        ok = (idx >= 0) & (idx < n)
        h[idx[ok]] = self.composite_taps[ok]
        return h

    def symbol_timeline(self, length: int) -> np.ndarray:
        """``x(n)`` on buffer indices so that ``y(n) = sum_l htilde[l] x(n - l) + z(n)``."""
        n = np.arange(length)
        return self.block[(n - self.window_start) % self.block.size]


def run_loopback(cfg: LoopbackConfig, noise: NoiseSpec | None = None, seed=None):
    """Generate a triple buffer of ``3 * M_bar`` symbol-rate samples.

    The central block is ``[M_bar, 2 M_bar)``; the training frame starts at
    buffer index ``M_bar + D``.
    """
    rng = make_rng(seed)
    noise = noise or NoiseSpec(0.0)
    training = training_sequence(cfg.frame)
    data = generate_qpsk((cfg.P - 1) * cfg.M, rng) if cfg.P > 1 else np.zeros(0, dtype=complex)
    block = np.concatenate([training, data])
    period = transmit_block(block, cfg)
    delayed = np.roll(period, cfg.osf * cfg.delay)
    # one guard period each side absorbs the RX filter start-up
    rx = np.tile(delayed, 5)
    if noise.variance > 0:
        src = noise.seed if noise.seed is not None else rng
        rx = rx + complex_noise(rx.shape, noise.variance, src)
    symbols = receive(rx, cfg)[cfg.M_bar:4 * cfg.M_bar]
    m, (first, _) = locate_training_window(cfg.delay, cfg)
    lags, taps = composite_channel(cfg)
    record = LoopbackRecord(
        cfg=cfg, block=block, training=training, m=m, boundary=cfg.delay - m * cfg.M,
        window_start=cfg.M_bar + first - 1, composite_lags=lags, composite_taps=taps,
        noise_var=noise.variance, oversampled=rx[cfg.osf * cfg.M_bar:4 * cfg.osf * cfg.M_bar],
    )
    return symbols, record


def write_iq_dump(stem, samples, meta: dict) -> tuple[Path, Path]:
    """Write ``<stem>.c64`` (interleaved little-endian complex64) and a ``<stem>.txt`` header."""
    stem = Path(stem)
    data_path = stem.with_suffix(".c64")
    head_path = stem.with_suffix(".txt")
    np.asarray(samples, dtype="<c8").tofile(data_path)
    lines = [f"{k} = {v}" for k, v in meta.items()]
    lines.append(f"samples = {np.asarray(samples).size}")
    head_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return data_path, head_path


def read_iq_dump(stem):
    stem = Path(stem)
    samples = np.fromfile(stem.with_suffix(".c64"), dtype="<c8")
    meta = {}
    for line in stem.with_suffix(".txt").read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            meta[key.strip()] = val.strip()
    return samples, meta


def dump_metadata(cfg: LoopbackConfig, seed, noise: NoiseSpec) -> dict:
    meta = {"sample_rate": SAMPLE_RATE, "seed": seed, "noise_var": noise.variance}
    meta.update({f"cfg.{k}": v for k, v in asdict(cfg).items()})
    return meta
