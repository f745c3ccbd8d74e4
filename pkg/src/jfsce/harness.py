"""Monte Carlo runner for the simulation and loopback studies.

Every trial draws its randomness from ``SeedSequence([seed, experiment,
grid index, trial])``. The stream does not depend on the method, so all
methods in a trial see the same symbols and the same noise. Results are
summed in (grid, trial) order, so the output is the same whatever the
worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .equalizer import design_mmse_equalizer, evaluate_symbol_mse
from .errors import ConfigError, JfsceError, NoBoundaryError, ParameterError
from .estimators import EstimateReport, Method, Problem, SolverParams, derive_boundary, estimate, parse_methods
from .loopback import LoopbackConfig, run_loopback
from .measurement import measurement_system, training_sequence
from .signal_model import (
    CombinedChannel, FrameConfig, NoiseSpec, build_combined_channel, channel_output, reference_cir,
    generate_qpsk, random_sparse_cir, small_cir, snr_to_noise_var,
)

EXPERIMENTS = ("mse-vs-snr", "mse-vs-ne", "time-vs-ne", "mse-vs-sparsity", "eq-taps", "loopback-index")
_EXP_CODE = {name: i for i, name in enumerate(EXPERIMENTS)}
_SWEEP = {
    "mse-vs-snr": "snr_db",
    "mse-vs-ne": "ne",
    "time-vs-ne": "ne",
    "mse-vs-sparsity": "k",
    "eq-taps": "budget",
    "loopback-index": "i",
}
CSV_COLUMNS = ("experiment", "method", "sweep_name", "sweep_value", "trials", "mse_linear", "mse_db",
               "nmse_db", "time_s", "iters", "boundary_hit_rate", "failures")
_FAILURES = (JfsceError, ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class ExperimentConfig:
    """One study. ``M, L, NE`` apply to every grid point unless the grid sweeps NE.

    ``snr_db`` is the fixed SNR for every experiment except mse-vs-snr, which
    sweeps ``snr_grid`` instead. ``delay`` is the loopback sample delay D;
    ``None`` draws it uniformly per trial.
    """

    experiment: str
    methods: tuple = ("ideal", "genie-conventional", "conventional", "classical", "omp", "cosamp")
    M: int = 1000
    L: int = 100
    NE: int = 148
    boundary: int = 500
    cir: str = "reference"
    k: int | None = None
    snr_db: float = 20.0
    snr_grid: tuple = tuple(float(s) for s in range(0, 31, 2))
    ne_grid: tuple = (148,)
    sparsity_grid: tuple = (10,)
    trials: int = 200
    seed: int = 1
    eq_taps: int = 200
    eq_budget: int = 200
    budgets: tuple = (1, 2, 4, 6, 8, 10, 15, 20, 30, 50, 100, 200)
    P: int = 10
    channel_indices: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    delay: int | None = 350
    eval_len: int | None = None
    deterministic: bool = False
    jobs: int = 1
    solver: tuple = ()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; valid: {', '.join(EXPERIMENTS)}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.grid:
            raise ConfigError(f"{self.experiment}: empty {self.sweep_name} grid")
        if self.cir not in ("reference", "small"):
            raise ConfigError(f"cir must be 'reference' or 'small', got {self.cir!r}")
        try:
            parse_methods(self.methods)
            self.solver_params(0.0)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def sweep_name(self) -> str:
        return _SWEEP[self.experiment]

    @property
    def grid(self) -> tuple:
        return {
            "mse-vs-snr": self.snr_grid,
            "mse-vs-ne": self.ne_grid,
            "time-vs-ne": self.ne_grid,
            "mse-vs-sparsity": self.sparsity_grid,
            "eq-taps": self.budgets,
            "loopback-index": self.channel_indices,
        }[self.experiment]

    @property
    def is_loopback(self) -> bool:
        return self.experiment in ("eq-taps", "loopback-index")

    def frame(self, NE: int | None = None) -> FrameConfig:
        return FrameConfig(self.M, self.L, self.NE if NE is None else int(NE), self.P)

    def fixed_cir(self):
        return reference_cir() if self.cir == "reference" else small_cir()

    def solver_params(self, noise_var: float, k: int | None = None) -> SolverParams:
        if k is None:
            k = self.k if self.k is not None else (self.L + 1 if self.is_loopback else self.fixed_cir().k)
        return SolverParams(**{"k": k, "noise_var": noise_var, **dict(self.solver)})


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    method: str
    sweep_name: str
    sweep_value: float
    trials: int
    mse_linear: float
    mse_db: float
    nmse_db: float
    time_s: float
    iters: float
    boundary_hit_rate: float
    failures: int


@dataclass
class _Outcome:
    mse: float
    nmse: float
    time: float
    iters: int
    hit: bool


@dataclass
class _Acc:
    n: int = 0
    failures: int = 0
    mse: float = 0.0
    nmse: float = 0.0
    time: float = 0.0
    iters: float = 0.0
    hits: int = 0
    times: list = field(default_factory=list)

    def add(self, out: _Outcome | None):
        if out is None:
            self.failures += 1
            return
        self.n += 1
        self.mse += out.mse
        self.nmse += out.nmse
        self.time += out.time
        self.iters += out.iters
        self.hits += int(out.hit)
        self.times.append(out.time)


def trial_seed(cfg: ExperimentConfig, grid_index: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed, _EXP_CODE[cfg.experiment], grid_index, trial])


def _nmse(est, truth) -> float:
    return float(np.sum(np.abs(est - truth) ** 2) / np.sum(np.abs(truth) ** 2))


def _hit(report, truth: CombinedChannel, M: int) -> bool:
    """Boundary chosen by correlation, or read off the estimate, is correct.

    Estimates are read with :func:`derive_boundary` and compared with the same
    rule applied to the true channel. That equals ``Dbar`` whenever ``h[0]``
    is significant and stays well defined for random supports with ``h[0] = 0``.
    """
    if report.method is Method.IDEAL:
        return True
    if report.boundary is not None:
        return report.boundary == truth.boundary
    ref = derive_boundary(EstimateReport(np.asarray(truth.taps), Method.IDEAL), M)
    try:
        return derive_boundary(report, M) == ref
    except NoBoundaryError:
        return False


@dataclass
class _Instance:
    problem: Problem
    y: np.ndarray
    x: np.ndarray
    start: int
    stop: int
    noise_var: float
    M: int
    # True: [start, stop) indexes target symbols, so the output window moves with the delay
    by_symbol: bool = True


def synthesize_instance(frame: FrameConfig, cir, boundary: int, noise_var: float, rng,
                        N: int, eval_len: int) -> _Instance:
    """One training frame plus the data frame that follows it.

    The stream is ``[history, training, data]``; the history is long enough
    that every collected training sample sees transmitted symbols only, and
    the tail covers the longest equalizer delay over ``eval_len`` symbols.
    """
    training = training_sequence(frame)
    truth = build_combined_channel(cir, boundary, frame.M)
    pre = generate_qpsk(frame.M + frame.L, rng)
    post = generate_qpsk(eval_len + N + frame.M + frame.L, rng)
    x = np.concatenate([pre, training, post])
    y = channel_output(x, truth.taps, NoiseSpec(noise_var), rng=rng)
    t0 = pre.size
    system = measurement_system(y[t0:t0 + frame.M_tilde], training, frame)
    problem = Problem(system, y[t0:t0 + frame.M_tilde + frame.M - 1], truth)
    # equalizer output index n targets x(n - delay); score the data symbols after training
    data0 = t0 + frame.M_tilde
    return _Instance(problem, y, x, data0, data0 + eval_len, noise_var, frame.M)


def loopback_instance(cfg: ExperimentConfig, channel_index: int, noise_var: float, rng) -> _Instance:
    frame = cfg.frame()
    delay = cfg.delay if cfg.delay is not None else int(rng.integers(frame.M_bar))
    lcfg = LoopbackConfig(P=cfg.P, M=cfg.M, L=cfg.L, NE=cfg.NE, channel_index=channel_index, delay=delay)
    y, rec = run_loopback(lcfg, NoiseSpec(noise_var), rng)
    taps = rec.combined_channel()
    truth = CombinedChannel(taps, rec.boundary, np.flatnonzero(taps))
    w0 = rec.window_start
    system = measurement_system(y[w0:w0 + frame.M_tilde], rec.training, frame)
    problem = Problem(system, y[w0:w0 + frame.M_tilde + frame.M - 1], truth)
    x = rec.symbol_timeline(y.size)
    # equalize the central block
    return _Instance(problem, y, x, frame.M_bar, 2 * frame.M_bar, noise_var, frame.M, by_symbol=False)


def _score(inst: _Instance, method: Method, params: SolverParams, N: int, budgets) -> dict:
    """Estimate once, then design and evaluate one equalizer per budget."""
    try:
        report = estimate(method, inst.problem, params)
        est = report.estimate
        truth = inst.problem.truth
        nmse = _nmse(est, truth.taps)
        hit = _hit(report, truth, inst.M)
        out = {}
        for b in budgets:
            design = design_mmse_equalizer(est, N, inst.noise_var, budget=min(b, N))
            shift = design.delay if inst.by_symbol else 0
            mse = evaluate_symbol_mse(design, inst.y, inst.x, inst.start + shift, inst.stop + shift)
            out[b] = _Outcome(mse, nmse, report.wall_time, report.iterations, hit)
        return out
    except _FAILURES:
        return {b: None for b in budgets}


def _run_trial(cfg: ExperimentConfig, grid_index: int, trial: int):
    """All methods on one instance. Returns ``{(grid_index, method): outcome}``."""
    rng = np.random.default_rng(trial_seed(cfg, grid_index, trial))
    value = cfg.grid[grid_index]
    exp = cfg.experiment
    noise_var = snr_to_noise_var(value if exp == "mse-vs-snr" else cfg.snr_db)
    N = cfg.eq_taps
    k = None
    if exp == "eq-taps":
        inst = loopback_instance(cfg, cfg.channel_indices[0], noise_var, rng)
        budgets = list(cfg.budgets)
    elif exp == "loopback-index":
        inst = loopback_instance(cfg, int(value), noise_var, rng)
        budgets = [cfg.eq_budget]
    else:
        frame = cfg.frame(value if exp in ("mse-vs-ne", "time-vs-ne") else None)
        if exp == "mse-vs-sparsity":
            k = int(value)
            cir = random_sparse_cir(cfg.L, k, rng)
        else:
            cir = cfg.fixed_cir()
        eval_len = cfg.eval_len if cfg.eval_len is not None else frame.M
        inst = synthesize_instance(frame, cir, cfg.boundary, noise_var, rng, N, eval_len)
        budgets = [cfg.eq_budget]
    params = cfg.solver_params(noise_var, k)
    out = {}
    for method in parse_methods(cfg.methods):
        scores = _score(inst, method, params, N, budgets)
        if exp == "eq-taps":
            for g, b in enumerate(cfg.budgets):
                out[(g, method.value)] = scores[b]
        else:
            out[(grid_index, method.value)] = scores[budgets[0]]
    return trial, out


def _work_items(cfg: ExperimentConfig):
    grid_indices = [0] if cfg.experiment == "eq-taps" else range(len(cfg.grid))
    return [(g, t) for g in grid_indices for t in range(cfg.trials)]


def _collect(cfg: ExperimentConfig) -> dict:
    items = _work_items(cfg)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_trial, [cfg] * len(items), *zip(*items)))
    else:
        results = [_run_trial(cfg, g, t) for g, t in items]
    acc: dict = {}
    # sum in a fixed order so the floating-point result is schedule independent
    for _, (_, out) in sorted(zip(items, results), key=lambda r: r[0]):
        for key, outcome in out.items():
            acc.setdefault(key, _Acc()).add(outcome)
    return acc


def _db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else (-math.inf if x == 0 else math.nan)


def _rows(cfg: ExperimentConfig, acc: dict) -> list[ResultRow]:
    rows = []
    for g, value in enumerate(cfg.grid):
        for method in cfg.methods:
            a = acc[(g, Method(method).value)]
            if a.n:
                mse, nmse = a.mse / a.n, a.nmse / a.n
                time_s, iters, hit = a.time / a.n, a.iters / a.n, a.hits / a.n
            else:
                mse = nmse = time_s = iters = hit = math.nan
            rows.append(ResultRow(
                experiment=cfg.experiment, method=Method(method).value, sweep_name=cfg.sweep_name,
                sweep_value=float(value), trials=a.n + a.failures, mse_linear=mse, mse_db=_db(mse),
                nmse_db=_db(nmse), time_s=0.0 if cfg.deterministic else time_s, iters=iters,
                boundary_hit_rate=hit, failures=a.failures,
            ))
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Monte Carlo means per (grid point, method); see the module docstring for seeding."""
    return _rows(cfg, _collect(cfg))


def run_time_study(cfg: ExperimentConfig):
    """Wall time per estimator call versus NE.

    Returns ``(rows, slopes)`` where ``slopes[method]`` is the least-squares
    slope of log(median time) against log(NE).
    """
    if cfg.experiment != "time-vs-ne":
        cfg = replace(cfg, experiment="time-vs-ne")
    acc = _collect(replace(cfg, deterministic=False))
    rows = _rows(cfg, acc)
    slopes = {}
    ne = np.log(np.asarray(cfg.ne_grid, dtype=float))
    for method in cfg.methods:
        med = [np.median(acc[(g, Method(method).value)].times) if acc[(g, Method(method).value)].times
               else math.nan for g in range(len(cfg.ne_grid))]
        med = np.asarray(med)
        ok = np.isfinite(med) & (med > 0)
        slopes[Method(method).value] = (float(np.polyfit(ne[ok], np.log(med[ok]), 1)[0])
                                        if ok.sum() >= 2 else math.nan)
    return rows, slopes


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(rows, path) -> Path:
    """Write ``rows`` with a fixed header. Floats use ``repr`` (shortest exact form)."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> list[ResultRow]:
    types = {f.name: f.type for f in fields(ResultRow)}
    conv = {"str": str, "int": int, "float": float}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [ResultRow(**{k: conv[types[k]](v) for k, v in rec.items()}) for rec in reader]


def emit_slopes(slopes: dict, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("method", "loglog_slope"))
        for method, slope in slopes.items():
            writer.writerow((method, repr(float(slope))))
    return path
