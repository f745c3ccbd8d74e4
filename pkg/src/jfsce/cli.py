"""Command-line entry point: ``jfsce run|list-experiments|describe|loopback``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import SCALES, load_experiments, load_loopback, preset
from .equalizer import design_mmse_equalizer, evaluate_symbol_mse
from .errors import ConfigError, JfsceError, ParameterError
from .estimators import Problem, SolverParams, derive_boundary, estimate, parse_methods
from .harness import EXPERIMENTS, ExperimentConfig, emit_csv, emit_slopes, run_experiment, run_time_study
from .loopback import dump_metadata, run_loopback, write_iq_dump
from .measurement import measurement_system
from .signal_model import NoiseSpec, snr_to_noise_var

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_SUMMARY = {
    "mse-vs-snr": "equalized MSE versus SNR on the fixed 10-sparse CIR",
    "mse-vs-ne": "equalized MSE versus number of measurement equations NE",
    "time-vs-ne": "estimator wall time versus NE, with log-log slopes",
    "mse-vs-sparsity": "equalized MSE versus sparsity of a random CIR",
    "eq-taps": "loopback equalized MSE versus active equalizer taps",
    "loopback-index": "loopback equalized MSE versus second-tap index i",
}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the config-error code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jfsce", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run every [experiment.<id>] section of a config file")
    run.add_argument("config", help="config file, or a bundled name: full, small")
    run.add_argument("--scale", choices=SCALES, help="preset used for keys the file leaves out")
    run.add_argument("--only", help="comma separated experiment ids to run")
    _common(run)
    run.add_argument("--jobs", type=int, help="worker processes for trials")
    run.add_argument("--deterministic", action="store_true",
                     help="write time_s as 0 so repeated runs give identical files")

    sub.add_parser("list-experiments", help="list experiment ids")

    desc = sub.add_parser("describe", help="print an experiment's defaults")
    desc.add_argument("experiment")
    desc.add_argument("--scale", choices=SCALES, default="full")

    loop = sub.add_parser("loopback", help="one loopback run from the [loopback] section, with IQ dump")
    loop.add_argument("config")
    _common(loop)
    loop.add_argument("--no-dump", action="store_true", help="skip writing the IQ dump")
    return parser


def _common(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--methods", help="comma separated method ids")


def _csv_name(experiment: str) -> str:
    return experiment.replace("-", "_") + ".csv"


def _cmd_run(args) -> int:
    overrides = dict(seed=args.seed, trials=args.trials, jobs=args.jobs)
    if args.methods:
        overrides["methods"] = tuple(m.value for m in parse_methods(args.methods))
    if args.deterministic:
        overrides["deterministic"] = True
    cfgs = load_experiments(args.config, scale=args.scale, **overrides)
    if args.only:
        wanted = [s.strip() for s in args.only.split(",")]
        unknown = [w for w in wanted if w not in EXPERIMENTS]
        if unknown:
            raise ConfigError(f"unknown experiment(s) {', '.join(unknown)}; valid: {', '.join(EXPERIMENTS)}")
        cfgs = [c for c in cfgs if c.experiment in wanted]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in cfgs:
        if cfg.experiment == "time-vs-ne":
            rows, slopes = run_time_study(cfg)
            emit_slopes(slopes, out / "time_vs_ne_slopes.csv")
        else:
            rows = run_experiment(cfg)
        path = emit_csv(rows, out / _csv_name(cfg.experiment))
        failures = sum(r.failures for r in rows)
        print(f"{cfg.experiment}: {len(rows)} rows -> {path}" + (f" ({failures} failed trials)" if failures else ""))
    return EXIT_OK


def _cmd_describe(args) -> int:
    cfg = ExperimentConfig(args.experiment, **preset(args.experiment, args.scale)) \
        if args.experiment in EXPERIMENTS else None
    if cfg is None:
        raise ConfigError(f"unknown experiment {args.experiment!r}; valid: {', '.join(EXPERIMENTS)}")
    print(f"{cfg.experiment}: {_SUMMARY[cfg.experiment]} ({args.scale} scale)")
    print(f"  sweep: {cfg.sweep_name} = {', '.join(f'{v:g}' for v in cfg.grid)}")
    if cfg.is_loopback:
        print(f"  testbed: P={cfg.P}, M={cfg.M}, L={cfg.L}, NE={cfg.NE}, "
              f"delay D={'random' if cfg.delay is None else cfg.delay}")
    else:
        print(f"  frame: M={cfg.M}, L={cfg.L}, M+L={cfg.M + cfg.L}, NE={cfg.NE}, Dbar={cfg.boundary}, "
              f"CIR={cfg.cir if cfg.experiment != 'mse-vs-sparsity' else 'random k-sparse'}")
    if cfg.experiment != "mse-vs-snr":
        print(f"  SNR={cfg.snr_db:g} dB")
    print(f"  equalizer: N={cfg.eq_taps}, budget={cfg.eq_budget if cfg.experiment != 'eq-taps' else 'swept'}")
    print(f"  methods: {', '.join(cfg.methods)}")
    print(f"  trials={cfg.trials}, seed={cfg.seed}")
    return EXIT_OK


def _cmd_loopback(args) -> int:
    lcfg, snr_db, seed = load_loopback(args.config)
    seed = args.seed if args.seed is not None else seed
    noise = NoiseSpec(snr_to_noise_var(snr_db))
    methods = parse_methods(args.methods or "omp,conventional,classical")
    y, rec = run_loopback(lcfg, noise, seed)
    frame = lcfg.frame
    w0 = rec.window_start
    system = measurement_system(y[w0:w0 + frame.M_tilde], rec.training, frame)
    problem = Problem(system, y[w0:w0 + frame.M_tilde + frame.M - 1])
    print(f"loopback: i={lcfg.channel_index}, D={lcfg.delay}, m={rec.m}, Dbar={rec.boundary}, "
          f"SNR={snr_db:g} dB, window starts at buffer index {w0}")
    x = rec.symbol_timeline(y.size)
    params = SolverParams(k=lcfg.L + 1, noise_var=noise.variance)
    for method in methods:
        report = estimate(method, problem, params)
        design = design_mmse_equalizer(report.estimate, 200, noise.variance, budget=11)
        mse = evaluate_symbol_mse(design, y, x, lcfg.M_bar, 2 * lcfg.M_bar)
        boundary = report.boundary if report.boundary is not None else derive_boundary(report, lcfg.M)
        top = np.argsort(-np.abs(report.estimate), kind="stable")[:2]
        taps = ", ".join(f"{i}:{abs(report.estimate[i]):.3f}" for i in sorted(top))
        print(f"  {method.value:14s} boundary={boundary:4d}  top taps {taps}  MSE(11 taps)={10 * np.log10(mse):.2f} dB")
    if not args.no_dump:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        data, head = write_iq_dump(out / "loopback", rec.oversampled, dump_metadata(lcfg, seed, noise))
        print(f"  IQ dump: {data} (+ {head.name})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "list-experiments":
            for name in EXPERIMENTS:
                print(f"{name:16s} {_SUMMARY[name]}")
            return EXIT_OK
        if args.command == "describe":
            return _cmd_describe(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_loopback(args)
    except (ConfigError, ParameterError) as exc:
        print(f"jfsce: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (JfsceError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        print(f"jfsce: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
