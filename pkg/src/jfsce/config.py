"""Experiment presets and the ``key = value`` config file format.

A config file holds an optional ``[run]`` section (``scale = full|small``)
and one ``[experiment.<id>]`` section per study to run. Keys in a section
override the preset for that study; ``solver.<name>`` keys override
:class:`SolverParams` fields. Lists are comma separated, and numeric lists
also accept ``start:step:stop`` (stop inclusive).
"""

from __future__ import annotations

import configparser
import dataclasses
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .estimators import SolverParams
from .harness import EXPERIMENTS, ExperimentConfig
from .loopback import LoopbackConfig

SCALES = ("full", "small")

_TESTBED = dict(M=100, L=5, NE=43, P=10, snr_db=20.0, delay=350, eq_taps=200,
                methods=("ideal", "omp", "conventional", "classical"))
_ALL = ("ideal", "genie-conventional", "conventional", "classical", "omp", "cosamp", "rl1", "sbl", "emgmamp")

PRESETS = {
    "full": {
        "mse-vs-snr": dict(methods=tuple(m for m in _ALL if m != "sbl")),
        "mse-vs-ne": dict(ne_grid=(55, 110, 148, 220, 330, 550, 770, 1100, 1320),
                          methods=("ideal", "classical", "omp", "cosamp", "rl1", "emgmamp")),
        "time-vs-ne": dict(ne_grid=(110, 220, 440, 880), trials=5,
                           methods=("classical", "omp", "cosamp", "emgmamp", "sbl")),
        "mse-vs-sparsity": dict(sparsity_grid=(5, 10, 20, 30, 40, 50, 60),
                                methods=("ideal", "genie-conventional", "omp", "cosamp", "rl1", "emgmamp")),
        "eq-taps": dict(_TESTBED),
        "loopback-index": dict(_TESTBED, eq_budget=11),
    },
    "small": {
        "mse-vs-snr": dict(methods=_ALL),
        "mse-vs-ne": dict(ne_grid=(10, 20, 30, 40, 60, 80, 100, 120, 144),
                          methods=("ideal", "classical", "omp", "cosamp", "rl1", "sbl", "emgmamp")),
        "time-vs-ne": dict(ne_grid=(20, 40, 80, 160), trials=20,
                           methods=("classical", "omp", "cosamp", "emgmamp", "sbl")),
        "mse-vs-sparsity": dict(sparsity_grid=(2, 4, 6, 8, 10, 12),
                                methods=("ideal", "genie-conventional", "omp", "cosamp", "rl1", "sbl", "emgmamp")),
        "eq-taps": dict(_TESTBED),
        "loopback-index": dict(_TESTBED, eq_budget=11),
    },
}
_SMALL_FRAME = dict(M=100, L=20, NE=40, boundary=50, cir="small", trials=2000)


def preset(experiment: str, scale: str = "full") -> dict:
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; valid: {', '.join(SCALES)}")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; valid: {', '.join(EXPERIMENTS)}")
    out = {}
    if scale == "small" and experiment not in ("eq-taps", "loopback-index"):
        out.update(_SMALL_FRAME)
    out.update(PRESETS[scale][experiment])
    return out


def default_config(experiment: str, scale: str = "full", **overrides) -> ExperimentConfig:
    return ExperimentConfig(experiment, **{**preset(experiment, scale), **overrides})


def _number(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def _numeric_list(text: str) -> tuple:
    text = text.strip()
    if ":" in text and "," not in text:
        parts = [_number(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] == 0:
            raise ConfigError(f"range {text!r} must be start:step:stop with nonzero step")
        start, step, stop = parts
        out, v, i = [], start, 0
        while (step > 0 and v <= stop + 1e-9) or (step < 0 and v >= stop - 1e-9):
            out.append(v)
            i += 1
            v = start + i * step
        return tuple(out)
    return tuple(_number(p) for p in text.split(",") if p.strip())


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_SOLVER_FIELDS = {f.name: f.type for f in dataclasses.fields(SolverParams)}


def _parse_value(key: str, text: str, kind: str):
    try:
        if key == "methods":
            return tuple(m.strip() for m in text.split(",") if m.strip())
        if key == "delay":
            return None if text.strip().lower() in ("random", "none") else int(text)
        if kind == "tuple":
            return _numeric_list(text)
        if kind in ("int", "int | None"):
            return None if text.strip().lower() == "none" else int(text)
        if kind in ("float", "float | None"):
            return None if text.strip().lower() == "none" else float(text)
        if kind == "bool":
            return text.strip().lower() in ("1", "true", "yes", "on")
        return text.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})") from None


def section_overrides(section) -> dict:
    out, solver = {}, {}
    for key, text in section.items():
        if key.startswith("solver."):
            name = key[len("solver."):]
            if name not in _SOLVER_FIELDS:
                raise ConfigError(f"unknown solver parameter {name!r}")
            solver[name] = _parse_value(name, text, _SOLVER_FIELDS[name])
        elif key in _FIELD_TYPES and key != "experiment":
            out[key] = _parse_value(key, text, _FIELD_TYPES[key])
        else:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
    if solver:
        out["solver"] = tuple(sorted(solver.items()))
    return out


def _read(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    path = resolve_config_path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parser


def resolve_config_path(path) -> Path:
    """A file path, or the name of a bundled config (``full``, ``small``)."""
    p = Path(path)
    if p.is_file():
        return p
    bundled = resources.files("jfsce") / "configs" / f"{p.stem}.ini"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config file not found: {path}")


def load_experiments(path, scale: str | None = None, **overrides) -> list[ExperimentConfig]:
    """Experiment configs in file order. CLI ``overrides`` win over the file."""
    parser = _read(path)
    run = parser["run"] if parser.has_section("run") else {}
    scale = scale or run.get("scale", "full")
    base = {}
    if "seed" in run:
        base["seed"] = _parse_value("seed", run["seed"], "int")
    out = []
    for name in parser.sections():
        if not name.startswith("experiment."):
            if name not in ("run", "loopback"):
                raise ConfigError(f"unknown section [{name}]")
            continue
        exp = name[len("experiment."):]
        values = {**preset(exp, scale), **base, **section_overrides(parser[name])}
        values.update({k: v for k, v in overrides.items() if v is not None})
        out.append(ExperimentConfig(exp, **values))
    if not out:
        raise ConfigError(f"{path}: no [experiment.<id>] sections")
    return out


def load_loopback(path):
    """``(LoopbackConfig, snr_db, seed)`` from the ``[loopback]`` section."""
    parser = _read(path)
    if not parser.has_section("loopback"):
        raise ConfigError(f"{path}: no [loopback] section")
    sec = dict(parser["loopback"])
    snr_db = float(sec.pop("snr_db", 20.0))
    seed = int(sec.pop("seed", 1))
    types = {f.name: f.type for f in dataclasses.fields(LoopbackConfig)}
    kwargs = {}
    for key, text in sec.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r} in [loopback]")
        kwargs[key] = _parse_value(key, text, types[key])
    try:
        return LoopbackConfig(**kwargs), snr_db, seed
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
