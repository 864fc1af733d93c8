"""Grid configuration file (YAML or JSON) with presets and overrides.

Schema (every section and key optional; defaults reproduce the full protocol)::

    grid:      {dimensions: [2, 3, 5, 10, 20, 40], seeds: [1, ..., 10],
                strategies: [random, obl, oblesa], optimizers: [de, egwo],
                parallelism: 1}
    suite:     {functions: [...], instances: [1, 2, 3],
                target_precision: 1.0e-8, budget_multiplier: 10000}
    init:      {n_pop: 100}
    esa:       {k: null, sigma: null, n_steps: 1000, alpha: 0.01,
                delta: 1.0e-6, relative_step: true, exact_knn: null}
    optimizer: {max_iterations: 500, de_f: 0.5, de_cr: 0.7, de_retries: 10}

Precedence, lowest first: defaults, preset, file, ``OBLESA_*`` environment
variables, ``--set`` overrides. An environment variable names a key with a
double underscore between section and field, e.g. ``OBLESA_GRID__SEEDS="[1, 2]"``.
"""

from __future__ import annotations

import copy
import os
import re
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import yaml

from .benchmarks import SuiteConfig
from .esa import EsaParams
from .harness import GridConfig
from .optim import OptimizerConfig

ENV_PREFIX = "OBLESA_"

DESK_FUNCTIONS = ["sphere", "ellipsoid", "rastrigin", "rosenbrock", "schaffers_f7"]

PRESETS: dict[str, dict] = {
    "full": {},
    "desk": {
        "grid": {"dimensions": [2, 5, 10], "seeds": [1, 2, 3]},
        "suite": {"functions": DESK_FUNCTIONS},
    },
}

SECTIONS = {
    "grid": ("dimensions", "seeds", "strategies", "optimizers", "parallelism"),
    "suite": tuple(f.name for f in fields(SuiteConfig)),
    "init": ("n_pop",),
    "esa": tuple(f.name for f in fields(EsaParams)),
    "optimizer": ("max_iterations", "de_f", "de_cr", "de_retries"),
}


class ConfigError(ValueError):
    pass


# YAML 1.1 reads "1e-8" as a string
_FLOAT_RE = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+$")


def _coerce(value):
    if isinstance(value, str) and _FLOAT_RE.match(value.strip()):
        return float(value)
    if isinstance(value, list):
        return [_coerce(v) for v in value]
    return value


def _merge(base: dict, extra: Mapping) -> dict:
    out = copy.deepcopy(base)
    for section, values in (extra or {}).items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, Mapping):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in values.items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            out.setdefault(section, {})[key] = _coerce(value)
    return out


def _override(raw: dict, dotted: str, text: str) -> dict:
    try:
        section, key = dotted.split(".", 1)
    except ValueError:
        raise ConfigError(f"override {dotted!r} must look like section.key") from None
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value for {dotted}: {exc}") from None
    return _merge(raw, {section: {key: value}})


def load_raw(
    path: Optional[str | Path] = None,
    preset: Optional[str] = None,
    overrides: Sequence[str] = (),
    environ: Optional[Mapping[str, str]] = None,
) -> dict:
    raw: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        raw = _merge(raw, PRESETS[preset])
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        raw = _merge(raw, data)
    environ = os.environ if environ is None else environ
    for name in sorted(environ):
        if name.startswith(ENV_PREFIX) and "__" in name:
            section, key = name[len(ENV_PREFIX):].lower().split("__", 1)
            raw = _override(raw, f"{section}.{key}", environ[name])
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must be key=value")
        dotted, text = item.split("=", 1)
        raw = _override(raw, dotted.strip(), text)
    return raw


def build(raw: Mapping) -> GridConfig:
    try:
        grid = dict(raw.get("grid", {}))
        suite_cfg = SuiteConfig(**raw.get("suite", {}))
        esa = EsaParams(**raw.get("esa", {}))
        opt = OptimizerConfig(**raw.get("optimizer", {}))
        return GridConfig(
            suite=suite_cfg,
            esa=esa,
            optimizer=opt,
            n_pop=raw.get("init", {}).get("n_pop", 100),
            **grid,
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, preset=None, overrides=(), environ=None) -> GridConfig:
    return build(load_raw(path, preset, overrides, environ))


def resolved(cfg: GridConfig) -> dict[str, Any]:
    """Plain-data echo of every setting, suitable for the run manifest."""
    opt = {k: getattr(cfg.optimizer, k) for k in SECTIONS["optimizer"]}
    return {
        "grid": {
            "dimensions": list(cfg.dimensions),
            "seeds": list(cfg.seeds),
            "strategies": [s.value for s in cfg.strategies],
            "optimizers": [a.value for a in cfg.optimizers],
            "parallelism": cfg.parallelism,
        },
        "suite": asdict(cfg.suite),
        "init": {"n_pop": cfg.n_pop},
        "esa": asdict(cfg.esa),
        "optimizer": opt,
    }
