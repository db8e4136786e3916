"""Experiment configuration: flat TOML files validated into a dataclass.

Config files are flat key/value TOML (no tables). Every experiment has its
own set of recognized keys; unknown keys are rejected with the offending key
named, so typos fail loudly instead of silently using a default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

try:  # Python 3.11+
    import tomllib
except ImportError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .errors import ConfigError

__all__ = [
    "ExperimentConfig",
    "EXPERIMENTS",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "apply_overrides",
    "default_config",
]

EXPERIMENTS = (
    "poly1d",
    "poly2d",
    "poly4d",
    "flow",
    "theoremC",
    "heat",
    "black_scholes",
    "mnist",
)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    # shared training knobs
    widths: tuple[int, ...] | None = None
    activation: str = "tanh"
    loss: str = "squared_error"
    optimizer: str = "adam"
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 2000
    batch: int = 100
    dataset_size: int = 10000
    seeds: tuple[int, ...] = (0,)
    ema_alpha: float = 0.95
    output_dir: str = "runs"
    record_every: int = 100
    workers: int = 0  # 0 = one worker per available core
    # polynomial targets (poly*/flow/theoremC); None = experiment default
    target: str | None = None
    domain_radius: float = 1.0
    # gradient-flow integration
    integrator: str = "rkf45"
    horizon: float = 10.0
    step_size: float = 0.01
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    h_init: float = 1e-2
    h_min: float = 1e-10
    h_max: float = 1.0
    warm_start_j: float = 0.0  # > 0: initialize from the power-unit builder
    grad_eps: float = 1e-6
    norm_growth_factor: float = 1.5
    tail_fraction: float = 0.5
    # builder sweep
    js: tuple[float, ...] = (10.0, 100.0, 1000.0)
    grid_points: int = 1001
    # terminal-value regression (heat / black_scholes)
    dim: int = 2
    rate: float = 0.05
    carry: float = 0.01
    strike: float = 100.0
    sigmas: tuple[float, ...] | None = None
    box_lo: float | None = None
    box_hi: float | None = None
    eval_points: int = 1024
    mc_rounds: int = 8
    mc_paths: int = 4096
    # image classification
    images_path: str | None = None
    labels_path: str | None = None
    test_images_path: str | None = None
    test_labels_path: str | None = None
    subsample: int = 0  # 0 = use every row
    checkpoint_every: int = 500


_TRAIN_KEYS = {
    "widths",
    "activation",
    "loss",
    "optimizer",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "steps",
    "batch",
    "seeds",
    "ema_alpha",
    "output_dir",
    "record_every",
    "workers",
}

_POLY_KEYS = _TRAIN_KEYS | {"dataset_size", "target", "domain_radius"}

_FLOW_KEYS = {
    "widths",
    "activation",
    "loss",
    "target",
    "domain_radius",
    "dataset_size",
    "seeds",
    "output_dir",
    "record_every",
    "workers",
    "integrator",
    "horizon",
    "step_size",
    "rel_tol",
    "abs_tol",
    "h_init",
    "h_min",
    "h_max",
    "warm_start_j",
    "grad_eps",
    "norm_growth_factor",
    "tail_fraction",
}

_SWEEP_KEYS = {
    "widths",
    "activation",
    "target",
    "domain_radius",
    "js",
    "grid_points",
    "output_dir",
}

_HEAT_KEYS = _TRAIN_KEYS | {"dim", "horizon", "box_lo", "box_hi", "eval_points"}

_BS_KEYS = _HEAT_KEYS | {"rate", "carry", "strike", "sigmas", "mc_rounds", "mc_paths"}

_MNIST_KEYS = _TRAIN_KEYS | {
    "images_path",
    "labels_path",
    "test_images_path",
    "test_labels_path",
    "subsample",
    "checkpoint_every",
}

_ALLOWED = {
    "poly1d": _POLY_KEYS,
    "poly2d": _POLY_KEYS,
    "poly4d": _POLY_KEYS,
    "flow": _FLOW_KEYS,
    "theoremC": _SWEEP_KEYS,
    "heat": _HEAT_KEYS,
    "black_scholes": _BS_KEYS,
    "mnist": _MNIST_KEYS,
}

_DEFAULTS: dict[str, dict] = {
    "poly1d": {"widths": (1, 10, 20, 10, 1), "seeds": tuple(range(20))},
    "poly2d": {"widths": (2, 20, 40, 20, 1), "seeds": tuple(range(20))},
    "poly4d": {"widths": (4, 20, 40, 20, 1), "seeds": tuple(range(20))},
    "flow": {
        "widths": (1, 4, 1),
        "dataset_size": 32,
        "record_every": 10,
    },
    "theoremC": {},
    "heat": {
        "activation": "gelu",
        "lr": 5e-3,
        "steps": 5000,
        "batch": 256,
        "dim": 2,
        "horizon": 1.0,
    },
    "black_scholes": {
        "activation": "gelu",
        "lr": 5e-3,
        "steps": 2000,
        "batch": 256,
        "dim": 1,
        "horizon": 1.0,
        "eval_points": 64,
    },
    "mnist": {
        "widths": (784, 64, 64, 10),
        "loss": "cross_entropy_softmax",
        "lr": 1e-3,
        "steps": 3000,
        "batch": 128,
        "subsample": 2000,
        "record_every": 50,
    },
}

_INT_KEYS = {
    "steps",
    "batch",
    "dataset_size",
    "record_every",
    "workers",
    "grid_points",
    "dim",
    "eval_points",
    "mc_rounds",
    "mc_paths",
    "subsample",
    "checkpoint_every",
}
_FLOAT_KEYS = {
    "lr",
    "beta1",
    "beta2",
    "eps",
    "ema_alpha",
    "domain_radius",
    "horizon",
    "step_size",
    "rel_tol",
    "abs_tol",
    "h_init",
    "h_min",
    "h_max",
    "warm_start_j",
    "grad_eps",
    "norm_growth_factor",
    "tail_fraction",
    "rate",
    "carry",
    "strike",
    "box_lo",
    "box_hi",
}
_STR_KEYS = {
    "experiment",
    "activation",
    "loss",
    "optimizer",
    "output_dir",
    "integrator",
    "target",
    "images_path",
    "labels_path",
    "test_images_path",
    "test_labels_path",
}
_INT_LIST_KEYS = {"widths", "seeds"}
_FLOAT_LIST_KEYS = {"js", "sigmas"}


def _coerce(key: str, value):
    """Type-check one key; ints promote to floats where a float is expected."""
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key '{key}' must be an integer, got {value!r}")
        return int(value)
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key '{key}' must be a number, got {value!r}")
        return float(value)
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"key '{key}' must be a string, got {value!r}")
        return value
    if key in _INT_LIST_KEYS:
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(f"key '{key}' must be a non-empty list of integers")
        out = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, int):
                raise ConfigError(f"key '{key}' must contain only integers, got {item!r}")
            out.append(int(item))
        return tuple(out)
    if key in _FLOAT_LIST_KEYS:
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(f"key '{key}' must be a non-empty list of numbers")
        out = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(f"key '{key}' must contain only numbers, got {item!r}")
            out.append(float(item))
        return tuple(out)
    raise ConfigError(f"unknown key '{key}'")  # pragma: no cover - guarded upstream


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    def positive(name: str, value: float) -> None:
        if not value > 0:
            raise ConfigError(f"key '{name}' must be positive, got {value}")

    if cfg.widths is not None:
        if len(cfg.widths) < 2 or any(w < 1 for w in cfg.widths):
            raise ConfigError(f"key 'widths' needs >= 2 positive entries, got {cfg.widths}")
    if cfg.optimizer not in ("sgd", "adam"):
        raise ConfigError(f"key 'optimizer' must be 'sgd' or 'adam', got {cfg.optimizer!r}")
    if cfg.integrator not in ("euler", "rk4", "rkf45"):
        raise ConfigError(
            f"key 'integrator' must be one of euler/rk4/rkf45, got {cfg.integrator!r}"
        )
    positive("lr", cfg.lr)
    for name in ("beta1", "beta2"):
        value = getattr(cfg, name)
        if not 0.0 <= value < 1.0:
            raise ConfigError(f"key '{name}' must lie in [0,1), got {value}")
    positive("eps", cfg.eps)
    if cfg.steps < 0:
        raise ConfigError(f"key 'steps' must be >= 0, got {cfg.steps}")
    positive("batch", cfg.batch)
    positive("dataset_size", cfg.dataset_size)
    if any(s < 0 for s in cfg.seeds):
        raise ConfigError(f"key 'seeds' must be nonnegative, got {cfg.seeds}")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigError(f"key 'seeds' has duplicates: {cfg.seeds}")
    if not 0.0 < cfg.ema_alpha < 1.0:
        raise ConfigError(f"key 'ema_alpha' must lie in (0,1), got {cfg.ema_alpha}")
    positive("record_every", cfg.record_every)
    if cfg.workers < 0:
        raise ConfigError(f"key 'workers' must be >= 0, got {cfg.workers}")
    positive("domain_radius", cfg.domain_radius)
    positive("horizon", cfg.horizon)
    positive("step_size", cfg.step_size)
    for name in ("rel_tol", "abs_tol", "h_init", "h_min", "h_max"):
        positive(name, getattr(cfg, name))
    if cfg.warm_start_j < 0:
        raise ConfigError(f"key 'warm_start_j' must be >= 0, got {cfg.warm_start_j}")
    positive("grad_eps", cfg.grad_eps)
    if not cfg.norm_growth_factor > 1.0:
        raise ConfigError(
            f"key 'norm_growth_factor' must exceed 1, got {cfg.norm_growth_factor}"
        )
    if not 0.0 < cfg.tail_fraction <= 1.0:
        raise ConfigError(f"key 'tail_fraction' must lie in (0,1], got {cfg.tail_fraction}")
    if any(j <= 0 for j in cfg.js):
        raise ConfigError(f"key 'js' must be positive, got {cfg.js}")
    positive("grid_points", cfg.grid_points)
    positive("dim", cfg.dim)
    if cfg.strike < 0:
        raise ConfigError(f"key 'strike' must be >= 0, got {cfg.strike}")
    if cfg.sigmas is not None and any(s <= 0 for s in cfg.sigmas):
        raise ConfigError(f"key 'sigmas' must be positive, got {cfg.sigmas}")
    if (cfg.box_lo is None) != (cfg.box_hi is None):
        raise ConfigError("keys 'box_lo' and 'box_hi' must be given together")
    if cfg.box_lo is not None and not cfg.box_lo < cfg.box_hi:
        raise ConfigError(f"key 'box_lo' must be < 'box_hi', got [{cfg.box_lo}, {cfg.box_hi}]")
    positive("eval_points", cfg.eval_points)
    positive("mc_rounds", cfg.mc_rounds)
    positive("mc_paths", cfg.mc_paths)
    if cfg.subsample < 0:
        raise ConfigError(f"key 'subsample' must be >= 0, got {cfg.subsample}")
    positive("checkpoint_every", cfg.checkpoint_every)
    return cfg


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a flat mapping (parsed TOML) into an ExperimentConfig."""
    if "experiment" not in raw:
        raise ConfigError("missing required key 'experiment'")
    experiment = raw["experiment"]
    if not isinstance(experiment, str) or experiment not in EXPERIMENTS:
        raise ConfigError(
            f"key 'experiment' must be one of {'/'.join(EXPERIMENTS)}, got {experiment!r}"
        )
    allowed = _ALLOWED[experiment]
    values = dict(_DEFAULTS[experiment])
    for key, value in raw.items():
        if key == "experiment":
            continue
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' for experiment '{experiment}'")
        values[key] = _coerce(key, value)
    return _validate(ExperimentConfig(experiment=experiment, **values))


def default_config(experiment: str) -> ExperimentConfig:
    return config_from_dict({"experiment": experiment})


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Parse a flat TOML file into a validated ExperimentConfig."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ConfigError(f"key '{key}': nested tables are not supported (flat keys only)")
    return config_from_dict(raw)


def apply_overrides(
    cfg: ExperimentConfig,
    seed: int | None = None,
    steps: int | None = None,
    out: str | None = None,
) -> ExperimentConfig:
    """Apply the command-line overrides; each one replaces its config field."""
    updates: dict = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed override must be >= 0, got {seed}")
        updates["seeds"] = (int(seed),)
    if steps is not None:
        if steps < 0:
            raise ConfigError(f"steps override must be >= 0, got {steps}")
        updates["steps"] = int(steps)
    if out is not None:
        updates["output_dir"] = out
    if not updates:
        return cfg
    return _validate(replace(cfg, **updates))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-ready echo of every field (tuples become lists)."""
    out: dict = {}
    for field in fields(cfg):
        value = getattr(cfg, field.name)
        if isinstance(value, tuple):
            value = list(value)
        out[field.name] = value
    return out
