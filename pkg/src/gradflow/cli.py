"""Command line: ``gfl <experiment> --config <path> [--seed N --steps N --out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 anticipated numeric failure.
``--config -`` reads the TOML from stdin; ``--out -`` streams the primary CSV
to stdout so runs compose in shell pipelines.
"""

from __future__ import annotations

import argparse
import json
import sys

try:  # Python 3.11+
    import tomllib
except ImportError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .config import EXPERIMENTS, apply_overrides, config_from_dict, load_config
from .errors import ConfigError, GradflowError
from .experiments import run_experiment

__all__ = ["build_parser", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfl",
        description="Run a gradient-flow / training experiment from a flat TOML config.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS, help="which experiment to run")
    parser.add_argument(
        "--config",
        required=True,
        help="path to a flat TOML config file, or '-' to read it from stdin",
    )
    parser.add_argument("--seed", type=int, default=None, help="run only this seed")
    parser.add_argument("--steps", type=int, default=None, help="override the step count")
    parser.add_argument(
        "--out",
        default=None,
        help="override the output directory; '-' streams the primary CSV to stdout",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config == "-":
            try:
                raw = tomllib.loads(sys.stdin.read())
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"stdin is not valid TOML: {exc}") from exc
            raw.setdefault("experiment", args.experiment)
            cfg = config_from_dict(raw)
        else:
            cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                f"config declares experiment '{cfg.experiment}' "
                f"but the command line asked for '{args.experiment}'"
            )
        cfg = apply_overrides(cfg, seed=args.seed, steps=args.steps, out=args.out)
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"gfl: config error: {exc}", file=sys.stderr)
        return 2
    except GradflowError as exc:
        print(f"gfl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if "csv" in result:
        sys.stdout.write(result["csv"])
    else:
        json.dump(result, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
