#!/usr/bin/env python3
"""Run a quick desk-scale pass of every experiment.

Each experiment is run with deliberately small step counts and horizons so the
whole sweep finishes in a couple of minutes on a laptop.  The example configs
in scripts/configs/ carry the full-scale settings; this script overrides the
expensive knobs and leaves everything else alone.

Synthetic image data is generated on first use (see make_synthetic_mnist.py),
so the script has no external data dependencies.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

SCRIPTS_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(SCRIPTS_DIR))

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from make_synthetic_mnist import write_dataset  # noqa: E402

from gradflow import config_from_dict, run_experiment  # noqa: E402

# Overrides that shrink each experiment to desk scale.  Keys absent here keep
# the values from the example config.
DESK_OVERRIDES = {
    "poly1d": {"steps": 300, "dataset_size": 2000, "seeds": [0, 1], "record_every": 50},
    "poly2d": {"steps": 300, "dataset_size": 2000, "seeds": [0], "record_every": 50},
    "poly4d": {"steps": 300, "dataset_size": 2000, "seeds": [0], "record_every": 50},
    "flow": {"horizon": 5.0, "dataset_size": 16},
    "theoremC": {"js": [10.0, 100.0], "grid_points": 401},
    "heat": {"steps": 400, "eval_points": 256, "record_every": 50},
    "black_scholes": {
        "steps": 300,
        "eval_points": 16,
        "mc_rounds": 4,
        "mc_paths": 1024,
        "record_every": 50,
    },
    "mnist": {"steps": 300, "subsample": 500, "record_every": 50, "checkpoint_every": 150},
}


def ensure_synthetic_images(data_dir: Path) -> None:
    wanted = [
        "train-images.idx",
        "train-labels.idx",
        "test-images.idx",
        "test-labels.idx",
    ]
    if all((data_dir / name).exists() for name in wanted):
        return
    print(f"generating synthetic image data in {data_dir} ...")
    write_dataset(data_dir, train=2500, test=500, side=28, seed=0)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        type=Path,
        default=Path("runs/desk"),
        help="root directory for run outputs (default: runs/desk)",
    )
    parser.add_argument(
        "--only",
        nargs="*",
        default=None,
        help="subset of experiments to run (default: all)",
    )
    args = parser.parse_args(argv)

    ensure_synthetic_images(Path("data/synthetic"))

    names = list(DESK_OVERRIDES) if args.only is None else list(args.only)
    failures = []
    for name in names:
        cfg_path = SCRIPTS_DIR / "configs" / f"{name}.toml"
        with open(cfg_path, "rb") as fh:
            raw = tomllib.load(fh)
        raw.update(DESK_OVERRIDES[name])
        raw["output_dir"] = str(args.out / name)
        cfg = config_from_dict(raw)
        print(f"== {name} ==")
        start = time.monotonic()
        try:
            result = run_experiment(cfg)
        except Exception as exc:  # keep going; report at the end
            print(f"   FAILED: {type(exc).__name__}: {exc}")
            failures.append(name)
            continue
        elapsed = time.monotonic() - start
        summary_keys = [
            "verdict",
            "final_loss",
            "final_ema_loss",
            "relative_mse",
            "final_accuracy",
            "norm_ratio",
            "j",
            "sup_error",
        ]
        # Runners return per-seed/per-record lists under different keys.
        records = (
            result.get("per_seed")
            or result.get("verdicts")
            or result.get("evals")
            or result.get("reports")
            or result.get("records")
            or []
        )
        summary = records[0] if records else {}
        shown = {k: summary[k] for k in summary_keys if k in summary}
        print(f"   done in {elapsed:.1f}s  {json.dumps(shown, default=str)}")
    if failures:
        print(f"failed: {', '.join(failures)}")
        return 1
    print("all experiments completed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
