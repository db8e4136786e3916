#!/usr/bin/env python3
"""Generate a synthetic IDX image-classification dataset.

Ten fixed class templates (seeded block patterns) plus per-image pixel noise
give a learnable stand-in for the real handwritten-digit files, with the same
container format, shapes, and dtypes.  Useful when the real dataset cannot be
redistributed with the repository.

Usage:
    python3 scripts/make_synthetic_mnist.py --out data/synthetic \
        --train 2500 --test 500 --seed 0
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from gradflow import write_idx


def class_templates(side: int = 28, classes: int = 10, seed: int = 0) -> np.ndarray:
    """One coarse block pattern per class, upsampled to side x side."""
    coarse = side // 4
    templates = np.zeros((classes, side, side), dtype=np.uint8)
    for label in range(classes):
        rng = np.random.default_rng((seed, 100 + label))
        blocks = (rng.random((coarse, coarse)) < 0.35).astype(np.uint8) * 180
        templates[label] = np.kron(blocks, np.ones((4, 4), dtype=np.uint8))[:side, :side]
    return templates


def make_split(
    count: int, templates: np.ndarray, seed: int, tag: int
) -> tuple[np.ndarray, np.ndarray]:
    classes, side = templates.shape[0], templates.shape[1]
    rng = np.random.default_rng((seed, tag))
    labels = rng.integers(0, classes, count).astype(np.uint8)
    noise = rng.integers(0, 60, (count, side, side)).astype(np.int16)
    images = np.clip(templates[labels].astype(np.int16) + noise, 0, 255).astype(np.uint8)
    return images, labels


def write_dataset(out_dir: Path, train: int, test: int, side: int, seed: int) -> list[Path]:
    templates = class_templates(side=side, seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for tag, (count, stem) in enumerate([(train, "train"), (test, "test")], start=1):
        images, labels = make_split(count, templates, seed, tag)
        for name, array in ((f"{stem}-images.idx", images), (f"{stem}-labels.idx", labels)):
            path = out_dir / name
            path.write_bytes(write_idx(array))
            written.append(path)
    return written


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory for the four IDX files")
    parser.add_argument("--train", type=int, default=2500, help="training images")
    parser.add_argument("--test", type=int, default=500, help="test images")
    parser.add_argument("--side", type=int, default=28, help="image side length")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    written = write_dataset(Path(args.out), args.train, args.test, args.side, args.seed)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
