"""Self-contained SVG plots of training metrics and flow trajectories.

Reads the CSV schemas produced by the runners (training metrics keyed by
``step``, flow trajectories keyed by ``t``), averages curves pointwise across
seeds, and writes plain-text SVG with no external assets: one log-scale loss
panel and one linear parameter-norm panel per call.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

from .errors import SchemaMismatch

__all__ = ["read_curve_csv", "average_runs", "render_svg", "emit_plots"]

_METRICS_HEADER = ["step", "loss", "ema_loss", "theta_norm", "grad_norm", "seed"]
_TRAJECTORY_HEADER = ["t", "loss", "theta_norm", "grad_norm", "norm_grad_product"]

_WIDTH, _HEIGHT = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 50  # margins
_PW, _PH = _WIDTH - _ML - _MR, _HEIGHT - _MT - _MB
_PALETTE = ("#1f6feb", "#d1242f", "#1a7f37", "#8250df", "#bf8700", "#0598a8")


def read_curve_csv(path: str | Path) -> tuple[str, list[float], dict[str, list[float]]]:
    """Read one run CSV; returns (x column name, x values, column -> values)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path} is empty")
    header = rows[0]
    if header == _METRICS_HEADER:
        x_name = "step"
    elif header == _TRAJECTORY_HEADER:
        x_name = "t"
    else:
        raise SchemaMismatch(f"{path} header {header} matches no known schema")
    body = rows[1:]
    if not body:
        raise SchemaMismatch(f"{path} has a header but no data rows")
    columns: dict[str, list[float]] = {name: [] for name in header}
    for line_no, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise SchemaMismatch(f"{path}:{line_no} has {len(row)} fields, expected {len(header)}")
        for name, cell in zip(header, row):
            try:
                columns[name].append(float(cell))
            except ValueError as exc:
                raise SchemaMismatch(f"{path}:{line_no} bad value {cell!r} in '{name}'") from exc
    return x_name, columns[x_name], columns


def average_runs(runs: Sequence[tuple[list[float], list[float]]]) -> tuple[list[float], list[float]]:
    """Pointwise mean of several (xs, ys) runs sharing the same x grid."""
    if not runs:
        raise SchemaMismatch("no runs to average")
    xs0 = runs[0][0]
    for xs, ys in runs:
        if xs != xs0:
            raise SchemaMismatch("runs disagree on their x grids; cannot average pointwise")
        if len(ys) != len(xs0):
            raise SchemaMismatch("run has mismatched column lengths")
    n = len(runs)
    mean = [sum(run[1][i] for run in runs) / n for i in range(len(xs0))]
    return list(xs0), mean


def _spread(lo: float, hi: float) -> tuple[float, float]:
    if hi > lo:
        return lo, hi
    pad = max(abs(lo), 1.0) * 0.5
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def render_svg(
    series: dict[str, tuple[list[float], list[float]]],
    *,
    title: str,
    x_label: str,
    y_label: str,
    log_y: bool = False,
) -> str:
    """Render labelled curves as one standalone SVG document."""
    if not series:
        raise SchemaMismatch("no series to plot")
    for label, (xs, ys) in series.items():
        if not xs or len(xs) != len(ys):
            raise SchemaMismatch(f"series {label!r} is empty or ragged")

    def ty(value: float) -> float:
        return math.log10(value) if log_y else value

    if log_y:
        positive = [y for _, (_, ys) in series.items() for y in ys if y > 0]
        if not positive:
            raise SchemaMismatch("log-scale plot needs at least one positive value")
        floor = min(positive)
        series = {
            label: (xs, [y if y > 0 else floor for y in ys])
            for label, (xs, ys) in series.items()
        }

    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [ty(y) for _, ys in series.values() for y in ys]
    x_lo, x_hi = _spread(min(all_x), max(all_x))
    y_lo, y_hi = _spread(min(all_y), max(all_y))

    def px(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * _PW

    def py(y: float) -> float:
        return _MT + (1.0 - (ty(y) - y_lo) / (y_hi - y_lo)) * _PH

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:g}" y="24" font-size="15" text-anchor="middle" '
        f'font-family="sans-serif">{title}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{_PW}" height="{_PH}" fill="none" '
        f'stroke="#444" stroke-width="1"/>',
    ]
    for tick in _ticks(x_lo, x_hi):
        x = px(tick)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_MT + _PH}" x2="{x:.2f}" y2="{_MT + _PH + 5}" '
            f'stroke="#444"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{_MT + _PH + 18}" font-size="11" text-anchor="middle" '
            f'font-family="sans-serif">{tick:.4g}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        y = _MT + (1.0 - (tick - y_lo) / (y_hi - y_lo)) * _PH
        label = f"1e{tick:.2g}" if log_y else f"{tick:.4g}"
        parts.append(f'<line x1="{_ML - 5}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" stroke="#444"/>')
        parts.append(
            f'<text x="{_ML - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end" '
            f'font-family="sans-serif">{label}</text>'
        )
    parts.append(
        f'<text x="{_ML + _PW / 2:g}" y="{_HEIGHT - 12}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif">{x_label}</text>'
    )
    parts.append(
        f'<text x="14" y="{_MT - 12}" font-size="12" font-family="sans-serif">{y_label}</text>'
    )
    for idx, (label, (xs, ys)) in enumerate(sorted(series.items())):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        legend_y = _MT + 16 + 16 * idx
        parts.append(
            f'<line x1="{_ML + _PW - 120}" y1="{legend_y - 4}" x2="{_ML + _PW - 100}" '
            f'y2="{legend_y - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_ML + _PW - 94}" y="{legend_y}" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def _run_label(path: Path) -> str:
    stem = path.stem
    marker = stem.rfind("_seed")
    return stem[:marker] if marker > 0 else stem


def emit_plots(
    csv_paths: Sequence[str | Path],
    out_dir: str | Path,
    stem: str = "curves",
) -> dict[str, Path]:
    """Write a log-scale loss SVG and a linear theta-norm SVG for the runs.

    Files whose names share a prefix before ``_seed`` form one curve: their
    columns are averaged pointwise across seeds.
    """
    if not csv_paths:
        raise SchemaMismatch("no metrics CSVs supplied")
    grouped: dict[str, list[tuple[str, list[float], dict[str, list[float]]]]] = {}
    for path in csv_paths:
        path = Path(path)
        grouped.setdefault(_run_label(path), []).append(read_curve_csv(path))
    x_names = {run[0] for runs in grouped.values() for run in runs}
    if len(x_names) != 1:
        raise SchemaMismatch(f"mixed x columns {sorted(x_names)}; plot one schema at a time")
    x_label = x_names.pop()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for column, log_y, title in (
        ("loss", True, "loss (log scale)"),
        ("theta_norm", False, "parameter norm"),
    ):
        series = {
            label: average_runs([(xs, cols[column]) for _, xs, cols in runs])
            for label, runs in grouped.items()
        }
        svg = render_svg(series, title=title, x_label=x_label, y_label=column, log_y=log_y)
        path = out_dir / f"{stem}_{column}.svg"
        path.write_text(svg)
        written[column] = path
    return written
