"""Minimal standalone SVG line charts (no plotting dependency).

Each chart is a fixed-size canvas with labeled axes and one ``<polyline>``
per data series, so series counts are directly checkable in the output.
Long series are downsampled to a bounded number of vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WIDTH, HEIGHT = 860, 520
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50
MAX_POINTS = 2048
COLORS = ("#1f77b4", "#d62728", "#2ca02c")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _downsample(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    if n <= MAX_POINTS:
        return x, y
    idx = np.linspace(0, n - 1, MAX_POINTS).astype(int)
    return x[idx], y[idx]


def write_line_chart(
    path: str,
    series: list[Series],
    title: str,
    xlabel: str,
    ylabel: str,
) -> None:
    """Write one chart; raises ValueError on empty input, OSError on I/O."""
    if not series:
        raise ValueError("need at least one series")
    xs = np.concatenate([s.x for s in series]).astype(float)
    ys = np.concatenate([s.y for s in series]).astype(float)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v: np.ndarray) -> np.ndarray:
        return MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: np.ndarray) -> np.ndarray:
        return HEIGHT - MARGIN_B - (v - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        # Axes as plain lines so polyline elements are data series only.
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<text x="{MARGIN_L + plot_w / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{xlabel}</text>',
        f'<text x="18" y="{MARGIN_T + plot_h / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_T + plot_h / 2})">{ylabel}</text>',
    ]
    for k in range(5):
        xv = x_lo + k * (x_hi - x_lo) / 4
        yv = y_lo + k * (y_hi - y_lo) / 4
        px, py = float(sx(np.array(xv))), float(sy(np.array(yv)))
        parts.append(
            f'<text x="{_fmt(px)}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(xv)}</text>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(yv)}</text>'
        )
    for k, s in enumerate(series):
        x, y = _downsample(np.asarray(s.x, float), np.asarray(s.y, float))
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx(x), sy(y)))
        color = COLORS[k % len(COLORS)]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_R - 6}" y="{MARGIN_T + 16 + 16 * k}" '
            f'text-anchor="end" font-family="sans-serif" font-size="12" '
            f'fill="{color}">{s.label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
