"""Minimal native SVG line plots: axes, polylines, optional log y scale.

No rendering dependency; output is deterministic for identical input.
"""

from __future__ import annotations

import numpy as np

__all__ = ["polyline_plot"]

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a",
)

_MARGIN = 60.0
_WIDTH = 800.0
_HEIGHT = 500.0


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def polyline_plot(
    series: list[tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_y: bool = False,
) -> str:
    """Render labelled (x, y) series as one SVG polyline each."""
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    if log_y:
        if np.any(ys <= 0):
            raise ValueError("log scale needs positive y values")
        ys = np.log10(ys)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    inner_w = _WIDTH - 2 * _MARGIN
    inner_h = _HEIGHT - 2 * _MARGIN

    def px(x: float) -> float:
        return _MARGIN + (x - x_lo) / x_span * inner_w

    def py(y: float) -> float:
        return _HEIGHT - _MARGIN - (y - y_lo) / y_span * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(_WIDTH)}" '
        f'height="{_fmt(_HEIGHT)}" viewBox="0 0 {_fmt(_WIDTH)} {_fmt(_HEIGHT)}">',
        f'<rect width="{_fmt(_WIDTH)}" height="{_fmt(_HEIGHT)}" fill="white"/>',
        f'<line x1="{_fmt(_MARGIN)}" y1="{_fmt(_HEIGHT - _MARGIN)}" '
        f'x2="{_fmt(_WIDTH - _MARGIN)}" y2="{_fmt(_HEIGHT - _MARGIN)}" stroke="black"/>',
        f'<line x1="{_fmt(_MARGIN)}" y1="{_fmt(_MARGIN)}" '
        f'x2="{_fmt(_MARGIN)}" y2="{_fmt(_HEIGHT - _MARGIN)}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x_val = x_lo + frac * x_span
        y_val = y_lo + frac * y_span
        parts.append(
            f'<text x="{_fmt(px(x_val))}" y="{_fmt(_HEIGHT - _MARGIN + 20)}" '
            f'font-size="11" text-anchor="middle">{_fmt(x_val)}</text>'
        )
        label = 10.0**y_val if log_y else y_val
        parts.append(
            f'<text x="{_fmt(_MARGIN - 8)}" y="{_fmt(py(y_val) + 4)}" '
            f'font-size="11" text-anchor="end">{_fmt(label)}</text>'
        )
    if title:
        parts.append(
            f'<text x="{_fmt(_WIDTH / 2)}" y="24" font-size="14" '
            f'text-anchor="middle">{title}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{_fmt(_WIDTH / 2)}" y="{_fmt(_HEIGHT - 12)}" font-size="12" '
            f'text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="16" y="{_fmt(_HEIGHT / 2)}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 16 {_fmt(_HEIGHT / 2)})">{y_label}</text>'
        )

    for n, (label, sx, sy) in enumerate(series):
        sx = np.asarray(sx, dtype=float)
        sy = np.asarray(sy, dtype=float)
        if log_y:
            sy = np.log10(sy)
        color = _PALETTE[n % len(_PALETTE)]
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(sx, sy))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        legend_y = _MARGIN + 16 * n
        parts.append(
            f'<line x1="{_fmt(_WIDTH - _MARGIN - 110)}" y1="{_fmt(legend_y)}" '
            f'x2="{_fmt(_WIDTH - _MARGIN - 90)}" y2="{_fmt(legend_y)}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_fmt(_WIDTH - _MARGIN - 84)}" y="{_fmt(legend_y + 4)}" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
