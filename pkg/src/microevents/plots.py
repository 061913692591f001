"""Minimal deterministic SVG plotting (forest plots, curves, CI scatters).

Hand-rolled so that identical inputs produce byte-identical files; no
timestamps or library version strings end up in the output.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

_W, _H = 640, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 150, 30, 40, 50


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _svg_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]


def _x_scale(lo: float, hi: float, log: bool = False):
    span_px = _W - _MARGIN_L - _MARGIN_R
    if log:
        llo, lhi = math.log(lo), math.log(hi)

        def scale(v: float) -> float:
            return _MARGIN_L + (math.log(v) - llo) / (lhi - llo) * span_px
    else:
        def scale(v: float) -> float:
            return _MARGIN_L + (v - lo) / (hi - lo) * span_px

    return scale


def forest_plot_svg(
    rows: Sequence[tuple[str, float, float, float]],
    title: str,
    reference: float = 1.0,
    log_x: bool = True,
) -> str:
    """Point estimates with CI whiskers per labeled row; a vertical line
    marks the neutral reference value."""
    values = [v for _, v, lo, hi in rows for v in (v, lo, hi)]
    floor = 1e-6 if log_x else -math.inf
    x_lo = max(min(values + [reference]) * (0.8 if log_x else 1.0) - (0 if log_x else 0.2), floor)
    x_hi = max(values + [reference]) * (1.25 if log_x else 1.0) + (0 if log_x else 0.2)
    scale = _x_scale(x_lo, x_hi, log=log_x)
    row_h = (_H - _MARGIN_T - _MARGIN_B) / max(len(rows), 1)

    parts = _svg_header(title)
    ref_x = scale(reference)
    parts.append(
        f'<line x1="{ref_x:.1f}" y1="{_MARGIN_T}" x2="{ref_x:.1f}" y2="{_H - _MARGIN_B}" '
        'stroke="#999" stroke-dasharray="4,3"/>'
    )
    for i, (label, value, lo, hi) in enumerate(rows):
        y = _MARGIN_T + (i + 0.5) * row_h
        x1, x2, xv = scale(max(lo, x_lo)), scale(min(hi, x_hi)), scale(value)
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{y + 4:.1f}" text-anchor="end">{label}</text>')
        parts.append(f'<line x1="{x1:.1f}" y1="{y:.1f}" x2="{x2:.1f}" y2="{y:.1f}" stroke="#333"/>')
        parts.append(f'<circle cx="{xv:.1f}" cy="{y:.1f}" r="3.5" fill="#1f5fa8"/>')
    parts.append(
        f'<text x="{_MARGIN_L}" y="{_H - 18}" text-anchor="start">{_fmt(x_lo)}</text>'
        f'<text x="{_W - _MARGIN_R}" y="{_H - 18}" text-anchor="end">{_fmt(x_hi)}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def curve_svg(
    series: dict[str, Sequence[tuple[float, float]]],
    title: str,
    x_label: str,
    y_label: str,
    marked_x: Optional[float] = None,
) -> str:
    """Line chart of one or more (x, y) series."""
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_span = (max(ys) - min(ys)) or 1.0
    y_lo, y_hi = min(ys) - 0.1 * y_span, max(ys) + 0.1 * y_span
    sx = _x_scale(x_lo, x_hi)

    def sy(v: float) -> float:
        return _H - _MARGIN_B - (v - y_lo) / (y_hi - y_lo) * (_H - _MARGIN_T - _MARGIN_B)

    colors = ["#1f5fa8", "#b4552d", "#3b7d3b", "#6a4a92", "#888833"]
    parts = _svg_header(title)
    if marked_x is not None:
        mx = sx(marked_x)
        parts.append(
            f'<line x1="{mx:.1f}" y1="{_MARGIN_T}" x2="{mx:.1f}" y2="{_H - _MARGIN_B}" '
            'stroke="#999" stroke-dasharray="4,3"/>'
        )
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = colors[i % len(colors)]
        path = " ".join(f"{'M' if j == 0 else 'L'}{sx(x):.1f},{sy(y):.1f}" for j, (x, y) in enumerate(sorted(pts)))
        parts.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="2.5" fill="{color}"/>')
        parts.append(
            f'<text x="{_W - _MARGIN_R}" y="{_MARGIN_T + 14 * (i + 1)}" text-anchor="end" '
            f'fill="{color}">{name}</text>'
        )
    parts.append(f'<text x="{_W / 2:.1f}" y="{_H - 10}" text-anchor="middle">{x_label}</text>')
    parts.append(
        f'<text x="18" y="{_H / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_H / 2:.1f})">{y_label}</text>'
    )
    parts.append(f'<text x="{_MARGIN_L}" y="{_H - 32}" text-anchor="middle">{_fmt(x_lo)}</text>')
    parts.append(f'<text x="{_W - _MARGIN_R}" y="{_H - 32}" text-anchor="middle">{_fmt(x_hi)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def ci_scatter_svg(
    series: dict[str, Sequence[tuple[float, float, float, float, Optional[float]]]],
    title: str,
    x_label: str,
    y_label: str,
    alpha: float = 0.05,
) -> str:
    """Scatter of (x, y, ci_low, ci_high, p) with CI whiskers; points with
    p <= alpha are filled, the rest hollow."""
    xs = [x for pts in series.values() for x, *_ in pts]
    ys = [v for pts in series.values() for _, y, lo, hi, _ in pts for v in (y, lo, hi)]
    x_lo, x_hi = min(xs), max(xs)
    x_pad = 0.05 * ((x_hi - x_lo) or 1.0)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_span = (max(ys) - min(ys)) or 1.0
    y_lo, y_hi = min(ys) - 0.1 * y_span, max(ys) + 0.1 * y_span
    sx = _x_scale(x_lo, x_hi)

    def sy(v: float) -> float:
        return _H - _MARGIN_B - (v - y_lo) / (y_hi - y_lo) * (_H - _MARGIN_T - _MARGIN_B)

    colors = ["#1f5fa8", "#b4552d", "#3b7d3b"]
    parts = _svg_header(title)
    n_series = max(len(series), 1)
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = colors[i % len(colors)]
        jitter = (i - (n_series - 1) / 2) * 5.0
        for x, y, lo, hi, p in pts:
            cx = sx(x) + jitter
            parts.append(
                f'<line x1="{cx:.1f}" y1="{sy(lo):.1f}" x2="{cx:.1f}" y2="{sy(hi):.1f}" '
                f'stroke="{color}"/>'
            )
            significant = p is not None and p <= alpha
            fill = color if significant else "white"
            parts.append(
                f'<circle cx="{cx:.1f}" cy="{sy(y):.1f}" r="4" fill="{fill}" stroke="{color}"/>'
            )
        parts.append(
            f'<text x="{_W - _MARGIN_R}" y="{_MARGIN_T + 14 * (i + 1)}" text-anchor="end" '
            f'fill="{color}">{name}</text>'
        )
    parts.append(f'<text x="{_W / 2:.1f}" y="{_H - 10}" text-anchor="middle">{x_label}</text>')
    parts.append(
        f'<text x="18" y="{_H / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_H / 2:.1f})">{y_label}</text>'
    )
    parts.append(f'<text x="{_MARGIN_L}" y="{_H - 32}" text-anchor="middle">{_fmt(x_lo)}</text>')
    parts.append(f'<text x="{_W - _MARGIN_R}" y="{_H - 32}" text-anchor="middle">{_fmt(x_hi)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
