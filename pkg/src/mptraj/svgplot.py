"""Minimal SVG line plots (polyline + optional band), no plotting dependency.

Good enough to eyeball a trajectory or a mean with its 2-sigma tube; axes get
min/max labels only.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, ValidationError
from .fileio import atomic_write_text

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH, _HEIGHT = 640, 380
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 56, 16, 34, 40


class _Mapper:
    def __init__(self, x_low, x_high, y_low, y_high):
        if x_high <= x_low:
            x_high = x_low + 1.0
        if y_high <= y_low:
            pad = max(1.0, abs(y_low)) * 0.5
            y_low, y_high = y_low - pad, y_high + pad
        else:
            pad = 0.05 * (y_high - y_low)
            y_low, y_high = y_low - pad, y_high + pad
        self.x_low, self.x_high = x_low, x_high
        self.y_low, self.y_high = y_low, y_high

    def x(self, value):
        span = _WIDTH - _MARGIN_L - _MARGIN_R
        return _MARGIN_L + span * (value - self.x_low) / (self.x_high - self.x_low)

    def y(self, value):
        span = _HEIGHT - _MARGIN_T - _MARGIN_B
        return _HEIGHT - _MARGIN_B - span * (value - self.y_low) / (self.y_high - self.y_low)


def _points(mapper, times, values):
    return " ".join(f"{mapper.x(t):.2f},{mapper.y(v):.2f}"
                    for t, v in zip(times, values))


def line_plot(path: str, times, curves, bands=None, title: str = "") -> None:
    """Write an SVG with one polyline per curve.

    curves: list of (label, values); bands: optional aligned list of
    (lower, upper) tuples or None entries, drawn as translucent fills.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    curves = [(str(label), np.atleast_1d(np.asarray(vals, dtype=float)))
              for label, vals in curves]
    if not curves:
        raise ValidationError("plot needs at least one curve")
    if bands is None:
        bands = [None] * len(curves)
    if len(bands) != len(curves):
        raise DimensionError(f"{len(bands)} bands for {len(curves)} curves")

    y_values = []
    for _, vals in curves:
        if vals.shape != times.shape:
            raise DimensionError(
                f"curve length {vals.shape} does not match times {times.shape}")
        y_values.append(vals)
    clean_bands = []
    for band in bands:
        if band is None:
            clean_bands.append(None)
            continue
        low = np.atleast_1d(np.asarray(band[0], dtype=float))
        high = np.atleast_1d(np.asarray(band[1], dtype=float))
        if low.shape != times.shape or high.shape != times.shape:
            raise DimensionError("band arrays do not match the time grid")
        clean_bands.append((low, high))
        y_values += [low, high]
    stacked = np.concatenate(y_values)
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(stacked))):
        raise ValidationError("plot data must be finite")

    mapper = _Mapper(float(times.min()), float(times.max()),
                     float(stacked.min()), float(stacked.max()))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{_WIDTH / 2:.0f}" y="20" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')

    for i, band in enumerate(clean_bands):
        if band is None:
            continue
        low, high = band
        ring = (_points(mapper, times, high) + " "
                + _points(mapper, times[::-1], low[::-1]))
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polygon points="{ring}" fill="{color}" fill-opacity="0.22" '
                     f'stroke="none"/>')

    axis_y = mapper.y(mapper.y_low)
    parts.append(f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
                 f'y2="{axis_y:.2f}" stroke="#444" stroke-width="1"/>')
    parts.append(f'<line x1="{_MARGIN_L}" y1="{axis_y:.2f}" x2="{_WIDTH - _MARGIN_R}" '
                 f'y2="{axis_y:.2f}" stroke="#444" stroke-width="1"/>')
    label_style = 'font-family="sans-serif" font-size="11" fill="#444"'
    parts.append(f'<text x="{_MARGIN_L}" y="{_HEIGHT - 12}" {label_style}>'
                 f'{mapper.x_low:.3g}</text>')
    parts.append(f'<text x="{_WIDTH - _MARGIN_R}" y="{_HEIGHT - 12}" '
                 f'text-anchor="end" {label_style}>{mapper.x_high:.3g}</text>')
    parts.append(f'<text x="{_MARGIN_L - 6}" y="{axis_y:.2f}" text-anchor="end" '
                 f'{label_style}>{mapper.y_low:.3g}</text>')
    parts.append(f'<text x="{_MARGIN_L - 6}" y="{_MARGIN_T + 4}" text-anchor="end" '
                 f'{label_style}>{mapper.y_high:.3g}</text>')

    for i, (label, vals) in enumerate(curves):
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polyline points="{_points(mapper, times, vals)}" '
                     f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        legend_y = _MARGIN_T + 14 * i
        parts.append(f'<line x1="{_WIDTH - _MARGIN_R - 90}" y1="{legend_y}" '
                     f'x2="{_WIDTH - _MARGIN_R - 70}" y2="{legend_y}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_WIDTH - _MARGIN_R - 64}" y="{legend_y + 4}" '
                     f'{label_style}>{label}</text>')

    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")
