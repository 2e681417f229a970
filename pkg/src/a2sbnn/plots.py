"""Dependency-free SVG rendering for field heatmaps and residual histograms."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .stats import histogram

# anchor colors of a viridis-like perceptual ramp
_RAMP = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=np.float64)


def ramp_color(v: float) -> str:
    v = min(max(float(v), 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(v), len(_RAMP) - 2)
    c = _RAMP[i] + (v - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(x)) for x in c)


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">\n'
            + "\n".join(body) + "\n</svg>\n")


def heatmap_pair_svg(left: np.ndarray, right: np.ndarray, titles=("Target", "Prediction"),
                     cell: int = 8, title: str = ""):
    """Side-by-side heatmaps sharing one color scale. Returns ``(svg, (vmin, vmax))``."""
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    vmin = float(min(left.min(), right.min()))
    vmax = float(max(left.max(), right.max()))
    span = vmax - vmin or 1.0
    rows, cols = left.shape
    gap, top = 30, 40
    pw = cols * cell
    width = 2 * pw + 3 * gap + 40
    height = rows * cell + top + 40
    body = [f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        body.append(f'<text x="{width / 2}" y="16" text-anchor="middle">{escape(title)}</text>')
    for k, (img, name) in enumerate(zip((left, right), titles)):
        x0 = gap + k * (pw + gap)
        body.append(f'<text x="{x0 + pw / 2}" y="{top - 6}" text-anchor="middle">{escape(name)}</text>')
        # image row 0 drawn at the bottom so the y-axis points up
        for i in range(rows):
            y = top + (rows - 1 - i) * cell
            for j in range(cols):
                c = ramp_color((img[i, j] - vmin) / span)
                body.append(f'<rect x="{x0 + j * cell}" y="{y}" width="{cell}" height="{cell}" fill="{c}"/>')
    bx = gap + 2 * (pw + gap) - gap / 2
    steps = 50
    for s in range(steps):
        y = top + rows * cell * (1 - (s + 1) / steps)
        body.append(f'<rect x="{bx}" y="{y:.2f}" width="12" height="{rows * cell / steps + 0.5:.2f}" '
                    f'fill="{ramp_color(s / (steps - 1))}"/>')
    body.append(f'<text x="{bx}" y="{top + rows * cell + 14}">{vmin:.3g}</text>')
    body.append(f'<text x="{bx}" y="{top - 6}">{vmax:.3g}</text>')
    return _svg(width, height, body), (vmin, vmax)


def histogram_svg(values, bins: int = 30, title: str = "", width: int = 480, height: int = 320):
    """Bar histogram. Returns ``(svg, counts)``."""
    edges, counts = histogram(values, bins)
    left, bottom, top = 50, 40, 30
    pw, ph = width - left - 20, height - top - bottom
    cmax = max(int(counts.max()), 1)
    bw = pw / bins
    body = [f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        body.append(f'<text x="{width / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    for k, c in enumerate(counts):
        h = ph * c / cmax
        body.append(f'<rect x="{left + k * bw:.2f}" y="{top + ph - h:.2f}" width="{bw * 0.95:.2f}" '
                    f'height="{h:.2f}" fill="#3b6fb6"/>')
    body.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    body.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    body.append(f'<text x="{left}" y="{height - 12}" text-anchor="middle">{edges[0]:.3g}</text>')
    body.append(f'<text x="{left + pw}" y="{height - 12}" text-anchor="middle">{edges[-1]:.3g}</text>')
    body.append(f'<text x="{left - 6}" y="{top + 4}" text-anchor="end">{cmax}</text>')
    body.append(f'<text x="{left - 6}" y="{top + ph}" text-anchor="end">0</text>')
    return _svg(width, height, body), counts
