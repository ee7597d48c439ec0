"""Minimal SVG heatmap writer for scan grids (no plotting dependency)."""

from __future__ import annotations

import numpy as np

# viridis-like anchors; the 256-entry table is interpolated from them once
_ANCHORS = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [110, 206, 88], [181, 222, 43], [253, 231, 37],
], dtype=float)
COLORMAP = np.stack(
    [np.interp(np.linspace(0, 1, 256), np.linspace(0, 1, len(_ANCHORS)), _ANCHORS[:, c])
     for c in range(3)], axis=1).round().astype(int)


def color(v, vmin=0.0, vmax=1.0):
    if not np.isfinite(v):
        return "#bbbbbb"
    k = int(np.clip((v - vmin) / (vmax - vmin), 0, 1) * 255)
    r, g, b = COLORMAP[k]
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(grid, title="", vmin=0.0, vmax=1.0, cell=10, label="inversion"):
    """SVG text for ``grid.inversion`` with detuning on x and amplitude on y.

    Amplitude rows are drawn as equal-height bands (the axis is usually
    log-spaced) and labelled with their values.
    """
    d, a, m = grid.detunings, grid.amplitudes, grid.inversion
    nx, ny = len(d), len(a)
    left, top, bar = 80, 40, 60
    w, h = nx * cell, ny * cell
    W, H = left + w + bar + 50, top + h + 60
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{left + w / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for i in range(ny):
        y = top + (ny - 1 - i) * cell
        for j in range(nx):
            out.append(f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{color(m[i, j], vmin, vmax)}"/>')
    out.append(f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" '
               f'stroke="black"/>')
    for j in np.unique(np.linspace(0, nx - 1, min(nx, 6)).round().astype(int)):
        x = left + (j + 0.5) * cell
        out.append(f'<text x="{x}" y="{top + h + 15}" text-anchor="middle">{d[j]:.6g}</text>')
    for i in np.unique(np.linspace(0, ny - 1, min(ny, 6)).round().astype(int)):
        y = top + (ny - 1 - i + 0.5) * cell + 4
        out.append(f'<text x="{left - 5}" y="{y}" text-anchor="end">{a[i]:.3g}</text>')
    out.append(f'<text x="{left + w / 2}" y="{top + h + 35}" text-anchor="middle">'
               f'detuning (GHz)</text>')
    out.append(f'<text x="20" y="{top + h / 2}" text-anchor="middle" '
               f'transform="rotate(-90 20 {top + h / 2})">amplitude (&#8730;pJ)</text>')
    # color bar
    bx = left + w + 20
    for k in range(64):
        v = vmin + (vmax - vmin) * k / 63
        y = top + h - (k + 1) * h / 64
        out.append(f'<rect x="{bx}" y="{y:.3f}" width="14" height="{h / 64 + 0.5:.3f}" '
                   f'fill="{color(v, vmin, vmax)}"/>')
    out.append(f'<text x="{bx + 18}" y="{top + h}">{vmin:g}</text>')
    out.append(f'<text x="{bx + 18}" y="{top + 10}">{vmax:g}</text>')
    out.append(f'<text x="{bx + 7}" y="{top - 8}" text-anchor="middle">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
