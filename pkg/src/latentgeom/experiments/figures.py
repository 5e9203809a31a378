"""Standalone SVG figures: heatmap background, latent scatter, geodesic polylines."""

from __future__ import annotations

import numpy as np

SIZE = 480


def _xy(P, bounds):
    x0, x1, y0, y1 = bounds
    P = np.atleast_2d(P)
    u = (P[:, 0] - x0) / (x1 - x0) * SIZE
    v = (y1 - P[:, 1]) / (y1 - y0) * SIZE
    return u, v


def render_svg(bounds, grid=None, points=None, curves=(), title=""):
    """Return SVG text; grid rows follow increasing y as in :func:`measure_grid`."""
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">'
    ]
    if title:
        out.append(f"<title>{title}</title>")
    if grid is not None:
        g = np.asarray(grid, dtype=float)
        lo, hi = float(g.min()), float(g.max())
        out.append(f'<metadata>{{"heatmap_min": {lo!r}, "heatmap_max": {hi!r}}}</metadata>')
        span = hi - lo if hi > lo else 1.0
        ny, nx = g.shape
        cw, ch = SIZE / nx, SIZE / ny
        for r in range(ny):
            for c in range(nx):
                level = int(round(255 * (g[r, c] - lo) / span))
                y = SIZE - (r + 1) * ch
                out.append(
                    f'<rect x="{c * cw:.3f}" y="{y:.3f}" width="{cw:.3f}" height="{ch:.3f}" '
                    f'fill="rgb({level},{level},{level})"/>'
                )
    if points is not None:
        u, v = _xy(points, bounds)
        for a, b in zip(u, v):
            out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2" fill="#d62728"/>')
    for c in curves:
        u, v = _xy(getattr(c, "points", c), bounds)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(u, v))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, *args, **kwargs):
    with open(path, "w") as fh:
        fh.write(render_svg(*args, **kwargs))
