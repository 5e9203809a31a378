"""Volume-measure heatmaps and diagnostics of metric behaviour away from data."""

from __future__ import annotations

import numpy as np

from ..geometry import MetricField
from ..stochastic import RngStream, sample_metric_reduced

MODES = ("sqrtdet_of_expected", "expected_sqrtdet_mc")
DEFAULT_BOUNDS = (-1.6, 1.6, -1.6, 1.6)


def grid_points(bounds=DEFAULT_BOUNDS, resolution=64):
    """Grid nodes in row-major order (rows follow y)."""
    x0, x1, y0, y1 = bounds
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def _mc_sqrtdet_rows(model, Z, n_samples, stream):
    if hasattr(model, "sample_metrics"):
        gen = stream.generator()
        M = np.stack([model.sample_metrics(z, n_samples, gen) for z in Z])
    else:
        D = model.ambient_dim
        M = sample_metric_reduced(model.mean_gram(Z) * D, model.row_cov(Z), D, n_samples, stream)
    s = np.sqrt(np.maximum(np.linalg.det(M), 0.0))
    return s.mean(1), s.std(1, ddof=1) / np.sqrt(n_samples)


def measure_grid(model, bounds=DEFAULT_BOUNDS, resolution=64, mode="sqrtdet_of_expected",
                 n_samples=500, seed=0):
    """Volume measure on a ``resolution x resolution`` grid.

    ``model`` is a fitted model (or anything with ``mean_gram``, ``row_cov`` and
    ``ambient_dim``); a plain :class:`MetricField` is treated as deterministic.
    Returns ``(grid, std_error)``; the error grid is zero for the closed-form mode.
    Monte-Carlo rows draw from their own counter streams, so results do not
    depend on evaluation order.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    Z = grid_points(bounds, resolution)
    shape = (resolution, resolution)
    if isinstance(model, MetricField) or mode == "sqrtdet_of_expected" or not _stochastic(model):
        M = model.evaluate(Z) if isinstance(model, MetricField) else model.expected_metric_batch(Z)
        g = np.sqrt(np.maximum(np.linalg.det(M), 0.0))
        return g.reshape(shape), np.zeros(shape)
    root = RngStream(seed)
    est = np.empty(shape)
    se = np.empty(shape)
    for r in range(resolution):
        rows = Z[r * resolution:(r + 1) * resolution]
        est[r], se[r] = _mc_sqrtdet_rows(model, rows, n_samples, root.substream(r))
    return est, se


def _stochastic(model):
    flag = getattr(model, "is_stochastic", None)
    return True if flag is None else bool(flag)


def write_grid_csv(path, grid, bounds, mode):
    res_y, res_x = grid.shape
    with open(path, "w") as fh:
        fh.write("# bounds," + ",".join(repr(float(b)) for b in bounds) + "\n")
        fh.write(f"# resolution,{res_x},{res_y},mode,{mode}\n")
        for row in grid:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_grid_csv(path):
    with open(path) as fh:
        b = fh.readline().strip().split(",")[1:]
        meta = fh.readline().strip().split(",")
        grid = np.loadtxt(fh, delimiter=",", ndmin=2)
    return grid, tuple(float(x) for x in b), meta[4]


def normalized_deviation(a, b):
    """Relative cellwise deviation after normalizing both grids to unit sum."""
    a = a / a.sum()
    b = b / b.sum()
    return np.abs(a - b) / np.maximum(b, 1e-300)


def probe_points(data, distance, n_probes=32):
    """Points on a circle around the data, at least ``distance`` from every latent."""
    if data.d != 2:
        raise ValueError("probe circles are defined for 2-d latents")
    c = data.Z.mean(0)
    R = np.linalg.norm(data.Z - c, axis=1).max() + distance
    ang = np.linspace(0.0, 2.0 * np.pi, n_probes, endpoint=False)
    return c + R * np.column_stack([np.cos(ang), np.sin(ang)])


def teleport_diagnostic(field, data, probe_distance_factor=20.0, lengthscale=1.0, n_probes=32):
    """Does the metric shrink below the data's squared diameter away from the data?"""
    diff = data.Z[:, None, :] - data.Z[None]
    r = float(np.sqrt((diff**2).sum(-1).max()))
    P = probe_points(data, probe_distance_factor * lengthscale, n_probes)
    lam = float(np.linalg.eigvalsh(field.evaluate(P))[:, 0].min())
    return {"lambda_min_away": lam, "r_squared": r * r, "flags_teleport": bool(lam < r * r)}


def trace_regularizer(field, points, D):
    """``D`` times the mean metric trace over ``points``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if not len(P):
        raise ValueError("need at least one point")
    return float(D * np.trace(field.evaluate(P), axis1=1, axis2=2).mean())
