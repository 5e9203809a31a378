"""Curves in latent space and metric-dependent functionals.

Curves are uniform-parameter polylines. Every functional integrates
segment-wise: the velocity of a polyline is constant on each segment, so only
the metric has to be sampled inside a segment.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateInputError,
    EvaluationError,
    MetricValidationError,
    SingularMetricError,
)

SYMMETRY_RTOL = 1e-8
PSD_RTOL = 1e-10


def _as_points(z, d=None):
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or (d is not None and z.shape[1] != d):
        raise ValueError(f"expected points of shape (n, {d}), got {z.shape}")
    return z


def validate_metric(M, rtol_sym=SYMMETRY_RTOL, rtol_psd=PSD_RTOL):
    """Symmetrize a stack of metrics and check that they are numerically PSD.

    ``M`` has shape ``(n, d, d)``. Raises :class:`MetricValidationError` when the
    asymmetry or the most negative eigenvalue exceed their relative tolerances.
    """
    M = np.asarray(M, dtype=float)
    scale = np.abs(M).max(axis=(-1, -2), initial=0.0)
    asym = np.abs(M - np.swapaxes(M, -1, -2)).max(axis=(-1, -2), initial=0.0)
    bad = asym > rtol_sym * np.maximum(scale, 1e-300)
    if np.any(bad & (asym > 1e-300)):
        raise MetricValidationError(
            f"metric asymmetric beyond tolerance (max rel. asymmetry "
            f"{np.max(asym / np.maximum(scale, 1e-300)):.3e})"
        )
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    trace = np.trace(M, axis1=-2, axis2=-1)
    lam_min = np.linalg.eigvalsh(M)[..., 0]
    if np.any(lam_min < -rtol_psd * np.abs(trace)):
        raise MetricValidationError(
            f"metric not PSD: smallest eigenvalue {lam_min.min():.3e}"
        )
    return M


class MetricField:
    """A field of symmetric PSD matrices over latent space.

    Parameters
    ----------
    fn : callable
        Maps an ``(n, d)`` array of latent points to an ``(n, d, d)`` array.
    dim : int
        Latent dimension ``d``.
    derivative : callable, optional
        Maps ``(n, d)`` points to ``(n, d, d, d)`` with entry ``[., i, j, k]``
        equal to ``dM_ij / dz_k``. Finite differences are used when absent.
    check : bool
        Validate symmetry and PSD-ness on every evaluation.
    """

    def __init__(self, fn, dim, derivative=None, check=True, name=None):
        self._fn = fn
        self.dim = int(dim)
        self._derivative = derivative
        self.check = check
        self.name = name or getattr(fn, "__name__", "metric")

    @property
    def has_derivative(self):
        return self._derivative is not None

    def evaluate(self, Z):
        Z = _as_points(Z, self.dim)
        M = np.asarray(self._fn(Z), dtype=float)
        if not np.all(np.isfinite(M)):
            raise EvaluationError("metric evaluation produced non-finite entries")
        if self.check:
            M = validate_metric(M)
        return M

    def __call__(self, z):
        return self.evaluate(np.asarray(z, dtype=float)[None, :])[0]

    def evaluate_derivative(self, Z, h=None):
        """Stack of ``dM_ij/dz_k`` with shape ``(n, d, d, d)``."""
        Z = _as_points(Z, self.dim)
        if self._derivative is not None:
            dM = np.asarray(self._derivative(Z), dtype=float)
        else:
            dM = _fd_derivative_batch(self, Z, h)
        if not np.all(np.isfinite(dM)):
            raise EvaluationError("metric derivative produced non-finite entries")
        return dM

    def derivative(self, z, h=None):
        """``d^2 x d`` matrix whose column ``k`` is ``d vec(M) / dz_k``."""
        dM = self.evaluate_derivative(np.asarray(z, dtype=float)[None, :], h)[0]
        d = self.dim
        # vec stacks columns: vec index of M_ij is i + d*j
        return dM.transpose(1, 0, 2).reshape(d * d, d)

    def scaled(self, s):
        s = float(s)
        deriv = None
        if self._derivative is not None:
            deriv = lambda Z: s * self._derivative(Z)  # noqa: E731
        return MetricField(lambda Z: s * self._fn(Z), self.dim, deriv, self.check,
                           name=f"{s}*{self.name}")


def constant_field(M, name="constant"):
    """Metric field that returns ``M`` everywhere (derivative zero)."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]

    def fn(Z):
        return np.broadcast_to(M, (Z.shape[0], d, d)).copy()

    def deriv(Z):
        return np.zeros((Z.shape[0], d, d, d))

    return MetricField(fn, d, deriv, name=name)


def euclidean_field(d=2):
    return constant_field(np.eye(d), name="euclidean")


def default_fd_step(z):
    return 1e-4 * (1.0 + np.linalg.norm(z, axis=-1))


def _fd_derivative_batch(field, Z, h=None):
    n, d = Z.shape
    if h is None:
        h = default_fd_step(Z)
    h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    offsets = np.eye(d)[None, :, :] * h[:, None, None]  # (n, d, d)
    plus = (Z[:, None, :] + offsets).reshape(n * d, d)
    minus = (Z[:, None, :] - offsets).reshape(n * d, d)
    Mp = field.evaluate(plus).reshape(n, d, d, d)  # [n, k, i, j]
    Mm = field.evaluate(minus).reshape(n, d, d, d)
    dM = (Mp - Mm) / (2.0 * h[:, None, None, None])
    return dM.transpose(0, 2, 3, 1)


def metric_derivative_fd(field, z, h=None):
    """Central finite-difference ``d vec(M) / dz`` as a ``d^2 x d`` matrix."""
    z = np.asarray(z, dtype=float)
    if h is None:
        h = float(default_fd_step(z))
    dM = _fd_derivative_batch(field, z[None, :], h)[0]
    d = field.dim
    return dM.transpose(1, 0, 2).reshape(d * d, d)


def metric_inner(M, u, v):
    M = np.asarray(M, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("metric must be a square matrix")
    if u.shape != (M.shape[0],) or v.shape != (M.shape[0],):
        raise ValueError(
            f"vector dimensions {u.shape}, {v.shape} do not match metric {M.shape}"
        )
    return float(u @ M @ v)


@dataclass(frozen=True)
class QuadratureRule:
    """Per-segment quadrature: ``midpoint`` or ``trapezoid`` with ``samples`` panels."""

    scheme: str = "midpoint"
    samples: int = 1

    def __post_init__(self):
        if self.scheme not in ("midpoint", "trapezoid"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if int(self.samples) < 1:
            raise ValueError("samples per segment must be positive")

    def nodes(self, width=1.0):
        """Local positions in ``[0, 1]`` and weights summing to ``width``."""
        s = int(self.samples)
        if self.scheme == "midpoint":
            pos = (np.arange(s) + 0.5) / s
            w = np.full(s, 1.0 / s)
        else:
            pos = np.linspace(0.0, 1.0, s + 1)
            w = np.full(s + 1, 1.0 / s)
            w[0] = w[-1] = 0.5 / s
        return pos, w * width


DEFAULT_QUADRATURE = QuadratureRule()


@dataclass(frozen=True)
class DiscreteCurve:
    """Polyline with ``K + 2`` knots at uniform parameters on ``[a, b]``."""

    points: np.ndarray
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 3:
            raise ValueError("a curve needs at least one interior knot (K >= 1)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("curve points must be finite")
        if not self.b > self.a:
            raise ValueError("parameter interval must satisfy a < b")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def straight(cls, start, end, K, a=0.0, b=1.0):
        s = np.linspace(0.0, 1.0, K + 2)[:, None]
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        return cls((1 - s) * start + s * end, a, b)

    @property
    def K(self):
        return self.points.shape[0] - 2

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def t(self):
        return np.linspace(self.a, self.b, self.points.shape[0])

    @property
    def dt(self):
        return (self.b - self.a) / (self.points.shape[0] - 1)

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    def with_interior(self, interior):
        pts = np.vstack([self.points[:1], interior, self.points[-1:]])
        return DiscreteCurve(pts, self.a, self.b)

    def reversed(self):
        return DiscreteCurve(self.points[::-1], self.a, self.b)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"z{i + 1}" for i in range(self.dim)])
        for t, p in zip(self.t, self.points):
            writer.writerow([repr(float(t))] + [repr(float(x)) for x in p])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if header[0] != "t" or header[1:] != [f"z{i + 1}" for i in range(len(header) - 1)]:
            raise ValueError(f"unexpected curve CSV header {header}")
        arr = np.array([[float(x) for x in r] for r in body])
        return cls(arr[:, 1:], float(arr[0, 0]), float(arr[-1, 0]))


def _segment_samples(points, quad):
    """Sample locations along every segment: returns (positions, weights, velocity)."""
    pos, w = quad.nodes(1.0)
    p, q = points[:-1], points[1:]
    X = p[:, None, :] + pos[None, :, None] * (q - p)[:, None, :]
    return X, pos, w


def _metric_along(field, points, quad, dt):
    X, pos, w = _segment_samples(points, quad)
    n_seg, n_s, d = X.shape
    try:
        M = field.evaluate(X.reshape(-1, d))
    except EvaluationError as exc:
        M = np.array([_eval_or_nan(field, x) for x in X.reshape(-1, d)])
        bad = np.flatnonzero(~np.all(np.isfinite(M.reshape(len(M), -1)), axis=1))
        t_bad = None
        if bad.size:
            seg, sub = divmod(int(bad[0]), n_s)
            t_bad = (seg + pos[sub]) * dt
        raise EvaluationError(f"non-finite metric along curve at t={t_bad}", t=t_bad) from exc
    return M.reshape(n_seg, n_s, d, d), X, pos, w


def _eval_or_nan(field, x):
    try:
        return field(x)
    except EvaluationError:
        return np.full((field.dim, field.dim), np.nan)


def segment_speeds_squared(field, c, quad=DEFAULT_QUADRATURE):
    """``v^T M v`` at every quadrature sample, shape ``(K + 1, samples)``."""
    M, _, _, w = _metric_along(field, c.points, quad, c.dt)
    v = np.diff(c.points, axis=0) / c.dt
    return np.einsum("si,snij,sj->sn", v, M, v), w


def segment_lengths(field, c, quad=DEFAULT_QUADRATURE):
    sq, w = segment_speeds_squared(field, c, quad)
    return c.dt * (np.sqrt(np.maximum(sq, 0.0)) @ w)


def curve_length(field, c, quad=DEFAULT_QUADRATURE):
    """Riemannian length ``int sqrt(c'^T M c') dt`` of a polyline."""
    return float(segment_lengths(field, c, quad).sum())


def curve_energy(field, c, quad=DEFAULT_QUADRATURE):
    """Curve energy ``1/2 int c'^T M c' dt`` of a polyline."""
    sq, w = segment_speeds_squared(field, c, quad)
    return float(0.5 * c.dt * (sq @ w).sum())


def equalize_segments(c, seg_lengths, tol=1e-6, max_iter=100):
    """Move interior knots along the image of ``c`` until ``seg_lengths`` is uniform.

    ``seg_lengths`` maps a ``(K + 2, d)`` point array to ``K + 1`` segment lengths.
    New knots are placed on the original polyline, addressed by a fractional
    segment index, and refined by fixed-point iteration.
    """
    P = c.points
    n_seg = P.shape[0] - 1
    u = np.arange(n_seg + 1, dtype=float)
    knots = np.arange(n_seg + 1, dtype=float)

    def at(u):
        i = np.clip(np.floor(u).astype(int), 0, n_seg - 1)
        f = (u - i)[:, None]
        return (1 - f) * P[i] + f * P[i + 1]

    for _ in range(max_iter):
        pts = at(u)
        ell = seg_lengths(pts)
        total = ell.sum()
        if not total > 0:
            raise DegenerateInputError("cannot reparametrize a zero-length curve")
        mean = total / n_seg
        if np.max(np.abs(ell - mean)) <= tol * mean:
            break
        cum = np.concatenate([[0.0], np.cumsum(ell)])
        target = np.linspace(0.0, total, n_seg + 1)
        # zero-length pieces make cum non-strict; np.interp handles ties left-most
        u = np.interp(np.interp(target, cum, knots), knots, u)
        u[0], u[-1] = 0.0, float(n_seg)
    pts = at(u)
    pts[0], pts[-1] = P[0], P[-1]
    return DiscreteCurve(pts, c.a, c.b)


def reparametrize_constant_speed(field, c, quad=DEFAULT_QUADRATURE, tol=1e-6):
    """Redistribute knots so every segment has the same Riemannian length."""
    return equalize_segments(
        c, lambda pts: segment_lengths(field, DiscreteCurve(pts, c.a, c.b), quad), tol
    )


def _christoffel_term(M, dM, v):
    """``1/2 M^{-1} [2 (I x v^T) dvec(M) v - dvec(M)^T (v x v)]`` for stacks."""
    first = np.einsum("nilk,nk,nl->ni", dM, v, v)
    second = np.einsum("nabi,na,nb->ni", dM, v, v)
    rhs = 2.0 * first - second
    return 0.5 * np.linalg.solve(M, rhs[..., None])[..., 0]


def _check_nonsingular(M, where="knot"):
    lam = np.linalg.eigvalsh(M)
    lam_min = lam[..., 0]
    bad = lam_min <= 1e-14 * np.maximum(lam[..., -1], 1e-300)
    if np.any(bad):
        raise SingularMetricError(
            f"singular metric at {where}; smallest eigenvalue {lam_min[bad].min():.3e}",
            min_eigenvalue=float(lam_min[bad].min()),
        )


def geodesic_ode_residual(field, c, h=None):
    """Norm of the geodesic equation residual at each interior knot.

    Velocities and accelerations are central differences on the uniform grid.
    """
    if c.K < 3:
        raise ValueError("the ODE residual needs K >= 3 interior knots")
    P, dt = c.points, c.dt
    v = (P[2:] - P[:-2]) / (2.0 * dt)
    acc = (P[2:] - 2.0 * P[1:-1] + P[:-2]) / dt**2
    Z = P[1:-1]
    M = field.evaluate(Z)
    _check_nonsingular(M)
    dM = field.evaluate_derivative(Z, h)
    r = acc + _christoffel_term(M, dM, v)
    return np.linalg.norm(r, axis=1)
