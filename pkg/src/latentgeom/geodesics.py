"""Boundary-value geodesics by minimizing the discretized curve energy."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SingularMetricError
from .geometry import (
    DEFAULT_QUADRATURE,
    DiscreteCurve,
    MetricField,
    QuadratureRule,
    curve_energy,
    curve_length,
    geodesic_ode_residual,
    segment_lengths,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeodesicProblem:
    field: MetricField
    start: np.ndarray
    end: np.ndarray
    K: int = 32
    quadrature: QuadratureRule = DEFAULT_QUADRATURE
    max_iter: int = 5000
    gtol: float = 1e-6
    a: float = 0.0
    b: float = 1.0
    max_step: Optional[float] = None

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float)
        end = np.asarray(self.end, dtype=float)
        if start.shape != end.shape or start.shape != (self.field.dim,):
            raise ValueError("endpoints must be latent points of the field's dimension")
        if np.allclose(start, end, rtol=0, atol=1e-15):
            raise ValueError("geodesic endpoints must be distinct")
        if self.K < 3:
            raise ValueError("geodesic problems need K >= 3 interior knots")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        if self.max_step is None:
            # one straight-line segment: keeps single-sample quadrature from stepping over walls
            object.__setattr__(self, "max_step", float(np.linalg.norm(end - start)) / (self.K + 1))
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True)
class GeodesicSolution:
    curve: DiscreteCurve
    length: float
    energy: float
    converged: bool
    iterations: int
    max_ode_residual: float
    speed_ratio: float
    grad_norm: float = float("nan")

    def to_dict(self):
        return {
            "endpoints": [self.curve.start.tolist(), self.curve.end.tolist()],
            "K": self.curve.K,
            "length": self.length,
            "energy": self.energy,
            "converged": self.converged,
            "iterations": self.iterations,
            "diagnostics": {
                "max_ode_residual": self.max_ode_residual,
                "speed_ratio": self.speed_ratio,
                "energy_gap": energy_gap(self.energy, self.length, self.curve),
                "grad_norm": self.grad_norm,
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def energy_gap(E, L, c):
    return float(E - L**2 / (2.0 * (c.b - c.a)))


class _Energy:
    """Discretized energy, its gradient and a metric-frozen Hessian."""

    def __init__(self, field, start, end, K, quad, a, b):
        self.field = field
        self.start, self.end = start, end
        self.K, self.d = K, start.shape[0]
        self.dt = (b - a) / (K + 1)
        self.pos, self.w = quad.nodes(1.0)

    def _points(self, x):
        return np.vstack([self.start, x.reshape(self.K, self.d), self.end])

    def _samples(self, P):
        p, q = P[:-1], P[1:]
        X = p[:, None, :] + self.pos[None, :, None] * (q - p)[:, None, :]
        return X.reshape(-1, self.d)

    def value(self, x):
        P = self._points(x)
        M = self.field.evaluate(self._samples(P)).reshape(self.K + 1, len(self.w), self.d, self.d)
        v = np.diff(P, axis=0) / self.dt
        sq = np.einsum("si,snij,sj->sn", v, M, v)
        return 0.5 * self.dt * float((sq @ self.w).sum())

    def full(self, x):
        P = self._points(x)
        S = self._samples(P)
        ns, d = len(self.w), self.d
        M = self.field.evaluate(S).reshape(self.K + 1, ns, d, d)
        dM = self.field.evaluate_derivative(S).reshape(self.K + 1, ns, d, d, d)
        v = np.diff(P, axis=0) / self.dt
        sq = np.einsum("si,snij,sj->sn", v, M, v)
        E = 0.5 * self.dt * float((sq @ self.w).sum())
        Mv = np.einsum("snij,sj->sni", M, v)
        g = np.einsum("si,snijk,sj->snk", v, dM, v)
        w, pos = self.w[None, :, None], self.pos[None, :, None]
        dq = (w * (Mv + 0.5 * self.dt * pos * g)).sum(1)
        dp = (w * (-Mv + 0.5 * self.dt * (1 - pos) * g)).sum(1)
        grad = dq[:-1] + dp[1:]
        Mbar = np.einsum("n,snij->sij", self.w, M)
        return E, grad.ravel(), Mbar

    def hessian(self, Mbar):
        K, d, dt = self.K, self.d, self.dt
        A = np.zeros((K * d, K * d))
        for i in range(K):
            A[i * d:(i + 1) * d, i * d:(i + 1) * d] = (Mbar[i] + Mbar[i + 1]) / dt
            if i + 1 < K:
                A[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = -Mbar[i + 1] / dt
                A[(i + 1) * d:(i + 2) * d, i * d:(i + 1) * d] = -Mbar[i + 1] / dt
        scale = max(np.trace(Mbar.sum(0)) / (d * (K + 1) * dt), 1e-300)
        A += 1e-6 * scale * np.eye(K * d)
        return A


def _two_loop(g, pairs, precond):
    """L-BFGS direction whose initial inverse Hessian is ``precond``."""
    q = g.copy()
    alphas = []
    for s_, y_, rho in reversed(pairs):
        a = rho * (s_ @ q)
        q -= a * y_
        alphas.append(a)
    r = precond(q)
    for (s_, y_, rho), a in zip(pairs, reversed(alphas)):
        r += s_ * (a - rho * (y_ @ r))
    return r


def _descend(en, x, max_iter, gtol, max_step, armijo=1e-4, memory=8, patience=20):
    E, g, Mbar = en.full(x)
    g0 = np.max(np.abs(g))
    # relative tolerance, floored at round-off in the per-segment gradient terms
    v = np.diff(en._points(x), axis=0) / en.dt
    tol = max(gtol * g0, 1e-12 * np.max(np.abs(np.einsum("sij,sj->si", Mbar, v))))
    it = 0
    converged = g0 <= tol
    pairs = []
    stalled = 0
    while not converged and it < max_iter and stalled < patience:
        A = en.hessian(Mbar)

        def precond(r):
            try:
                return np.linalg.solve(A, r)
            except np.linalg.LinAlgError:
                return r.copy()

        direction = _two_loop(g, pairs, precond)
        slope = g @ direction
        if not slope > 0:
            pairs.clear()
            direction = precond(g)
            slope = g @ direction
            if not slope > 0:
                direction, slope = g, g @ g
        # trust radius on the largest knot displacement
        largest = np.max(np.linalg.norm(direction.reshape(-1, en.d), axis=1))
        step = min(1.0, max_step / largest) if largest > 0 else 1.0
        for _ in range(60):
            x_new = x - step * direction
            E_new = en.value(x_new)
            if E_new <= E - armijo * step * slope:
                break
            step *= 0.5
        else:
            break
        E_new, g_new, Mbar = en.full(x_new)
        s_, y_ = x_new - x, g_new - g
        sy = s_ @ y_
        if sy > 1e-12 * np.sqrt((s_ @ s_) * (y_ @ y_)):
            pairs.append((s_, y_, 1.0 / sy))
            if len(pairs) > memory:
                pairs.pop(0)
        # energy changes below round-off mean no further progress is possible
        stalled = stalled + 1 if E - E_new <= 1e-15 * abs(E) else 0
        x, E, g = x_new, E_new, g_new
        it += 1
        converged = np.max(np.abs(g)) <= tol
    return x, E, np.max(np.abs(g)), converged, it


def speed_ratio(field, c, quad=DEFAULT_QUADRATURE):
    ell = segment_lengths(field, c, quad)
    lo = ell.min()
    return float(ell.max() / lo) if lo > 0 else float("inf")


def solve_geodesic(problem, init=None):
    """Minimize the discretized energy over the interior knots.

    Directions come from limited-memory BFGS whose initial inverse Hessian is
    the energy Hessian with the metric frozen; steps use Armijo backtracking
    inside a trust radius on knot displacement. Non-convergence is
    reported through ``converged=False``.
    """
    p = problem
    if init is None:
        init = DiscreteCurve.straight(p.start, p.end, p.K, p.a, p.b)
    else:
        if not (np.allclose(init.start, p.start) and np.allclose(init.end, p.end)):
            raise ValueError("initial curve endpoints do not match the problem")
        if init.K != p.K:
            raise ValueError(f"initial curve has K={init.K}, problem has K={p.K}")
    en = _Energy(p.field, p.start, p.end, p.K, p.quadrature, p.a, p.b)
    x, E, gnorm, converged, it = _descend(en, init.points[1:-1].ravel().copy(), p.max_iter, p.gtol,
                                          p.max_step)
    curve = DiscreteCurve(en._points(x), p.a, p.b)
    L = curve_length(p.field, curve, p.quadrature)
    try:
        res = float(np.max(geodesic_ode_residual(p.field, curve)))
    except SingularMetricError:
        res = float("nan")
    return GeodesicSolution(curve, L, float(E), bool(converged), it, res,
                            speed_ratio(p.field, curve, p.quadrature), float(gnorm))


def solve_geodesic_multistart(problem, inits):
    """Solve from every initial curve and keep the lowest-energy solution."""
    best = None
    for init in inits:
        sol = solve_geodesic(problem, init)
        if best is None or (sol.converged, -sol.energy) > (best.converged, -best.energy):
            best = sol
    return best


def geodesic_diagnostics(field, sol, quad=DEFAULT_QUADRATURE):
    c = sol.curve
    E = curve_energy(field, c, quad)
    L = curve_length(field, c, quad)
    return {
        "max_ode_residual": float(np.max(geodesic_ode_residual(field, c))),
        "speed_ratio": speed_ratio(field, c, quad),
        "energy_gap": energy_gap(E, L, c),
    }
