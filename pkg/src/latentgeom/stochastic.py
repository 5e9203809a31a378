"""Random pull-back metrics induced by Gaussian Jacobians.

With ``J`` a ``D x d`` matrix whose rows are independent ``N(mu_j, Sigma)``,
the metric ``M = J^T J / D`` is a scaled (non-central) Wishart matrix. This
module provides its moments, samplers, expected distances and expected
volume elements, and Monte-Carlo checks of the expected energy/length
relation along curves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import PreconditionError
from .geometry import DEFAULT_QUADRATURE, DiscreteCurve, equalize_segments
from .models.base import StochasticJacobian
from .special import X_MAX, kummer_1f1


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream (Philox): equal seeds give identical draws."""

    seed: int
    counter: int = 0

    def generator(self):
        return np.random.Generator(np.random.Philox(key=int(self.seed), counter=int(self.counter)))

    def substream(self, index):
        """Independent stream for task ``index``; blocks are 2**64 counters apart."""
        return RngStream(self.seed, self.counter + ((int(index) + 1) << 64))


def _gen(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(int(rng)).generator()


def _psd_root(S):
    """``R`` with ``R R^T = S`` for PSD ``S`` (eigen-decomposition, no jitter)."""
    w, U = np.linalg.eigh(0.5 * (S + np.swapaxes(S, -1, -2)))
    return U * np.sqrt(np.maximum(w, 0.0))[..., None, :]


@dataclass(frozen=True)
class WishartMetricLaw:
    """Law of ``D M = J^T J`` with ``J`` rows ``N(mean_j, scale)``."""

    dof: int
    scale: np.ndarray
    noncentrality_mean: Optional[np.ndarray] = None

    def __post_init__(self):
        S = np.asarray(self.scale, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("scale must be square")
        if np.linalg.eigvalsh(0.5 * (S + S.T))[0] < -1e-10 * max(np.trace(np.abs(S)), 1e-300):
            raise ValueError("scale must be PSD")
        object.__setattr__(self, "scale", 0.5 * (S + S.T))
        mu = self.noncentrality_mean
        mu = np.zeros((self.dof, S.shape[0])) if mu is None else np.asarray(mu, dtype=float)
        if mu.shape != (self.dof, S.shape[0]):
            raise ValueError(f"mean must be {self.dof}x{S.shape[0]}")
        object.__setattr__(self, "noncentrality_mean", mu)

    @property
    def d(self):
        return self.scale.shape[0]

    @classmethod
    def from_jacobian(cls, j):
        return cls(j.ambient_dim, j.row_cov, j.mean)

    @property
    def is_central(self):
        return not np.any(self.noncentrality_mean)


def expected_metric(j):
    """``E[M] = E[J]^T E[J] / D + Sigma``."""
    mu = j.mean
    return mu.T @ mu / j.ambient_dim + j.row_cov


def metric_variance(j):
    """Elementwise ``Var[M_ij]`` for ``M = J^T J / D`` with Gaussian rows.

    Uses Isserlis' theorem per row:
    ``Var(x_i x_j) = S_ii S_jj + S_ij^2 + m_i^2 S_jj + m_j^2 S_ii + 2 m_i m_j S_ij``.
    """
    S = j.row_cov
    D = j.ambient_dim
    G = j.mean.T @ j.mean
    s = np.diag(S)
    g = np.diag(G)
    first = (S**2 + np.outer(s, s)) / D
    second = (np.outer(g, s) + np.outer(s, g) + 2.0 * G * S) / D**2
    return first + second


def sample_metric(law, rng, size=None):
    """Draw ``M = J^T J / D`` by sampling the ``D`` Gaussian rows of ``J``."""
    gen = _gen(rng)
    n = 1 if size is None else int(size)
    root = _psd_root(law.scale)
    E = gen.standard_normal((n, law.dof, law.d))
    J = law.noncentrality_mean[None] + E @ root.T
    M = np.swapaxes(J, 1, 2) @ J / law.dof
    return M[0] if size is None else M


def _bartlett(gen, dof, d, shape):
    """Lower-triangular ``A`` with ``A A^T ~ Wishart(dof, I_d)``."""
    A = np.zeros(shape + (d, d))
    for i in range(d):
        A[..., i, i] = np.sqrt(gen.chisquare(dof - i, size=shape))
        A[..., i, :i] = gen.standard_normal(shape + (i,))
    return A


def sample_metric_reduced(gram, cov, D, n_samples, rng):
    """Exact draws of ``M`` from only ``E[J]^T E[J]``, ``Sigma`` and ``D``.

    Rotating the row space so the mean columns span the first ``d`` rows gives
    ``J^T J = (R + E1 L^T)^T (R + E1 L^T) + L W L^T`` with ``R^T R = gram``,
    ``E1`` a ``d x d`` Gaussian and ``W ~ Wishart(D - d, I)``. Vectorized over a
    leading batch axis of ``gram`` and ``cov``; returns ``(m, n_samples, d, d)``.
    """
    gen = _gen(rng)
    gram = np.asarray(gram, dtype=float)
    cov = np.asarray(cov, dtype=float)
    single = gram.ndim == 2
    if single:
        gram, cov = gram[None], cov[None]
    m, d, _ = gram.shape
    if D <= d:
        raise ValueError("the reduced sampler needs D > d")
    R = np.swapaxes(_psd_root(gram), -1, -2)  # R^T R = gram
    L = _psd_root(cov)
    E1 = gen.standard_normal((m, n_samples, d, d))
    A = _bartlett(gen, D - d, d, (m, n_samples))
    top = R[:, None] + E1 @ np.swapaxes(L, -1, -2)[:, None]
    LA = L[:, None] @ A
    M = (np.swapaxes(top, -1, -2) @ top + LA @ np.swapaxes(LA, -1, -2)) / D
    return M[0] if single else M


def chi_mean_factor(D):
    """``sqrt(2) Gamma((D + 1)/2) / Gamma(D/2)``, the mean of a chi(D) variable."""
    return math.sqrt(2.0) * math.exp(gammaln((D + 1) / 2.0) - gammaln(D / 2.0))


def nakagami_expected_distance(u, v, Sigma, D):
    """Expected ``|A (u - v)|`` for ``A`` with ``D`` independent ``N(0, Sigma)`` rows."""
    if D < 1:
        raise ValueError("D must be at least 1")
    diff = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    s2 = float(diff @ np.asarray(Sigma, dtype=float) @ diff)
    if s2 <= 0:
        return 0.0
    return chi_mean_factor(D) * math.sqrt(s2)


def expected_sqrtdet_central(law):
    """``E[sqrt(det M)]`` for the central law, ``M = W / D``."""
    D, d = law.dof, law.d
    if D < d:
        raise ValueError(f"need D >= d, got D={D}, d={d}")
    det = float(np.linalg.det(law.scale))
    if det <= 0:
        return 0.0
    log_val = 0.5 * (d * math.log(2.0) + math.log(det)) + gammaln((D + 1) / 2.0) - gammaln(
        (D - d + 1) / 2.0
    )
    return math.exp(log_val - 0.5 * d * math.log(D))


def noncentral_chi_mean(D, lam):
    """Mean of ``|x|`` for ``x ~ N(m, I_D)`` with ``|m|^2 = lam``."""
    if lam == 0:
        return chi_mean_factor(D)
    if lam / 2.0 > X_MAX:
        raise ValueError("non-centrality beyond the Kummer series domain")
    return chi_mean_factor(D) * kummer_1f1(-0.5, D / 2.0, -lam / 2.0)


def expected_sqrtdet_noncentral_1d(mean, var, D=None):
    """``E[sqrt(M)]`` for ``d = 1``: ``M = |j|^2 / D`` with ``j ~ N(mean, var I)``."""
    mean = np.ravel(np.asarray(mean, dtype=float))
    D = mean.size if D is None else D
    m2 = float(mean @ mean)
    if var <= 0:
        return math.sqrt(m2 / D)
    return math.sqrt(var / D) * noncentral_chi_mean(D, m2 / var)


def expected_sqrtdet_mc(j, n_samples, rng):
    """Monte-Carlo ``E[sqrt(det M)]`` and its standard error."""
    if n_samples < 100:
        raise ValueError("use at least 100 samples")
    if not np.any(j.row_cov):
        val = math.sqrt(max(np.linalg.det(j.mean.T @ j.mean / j.ambient_dim), 0.0))
        return val, 0.0
    law = WishartMetricLaw.from_jacobian(j)
    M = sample_metric(law, rng, n_samples)
    s = np.sqrt(np.maximum(np.linalg.det(M), 0.0))
    return float(s.mean()), float(s.std(ddof=1) / math.sqrt(n_samples))


@dataclass(frozen=True)
class MCReport:
    estimate: float
    std_error: float
    n_samples: int
    seed: Optional[int] = None

    def to_json(self):
        return json.dumps(
            {"estimate": self.estimate, "std_error": self.std_error,
             "n_samples": self.n_samples, "seed": self.seed},
            sort_keys=True,
        )


class GaussianJacobianField:
    """Stochastic metric field given by callables for its two moments.

    ``mean_gram(Z)`` returns ``E[J]^T E[J] / D`` and ``row_cov(Z)`` returns
    ``Sigma`` at each point. Fitted GP and VAE models expose the same methods.
    """

    def __init__(self, mean_gram, row_cov, ambient_dim, latent_dim=2):
        self.mean_gram = mean_gram
        self.row_cov = row_cov
        self.ambient_dim = int(ambient_dim)
        self.latent_dim = latent_dim

    @classmethod
    def zero_mean(cls, model):
        """A fitted model's Jacobian covariance with the mean removed."""
        d = model.latent_dim
        return cls(lambda Z: np.zeros((len(Z), d, d)), model.row_cov, model.ambient_dim, d)

    def expected_metric_batch(self, Z):
        return self.mean_gram(Z) + self.row_cov(Z)


def _velocity_moments(sfield, c, quad=DEFAULT_QUADRATURE):
    pos, w = quad.nodes(1.0)
    if len(w) != 1:
        raise ValueError("expected-speed computations use one sample per segment")
    P = c.points
    mid = P[:-1] + pos[0] * (P[1:] - P[:-1])
    v = np.diff(P, axis=0) / c.dt
    G = sfield.mean_gram(mid) * sfield.ambient_dim
    S = sfield.row_cov(mid)
    return v, G, S, mid


def expected_speeds(sfield, c):
    """Closed-form ``E[|c'|_M]`` on each segment (non-central chi mean)."""
    v, G, S, _ = _velocity_moments(sfield, c)
    D = sfield.ambient_dim
    gv = np.einsum("si,sij,sj->s", v, G, v)
    sv = np.einsum("si,sij,sj->s", v, S, v)
    out = np.empty(len(v))
    for i, (g, s) in enumerate(zip(gv, sv)):
        out[i] = math.sqrt(g / D) if s <= 0 else math.sqrt(s / D) * noncentral_chi_mean(D, g / s)
    return out


def reparametrize_constant_expected_speed(sfield, c, tol=1e-6):
    """Redistribute knots so the expected speed is the same on every segment."""
    return equalize_segments(
        c, lambda pts: c.dt * expected_speeds(sfield, DiscreteCurve(pts, c.a, c.b)), tol
    )


def energy_length_decomposition(sfield, c, n_samples, rng, speed_tol=0.02):
    """Monte-Carlo expected energy, expected length and integrated speed variance.

    The metric is sampled independently on every segment; all three integrals
    only involve per-point marginals. Also returns the expected energy under
    the expected metric and the residual of
    ``E = L^2 / (2 (b - a)) + 1/2 int Var|c'| dt`` with a combined standard error.
    """
    gen = _gen(rng)
    v, G, S, _ = _velocity_moments(sfield, c)
    M = sample_metric_reduced(G, S, sfield.ambient_dim, n_samples, gen)  # (seg, n, d, d)
    sq = np.einsum("si,snij,sj->sn", v, M, v)
    sp = np.sqrt(np.maximum(sq, 0.0))
    n, dt, T = n_samples, c.dt, c.b - c.a
    mean_speed = sp.mean(1)
    dev = np.max(np.abs(mean_speed / mean_speed.mean() - 1.0))
    if dev > speed_tol:
        raise PreconditionError(
            f"expected speed varies by {dev:.3%} along the curve; reparametrize first"
        )
    energy = 0.5 * dt * sq.mean(1).sum()
    length = dt * mean_speed.sum()
    var_s = sp.var(1, ddof=1)
    var_int = dt * var_s.sum()
    se_energy = 0.5 * dt * math.sqrt((sq.var(1, ddof=1) / n).sum())
    se_length = dt * math.sqrt((var_s / n).sum())
    m4 = ((sp - mean_speed[:, None]) ** 4).mean(1)
    se_var = dt * math.sqrt(np.maximum(m4 - var_s**2, 0.0).sum() / n)
    se_l2 = length * se_length / T
    expected_metric_energy = 0.5 * dt * np.einsum(
        "si,sij,sj->", v, sfield.mean_gram(_velocity_moments(sfield, c)[3]) + S, v
    )
    residual = energy - length**2 / (2.0 * T) - 0.5 * var_int
    return {
        "expected_energy": float(energy),
        "expected_length": float(length),
        "length_variance_integral": float(var_int),
        "energy_se": float(se_energy),
        "length_se": float(se_length),
        "variance_integral_se": float(se_var),
        "identity_residual": float(residual),
        "combined_se": float(math.sqrt(se_energy**2 + se_l2**2 + (0.5 * se_var) ** 2)),
        "expected_metric_energy": float(expected_metric_energy),
        "max_speed_deviation": float(dev),
        "n_samples": int(n),
    }
