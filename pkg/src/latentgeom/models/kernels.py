"""Gaussian (RBF) kernel with an optional linear term, and its derivatives."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from ..errors import ConditioningError


@dataclass(frozen=True)
class KernelParams:
    theta_rbf: float = 1.0
    alpha: float = 1.0
    theta_lin: float = 0.0
    noise: float = 0.0

    def __post_init__(self):
        for name in ("theta_rbf", "alpha", "theta_lin", "noise"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = (self.theta_rbf, self.alpha, self.theta_lin, self.noise)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("kernel parameters must be finite")
        # theta_rbf == 0 is allowed so that a purely linear kernel can be expressed
        if self.theta_rbf < 0 or self.alpha <= 0 or self.theta_lin < 0 or self.noise < 0:
            raise ValueError(f"invalid kernel parameters {self}")

    def replace(self, **kw):
        return KernelParams(**{**asdict(self), **kw})

    def to_dict(self):
        return {k: float(v) for k, v in asdict(self).items()}

    @property
    def lengthscale(self):
        return 1.0 / np.sqrt(self.alpha)


def sqdist(A, B):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def rbf_part(p, A, B):
    return p.theta_rbf * np.exp(-0.5 * p.alpha * sqdist(A, B))


def gram(p, A, B=None):
    """Kernel matrix ``k(A, B)`` without the noise term."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    K = rbf_part(p, A, B)
    if p.theta_lin > 0:
        K = K + p.theta_lin * (A @ B.T)
    return K


def kernel_eval(p, z, z2):
    z = np.asarray(z, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    diff = z - z2
    val = p.theta_rbf * np.exp(-0.5 * p.alpha * float(diff @ diff))
    return float(val + p.theta_lin * float(z @ z2))


def kernel_grad_batch(p, Zs, Z):
    """``dk(z*, z_n)/dz*`` for many query points: shape ``(m, N, d)``."""
    Zs = np.atleast_2d(Zs)
    diff = Zs[:, None, :] - Z[None, :, :]
    k = rbf_part(p, Zs, Z)
    G = -p.alpha * diff * k[:, :, None]
    if p.theta_lin > 0:
        G = G + p.theta_lin * Z[None, :, :]
    return G


def kernel_grad(p, zs, Z):
    """Gradient of ``k(z*, z_n)`` with respect to ``z*``; one row per ``z_n``."""
    return kernel_grad_batch(p, np.asarray(zs, dtype=float)[None, :], np.asarray(Z, dtype=float))[0]


def kernel_hess_batch(p, Zs, Z):
    """``d^2 k(z*, z_n) / dz*_k dz*_l``: shape ``(m, N, d, d)``.

    The linear term is affine in ``z*`` and contributes nothing.
    """
    Zs = np.atleast_2d(Zs)
    diff = Zs[:, None, :] - Z[None, :, :]
    k = rbf_part(p, Zs, Z)
    d = Zs.shape[1]
    outer = p.alpha**2 * diff[..., :, None] * diff[..., None, :]
    return k[..., None, None] * (outer - p.alpha * np.eye(d))


def prior_derivative_cov(p, d):
    """Prior covariance of the gradient of one output: ``d^2 k / dz dz'`` at ``z = z'``."""
    return (p.alpha * p.theta_rbf + p.theta_lin) * np.eye(d)


def jitter_ladder(K):
    n = K.shape[0]
    scale = max(np.trace(K) / n, 1e-300)
    ladder = [0.0]
    j = 1e-10 * scale
    while j <= 1e-4 * scale * (1 + 1e-12):
        ladder.append(j)
        j *= 2.0
    return ladder


def stable_cholesky(K):
    """Lower Cholesky factor of ``K``, adding diagonal jitter if needed.

    Returns ``(L, jitter)``.
    """
    ladder = jitter_ladder(K)
    for j in ladder:
        try:
            L = linalg.cholesky(K + j * np.eye(K.shape[0]), lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, j
    raise ConditioningError(
        f"Cholesky failed for all {len(ladder)} jitter levels up to {ladder[-1]:.3e}",
        jitter_ladder=ladder,
    )
