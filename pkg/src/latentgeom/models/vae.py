"""Decoders of the form ``f(z) = mu(z) + diag(eps) sigma(z)``.

The mean network is a trained :class:`MLPModel` that is kept frozen; only the
standard deviation is fitted. Two variants are provided: ``sigma`` as a tanh
network (``vae_mlp_fit``) and ``1 / sigma^2`` as a nonnegative RBF expansion
that decays to a floor away from the data (``vae_rbf_fit``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import nnls

from ..errors import DegenerateInputError
from .base import FittedModel
from .kernels import sqdist
from .mlp import (
    MlpParams,
    gram_derivative,
    mlp_forward,
    mlp_hessian_batch,
    mlp_jacobian_batch,
    train_network,
)

PRECISION_CLAMP = (1e-6, 1e6)


@dataclass(frozen=True)
class RbfPrecisionNet:
    """``beta_j(z) = sum_k w_kj exp(-bandwidth |z - c_k|^2) + floor``."""

    centers: np.ndarray
    bandwidth: float
    weights: np.ndarray
    floor: float = 1e-4

    def __post_init__(self):
        if self.bandwidth <= 0 or self.floor <= 0:
            raise ValueError("bandwidth and floor must be positive")
        if np.any(self.weights < 0):
            raise ValueError("precision weights must be nonnegative")
        if self.weights.shape[0] != self.centers.shape[0]:
            raise ValueError("one weight row per center")

    def features(self, Z):
        return np.exp(-self.bandwidth * sqdist(Z, self.centers))

    def precision(self, Z):
        return self.features(np.atleast_2d(Z)) @ self.weights + self.floor

    def sigma(self, Z):
        return self.precision(Z) ** -0.5

    def sigma_jacobian(self, Z):
        """``d sigma_j / dz``, shape ``(m, D, d)``."""
        Z = np.atleast_2d(Z)
        phi = self.features(Z)
        beta = phi @ self.weights + self.floor
        dphi = -2.0 * self.bandwidth * (Z[:, None, :] - self.centers[None]) * phi[:, :, None]
        dbeta = np.swapaxes(np.swapaxes(dphi, 1, 2) @ self.weights, 1, 2)
        return -0.5 * beta[:, :, None] ** -1.5 * dbeta

    def sigma_hessian(self, Z):
        """``d^2 sigma_j / dz_i dz_k``, shape ``(m, D, d, d)``."""
        Z = np.atleast_2d(Z)
        m, d = Z.shape
        lam = self.bandwidth
        phi = self.features(Z)
        beta = phi @ self.weights + self.floor
        diff = Z[:, None, :] - self.centers[None]
        dbeta = np.swapaxes(np.swapaxes(-2.0 * lam * diff * phi[:, :, None], 1, 2) @ self.weights, 1, 2)
        Q = 4.0 * lam**2 * diff[:, :, :, None] * diff[:, :, None, :] - 2.0 * lam * np.eye(d)
        Q = (Q * phi[:, :, None, None]).reshape(m, -1, d * d)
        d2beta = np.swapaxes(np.swapaxes(Q, 1, 2) @ self.weights, 1, 2).reshape(m, -1, d, d)
        b = beta[:, :, None, None]
        return (0.75 * b**-2.5 * dbeta[:, :, :, None] * dbeta[:, :, None, :]
                - 0.5 * b**-1.5 * d2beta)


@dataclass(frozen=True)
class MlpStd:
    """``sigma(z) = exp(g(z))`` with ``g`` a tanh network."""

    params: MlpParams

    def sigma(self, Z):
        return np.exp(mlp_forward(self.params, np.atleast_2d(Z)))

    def sigma_jacobian(self, Z):
        Z = np.atleast_2d(Z)
        return self.sigma(Z)[:, :, None] * mlp_jacobian_batch(self.params, Z)

    def sigma_hessian(self, Z):
        Z = np.atleast_2d(Z)
        Jg = mlp_jacobian_batch(self.params, Z)
        Hg = mlp_hessian_batch(self.params, Z)
        return self.sigma(Z)[:, :, None, None] * (Jg[:, :, :, None] * Jg[:, :, None, :] + Hg)


class VAEModel(FittedModel):
    """Stochastic decoder with independent Gaussian outputs.

    Row ``j`` of the Jacobian is ``J_mu[j] + eps_j J_sigma[j]``, so rows have
    different covariances. :meth:`row_cov` reports their average
    ``J_sigma^T J_sigma / D``, which reproduces ``E[M]`` exactly; use
    :meth:`sample_metrics` for draws from the exact law.
    """

    def __init__(self, mean, std, model_type="vae_rbf", seed=None):
        self.mean = mean
        self.std = std
        self.model_type = model_type
        self.seed = seed
        self.latent_dim = mean.latent_dim
        self.ambient_dim = mean.ambient_dim

    @property
    def is_stochastic(self):
        return True

    def predict(self, Z):
        return self.mean.predict(Z)

    def sigma(self, Z):
        return self.std.sigma(Z)

    def mean_jacobian(self, Z):
        return self.mean.mean_jacobian(Z)

    def mean_gram(self, Z):
        return self.mean.mean_gram(Z)

    def row_cov(self, Z):
        Js = self.std.sigma_jacobian(np.atleast_2d(np.asarray(Z, dtype=float)))
        return np.swapaxes(Js, 1, 2) @ Js / self.ambient_dim

    def expected_metric_derivative(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        Js = self.std.sigma_jacobian(Z)
        Hs = self.std.sigma_hessian(Z)
        return self.mean.expected_metric_derivative(Z) + gram_derivative(Js, Hs, self.ambient_dim)

    def sample_metrics(self, z, n_samples, rng):
        z = np.asarray(z, dtype=float)[None, :]
        Jm = self.mean_jacobian(z)[0]
        Js = self.std.sigma_jacobian(z)[0]
        eps = rng.standard_normal((n_samples, self.ambient_dim))
        J = Jm[None] + eps[:, :, None] * Js[None]
        return np.swapaxes(J, 1, 2) @ J / self.ambient_dim


def vae_expected_metric(model, z):
    """``(J_mu^T J_mu + J_sigma^T J_sigma) / D`` at one point."""
    return model.expected_metric_batch(np.asarray(z, dtype=float)[None, :])[0]


def default_bandwidth(Z, centers, labels, scale=1.25):
    dist = np.linalg.norm(Z - centers[labels], axis=1)
    s = scale * max(float(dist.mean()), 1e-12)
    return 0.5 / s**2


def vae_rbf_fit(data, mean_net, n_centers=32, bandwidth=None, seed=0, floor=1e-4):
    """Fit the RBF precision network to the mean network's residuals.

    Per output dimension, nonnegative least squares matches
    ``beta_j(z_n) - floor`` to ``1 / r_nj^2`` (clamped).
    """
    if n_centers > data.N:
        raise ValueError("more centers than data points")
    R = data.X - mean_net.predict(data.Z)
    if np.all(R == 0):
        raise DegenerateInputError("all residuals are zero; precision is undefined")
    rng = np.random.default_rng(seed)
    centers, labels = kmeans2(data.Z, n_centers, seed=rng, minit="++")
    if bandwidth is None:
        bandwidth = default_bandwidth(data.Z, centers, labels)
    with np.errstate(divide="ignore"):
        target = np.clip(1.0 / R**2, *PRECISION_CLAMP) - floor
    phi = np.exp(-bandwidth * sqdist(data.Z, centers))
    W = np.empty((n_centers, data.D))
    for j in range(data.D):
        W[:, j], _ = nnls(phi, target[:, j])
    net = RbfPrecisionNet(centers, float(bandwidth), W, floor)
    return VAEModel(mean_net, net, "vae_rbf", seed)


def vae_mlp_fit(data, mean_net, widths=None, epochs=500, lr=1e-3, batch_size=32, seed=0):
    """Fit ``log sigma`` as a tanh network by the Gaussian negative log-likelihood."""
    widths = list(widths) if widths is not None else [data.d, 64, 64, data.D]
    rng = np.random.default_rng(seed)
    R = data.X - mean_net.predict(data.Z)
    params = MlpParams.init(widths, rng)
    b_last = np.log(np.sqrt(np.mean(R**2, axis=0)) + 1e-12)
    params = MlpParams(params.weights[:-1] + (params.weights[-1] * 0.1,), params.biases[:-1] + (b_last,))
    D = data.D

    def nll(out, idx):
        r2 = R[idx] ** 2
        e = np.exp(-2.0 * out)
        return float((out + 0.5 * r2 * e).sum() / D), (1.0 - r2 * e) / D

    params, history = train_network(params, data.Z, nll, epochs, lr, batch_size, rng)
    return VAEModel(mean_net, MlpStd(params), "vae", seed)
