"""Kernel ridge regression and Gaussian-process regression with shared kernels.

Both models have the posterior mean ``k(z*, Z) (K + noise I)^{-1} X``. The GP
additionally carries the posterior covariance of its Jacobian rows, which is
the same for all ``D`` outputs because the kernel is shared.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import linalg, optimize

from ..errors import ConditioningError
from .base import Dataset, FittedModel, clamp_psd
from .kernels import (
    KernelParams,
    gram,
    kernel_grad_batch,
    kernel_hess_batch,
    prior_derivative_cov,
    sqdist,
    stable_cholesky,
)

log = logging.getLogger(__name__)

_CHUNK = 256


def _contract_hess(H, B):
    """``out[m, k, l, j] = sum_n H[m, n, k, j] B[m, n, l]`` via batched matmul."""
    m, n, d, _ = H.shape
    out = np.swapaxes(H.reshape(m, n, d * d), 1, 2) @ B  # (m, k*j, l)
    return out.reshape(m, d, d, -1).transpose(0, 1, 3, 2)


def _chunked(fn, Z, *shape_tail):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] <= _CHUNK:
        return fn(Z)
    return np.concatenate([fn(Z[i:i + _CHUNK]) for i in range(0, Z.shape[0], _CHUNK)])


class KRRModel(FittedModel):
    """Kernel ridge regression ``f(z*) = k(z*, Z) A`` with ``A = (K + noise I)^{-1} X``."""

    model_type = "krr"

    def __init__(self, data, params, chol, jitter, weights):
        self.data = data
        self.params = params
        self.chol = chol
        self.jitter = jitter
        self.weights = weights
        self.latent_dim = data.d
        self.ambient_dim = data.D
        self._P = weights @ weights.T

    @property
    def Z(self):
        return self.data.Z

    def predict(self, Z):
        Z = np.asarray(Z, dtype=float)
        single = Z.ndim == 1
        out = _chunked(lambda B: gram(self.params, B, self.Z) @ self.weights, Z)
        return out[0] if single else out

    def _grad(self, Zs):
        return kernel_grad_batch(self.params, Zs, self.Z)

    def mean_jacobian(self, Zs):
        return _chunked(lambda B: np.swapaxes(np.swapaxes(self._grad(B), 1, 2) @ self.weights, 1, 2), Zs)

    def mean_gram(self, Zs):
        def fn(B):
            G = self._grad(B)
            PG = np.matmul(self._P, G)
            return np.swapaxes(G, 1, 2) @ PG / self.ambient_dim

        return _chunked(fn, Zs)

    def _mean_gram_derivative(self, B):
        G = self._grad(B)
        H = kernel_hess_batch(self.params, B, self.Z)
        PG = np.matmul(self._P, G)
        t = _contract_hess(H, PG)
        return (t + t.transpose(0, 2, 1, 3)) / self.ambient_dim

    def expected_metric_derivative(self, Zs):
        return _chunked(self._mean_gram_derivative, Zs)

    def metric(self, z):
        """Pull-back metric at a single point."""
        return self.expected_metric_batch(np.asarray(z, dtype=float)[None, :])[0]


class GPModel(KRRModel):
    """GP regression; the Jacobian is Gaussian with a shared row covariance."""

    model_type = "gp"

    def __init__(self, data, params, chol, jitter, weights, log_likelihood=None):
        super().__init__(data, params, chol, jitter, weights)
        self.log_likelihood = log_likelihood
        self._prior = prior_derivative_cov(params, data.d)

    @property
    def is_stochastic(self):
        return True

    def _row_cov(self, B):
        G = self._grad(B)
        KiG = linalg.cho_solve((self.chol, True), G.transpose(1, 0, 2).reshape(self.data.N, -1))
        KiG = KiG.reshape(self.data.N, B.shape[0], -1).transpose(1, 0, 2)
        S = self._prior[None] - np.swapaxes(G, 1, 2) @ KiG
        return clamp_psd(S, scale=float(np.trace(self._prior)))

    def row_cov(self, Zs):
        return _chunked(self._row_cov, Zs)

    def _expected_derivative(self, B):
        G = self._grad(B)
        H = kernel_hess_batch(self.params, B, self.Z)
        N = self.data.N
        KiG = linalg.cho_solve((self.chol, True), G.transpose(1, 0, 2).reshape(N, -1))
        KiG = KiG.reshape(N, B.shape[0], -1).transpose(1, 0, 2)
        PG = np.matmul(self._P, G)
        t = _contract_hess(H, PG / self.ambient_dim - KiG)
        return t + t.transpose(0, 2, 1, 3)

    def expected_metric_derivative(self, Zs):
        return _chunked(self._expected_derivative, Zs)

    def sample_functions(self, Zs, n_samples, rng, output=0):
        """Joint posterior samples of one output at ``Zs``: shape ``(n_samples, m)``."""
        Zs = np.atleast_2d(Zs)
        Ks = gram(self.params, Zs, self.Z)
        mean = Ks @ self.weights[:, output]
        V = linalg.solve_triangular(self.chol, Ks.T, lower=True)
        C = gram(self.params, Zs) - V.T @ V
        C = 0.5 * (C + C.T)
        w, U = np.linalg.eigh(C)
        root = U * np.sqrt(np.maximum(w, 0.0))
        eps = rng.standard_normal((n_samples, len(w)))
        return mean[None, :] + eps @ root.T


def _factorize(data, p):
    K = gram(p, data.Z) + p.noise * np.eye(data.N)
    L, jitter = stable_cholesky(K)
    return L, jitter


def krr_fit(data, params):
    """Fit kernel ridge regression with fixed kernel parameters."""
    L, jitter = _factorize(data, params)
    A = linalg.cho_solve((L, True), data.X)
    if jitter > 0:
        log.debug("krr_fit used jitter %.3e", jitter)
    return KRRModel(data, params, L, jitter, A)


def _gp_from_params(data, params, lml=None):
    L, jitter = _factorize(data, params)
    A = linalg.cho_solve((L, True), data.X)
    return GPModel(data, params, L, jitter, A, lml)


class _Likelihood:
    """Summed log marginal likelihood over ``D`` outputs sharing one kernel."""

    def __init__(self, data):
        self.data = data
        self.S = data.X @ data.X.T
        self.d2 = sqdist(data.Z, data.Z)
        self.lin = data.Z @ data.Z.T
        self.N, self.D = data.N, data.D

    def __call__(self, p):
        K = p.theta_rbf * np.exp(-0.5 * p.alpha * self.d2) + p.theta_lin * self.lin
        K[np.diag_indices_from(K)] += p.noise
        try:
            L, _ = stable_cholesky(K)
        except ConditioningError:
            return -np.inf
        Kinv = linalg.cho_solve((L, True), np.eye(self.N))
        logdet = 2.0 * np.log(np.diag(L)).sum()
        quad = np.sum(Kinv * self.S)
        return float(-0.5 * quad - 0.5 * self.D * logdet - 0.5 * self.N * self.D * np.log(2 * np.pi))


def log_marginal_likelihood(data, params):
    return _Likelihood(data)(params)


def default_grid(data, shape=(8, 8, 4)):
    """Log-spaced candidate values for ``(theta_rbf, alpha, noise)``."""
    s2 = float(np.mean(data.X**2))
    d2 = sqdist(data.Z, data.Z)
    med = float(np.median(d2[np.triu_indices(data.N, 1)]))
    thetas = s2 * np.logspace(-3, 2, shape[0])
    alphas = np.logspace(-2, 3, shape[1]) / med
    noises = s2 * np.logspace(-3, 0, shape[2])
    return thetas, alphas, noises


def gp_fit(data, init=None, grid_shape=(8, 8, 4), nm_iters=200):
    """Maximum-likelihood GP regression: log-grid search then Nelder-Mead.

    ``theta_lin`` is held at its initial value; the other three kernel
    parameters are optimized in log space.
    """
    init = init or KernelParams()
    lik = _Likelihood(data)
    thetas, alphas, noises = default_grid(data, grid_shape)
    best_p, best_v = init, lik(init)
    init_v = best_v
    for th in thetas:
        for al in alphas:
            for nz in noises:
                p = init.replace(theta_rbf=th, alpha=al, noise=nz)
                v = lik(p)
                if v > best_v:
                    best_p, best_v = p, v
    if not np.isfinite(best_v):
        raise ConditioningError("every hyperparameter candidate was ill-conditioned")

    def neg(x):
        th, al, nz = np.exp(np.clip(x, -50, 50))
        return -lik(init.replace(theta_rbf=th, alpha=al, noise=nz))

    x0 = np.log([best_p.theta_rbf, best_p.alpha, max(best_p.noise, 1e-12)])
    res = optimize.minimize(neg, x0, method="Nelder-Mead",
                            options={"maxiter": nm_iters, "xatol": 1e-6, "fatol": 1e-8})
    if np.isfinite(res.fun) and -res.fun > best_v:
        th, al, nz = np.exp(res.x)
        best_p, best_v = init.replace(theta_rbf=th, alpha=al, noise=nz), -res.fun
    assert best_v >= init_v
    log.info("gp_fit: %s (log-lik %.4f)", best_p, best_v)
    return _gp_from_params(data, best_p, best_v)


def gp_from_params(data, params):
    """GP posterior with fixed hyperparameters (no optimization)."""
    return _gp_from_params(data, params, log_marginal_likelihood(data, params))


def fit_linear_weight(data, params, bounds=(1e-6, 1e3)):
    """Maximum-likelihood ``theta_lin`` with the other hyperparameters fixed."""
    lik = _Likelihood(data)
    res = optimize.minimize_scalar(
        lambda x: -lik(params.replace(theta_lin=float(np.exp(x)))),
        bounds=np.log(bounds), method="bounded", options={"xatol": 1e-4},
    )
    return float(np.exp(res.x))
