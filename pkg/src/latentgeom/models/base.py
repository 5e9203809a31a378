"""Shared data containers and the fitted-model interface."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..geometry import MetricField


@dataclass(frozen=True)
class Dataset:
    """Paired latent (``N x d``) and ambient (``N x D``) observations."""

    Z: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        Z = np.array(self.Z, dtype=float)
        X = np.array(self.X, dtype=float)
        if Z.ndim != 2 or X.ndim != 2 or Z.shape[0] != X.shape[0]:
            raise ValueError(f"mismatched dataset shapes {Z.shape} and {X.shape}")
        if Z.shape[0] < 2:
            raise ValueError("a dataset needs at least two points")
        if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(X))):
            raise ValueError("dataset entries must be finite")
        Z.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "X", X)

    @property
    def N(self):
        return self.Z.shape[0]

    @property
    def d(self):
        return self.Z.shape[1]

    @property
    def D(self):
        return self.X.shape[1]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"z{i + 1}" for i in range(self.d)] + [f"x{i + 1}" for i in range(self.D)])
        for z, x in zip(self.Z, self.X):
            w.writerow([repr(float(v)) for v in z] + [repr(float(v)) for v in x])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        header = rows[0]
        d = sum(1 for h in header if h.startswith("z"))
        if header[:d] != [f"z{i + 1}" for i in range(d)] or header[d:] != [
            f"x{i + 1}" for i in range(len(header) - d)
        ]:
            raise ValueError("dataset CSV header must be z1..zd,x1..xD")
        arr = np.array([[float(v) for v in r] for r in rows[1:] if r])
        return cls(arr[:, :d], arr[:, d:])


@dataclass(frozen=True)
class StochasticJacobian:
    """Gaussian Jacobian with independent rows ``J[j] ~ N(mean[j], row_cov)``."""

    mean: np.ndarray
    row_cov: np.ndarray
    ambient_dim: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.row_cov, dtype=float)
        d = mean.shape[1]
        if cov.shape != (d, d):
            raise ValueError(f"row covariance must be {d}x{d}")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov)[0] < -1e-10 * max(np.trace(np.abs(cov)), 1e-300):
            raise ValueError("row covariance is not PSD")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "row_cov", cov)
        object.__setattr__(self, "ambient_dim", int(self.ambient_dim))

    @property
    def d(self):
        return self.mean.shape[1]

    @classmethod
    def deterministic(cls, J):
        J = np.asarray(J, dtype=float)
        return cls(J, np.zeros((J.shape[1], J.shape[1])), J.shape[0])


def clamp_psd(S, floor=-1e-10, scale=0.0):
    """Symmetrize a stack of matrices and zero eigenvalues in ``[floor * s, 0)``.

    ``s`` is the larger of the trace and ``scale``; pass the magnitude of the
    terms that were subtracted to form ``S`` so round-off is judged against it.
    """
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    w, V = np.linalg.eigh(S)
    tr = np.maximum(np.abs(np.trace(S, axis1=-2, axis2=-1)), max(scale, 1e-300))[..., None]
    if np.any(w < floor * tr):
        from ..errors import MetricValidationError

        raise MetricValidationError(f"covariance not PSD: eigenvalue {w.min():.3e}")
    w = np.maximum(w, 0.0)
    return np.einsum("...ik,...k,...jk->...ij", V, w, V)


class FittedModel:
    """Interface shared by all regressors.

    Subclasses implement :meth:`predict`, :meth:`mean_jacobian` and
    :meth:`mean_gram`; stochastic models also override :meth:`row_cov`.
    """

    model_type = "base"
    latent_dim: int
    ambient_dim: int

    def predict(self, Z):
        raise NotImplementedError

    def mean_jacobian(self, Z):
        """``E[J]`` at each point, shape ``(m, D, d)``."""
        raise NotImplementedError

    def mean_gram(self, Z):
        """``E[J]^T E[J] / D`` at each point, shape ``(m, d, d)``."""
        J = self.mean_jacobian(Z)
        return np.swapaxes(J, 1, 2) @ J / self.ambient_dim

    def row_cov(self, Z):
        Z = np.atleast_2d(Z)
        return np.zeros((Z.shape[0], self.latent_dim, self.latent_dim))

    @property
    def is_stochastic(self):
        return False

    def jacobian(self, z):
        z = np.asarray(z, dtype=float)[None, :]
        return StochasticJacobian(self.mean_jacobian(z)[0], self.row_cov(z)[0], self.ambient_dim)

    def expected_metric_batch(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return self.mean_gram(Z) + self.row_cov(Z)

    def expected_metric_derivative(self, Z):
        return None

    def metric_field(self):
        """Expected metric as a :class:`MetricField` (the pull-back when deterministic)."""
        deriv = None
        if type(self).expected_metric_derivative is not FittedModel.expected_metric_derivative:
            deriv = self.expected_metric_derivative
        return MetricField(self.expected_metric_batch, self.latent_dim, deriv, name=self.model_type)
