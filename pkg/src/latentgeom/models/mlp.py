"""Feed-forward tanh networks with hand-written backpropagation.

Weights are stored as ``(out, in)`` matrices. Hidden layers use ``tanh``;
the output layer is linear.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from .base import FittedModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpParams:
    weights: tuple
    biases: tuple
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation != "tanh":
            raise ValueError("only tanh activations are supported")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != b.shape[0]:
                raise ValueError("bias length must match layer width")
        for W0, W1 in zip(self.weights[:-1], self.weights[1:]):
            if W1.shape[1] != W0.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")

    @property
    def widths(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @classmethod
    def init(cls, widths, rng):
        Ws, bs = [], []
        for n_in, n_out in zip(widths[:-1], widths[1:]):
            Ws.append(rng.standard_normal((n_out, n_in)) * np.sqrt(1.0 / n_in))
            bs.append(np.zeros(n_out))
        return cls(tuple(Ws), tuple(bs))


def _hidden(p, Z):
    """Post-activation values of every hidden layer."""
    hs = []
    h = Z
    for W, b in zip(p.weights[:-1], p.biases[:-1]):
        h = np.tanh(h @ W.T + b)
        hs.append(h)
    return hs


def mlp_forward(p, z):
    z = np.asarray(z, dtype=float)
    Z = np.atleast_2d(z)
    hs = _hidden(p, Z)
    h = hs[-1] if hs else Z
    out = h @ p.weights[-1].T + p.biases[-1]
    return out[0] if z.ndim == 1 else out


def _inner_jacobian(p, Z):
    """Jacobian of the last hidden layer, shape ``(m, width, d)``; forward mode."""
    hs = _hidden(p, Z)
    T = np.broadcast_to(np.eye(Z.shape[1]), (Z.shape[0], Z.shape[1], Z.shape[1]))
    for W, h in zip(p.weights[:-1], hs):
        T = (1.0 - h**2)[:, :, None] * np.matmul(W, T)
    return T


def mlp_jacobian_batch(p, Z):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return np.matmul(p.weights[-1], _inner_jacobian(p, Z))


def _inner_second_order(p, Z):
    """Last hidden layer Jacobian ``T`` and its derivative ``H[m, w, i, k] = dT[m, w, i]/dz_k``."""
    hs = _hidden(p, Z)
    m, d = Z.shape
    T = np.broadcast_to(np.eye(d), (m, d, d))
    H = np.zeros((m, d, d, d))
    for W, h in zip(p.weights[:-1], hs):
        A = np.matmul(W, T)
        dA = np.matmul(W, H.reshape(m, -1, d * d)).reshape(m, -1, d, d)
        s1 = 1.0 - h**2
        s2 = -2.0 * h * s1
        T = s1[:, :, None] * A
        H = s1[:, :, None, None] * dA + s2[:, :, None, None] * A[:, :, :, None] * A[:, :, None, :]
    return T, H


def mlp_hessian_batch(p, Z):
    """Second derivatives ``d^2 f_j / dz_i dz_k``, shape ``(m, D, d, d)``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    _, H = _inner_second_order(p, Z)
    m, w, d, _ = H.shape
    return np.matmul(p.weights[-1], H.reshape(m, w, d * d)).reshape(m, -1, d, d)


def gram_derivative(J, H, D):
    """``d(J^T J / D)/dz_k`` from ``J`` (m, D, d) and ``H = dJ/dz`` (m, D, d, d)."""
    d = J.shape[2]
    out = np.empty(J.shape[:1] + (d, d, d))
    for k in range(d):
        X = np.swapaxes(H[..., k], 1, 2) @ J
        out[..., k] = (X + np.swapaxes(X, 1, 2)) / D
    return out


def _backprop(p, Z, grad_out):
    """Parameter gradients given ``dLoss/dOutput`` for a batch."""
    hs = _hidden(p, Z)
    acts = [Z] + hs
    gW, gb = [None] * len(p.weights), [None] * len(p.weights)
    delta = grad_out
    for layer in range(len(p.weights) - 1, -1, -1):
        gW[layer] = delta.T @ acts[layer]
        gb[layer] = delta.sum(0)
        if layer > 0:
            delta = (delta @ p.weights[layer]) * (1.0 - acts[layer] ** 2)
    return gW, gb


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(x) for x in params]
        self.v = [np.zeros_like(x) for x in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for x, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            x -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_network(params, Z, loss_and_grad, epochs, lr, batch_size, rng):
    """Mini-batch Adam on a loss defined on network outputs.

    ``loss_and_grad(out, idx)`` returns the batch loss (a sum over the batch)
    and its gradient with respect to ``out``. Returns the trained parameters
    and the per-epoch mean loss.
    """
    Ws = [W.copy() for W in params.weights]
    bs = [b.copy() for b in params.biases]
    opt = _Adam(Ws + bs, lr)
    N = Z.shape[0]
    history = []
    for epoch in range(epochs):
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, batch_size):
            idx = order[start:start + batch_size]
            cur = MlpParams(tuple(Ws), tuple(bs))
            out = mlp_forward(cur, Z[idx])
            loss, g_out = loss_and_grad(out, idx)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}; try a smaller learning rate than {lr}"
                )
            total += loss
            gW, gb = _backprop(cur, Z[idx], g_out / len(idx))
            opt.step(Ws + bs, gW + gb)
        history.append(total / N)
    return MlpParams(tuple(Ws), tuple(bs)), np.array(history)


class MLPModel(FittedModel):
    """Deterministic decoder ``f = mlp(z)`` (the autoencoder mean)."""

    model_type = "mlp"

    def __init__(self, params, history=None, seed=None):
        self.params = params
        self.history = history
        self.seed = seed
        self.latent_dim = params.widths[0]
        self.ambient_dim = params.widths[-1]
        W = params.weights[-1]
        self._gram = W.T @ W

    def predict(self, Z):
        return mlp_forward(self.params, Z)

    def mean_jacobian(self, Z):
        return mlp_jacobian_batch(self.params, Z)

    def mean_gram(self, Z):
        T = _inner_jacobian(self.params, np.atleast_2d(np.asarray(Z, dtype=float)))
        return np.swapaxes(T, 1, 2) @ (self._gram @ T) / self.ambient_dim

    def expected_metric_derivative(self, Z):
        T, H = _inner_second_order(self.params, np.atleast_2d(np.asarray(Z, dtype=float)))
        # the output layer enters only through W^T W
        S = self._gram @ T
        d = T.shape[2]
        out = np.empty(T.shape[:1] + (d, d, d))
        for k in range(d):
            X = np.swapaxes(H[..., k], 1, 2) @ S
            out[..., k] = (X + np.swapaxes(X, 1, 2)) / self.ambient_dim
        return out


def mlp_jacobian(p, z):
    from .base import StochasticJacobian

    return StochasticJacobian.deterministic(mlp_jacobian_batch(p, np.asarray(z, float)[None, :])[0])


def mlp_train(data, widths=None, epochs=2000, lr=1e-3, batch_size=32, seed=0):
    """Fit ``Z -> X`` by mean squared error."""
    widths = list(widths) if widths is not None else [data.d, 64, 64, data.D]
    if widths[0] != data.d or widths[-1] != data.D:
        raise ValueError(f"widths must run from {data.d} to {data.D}, got {widths}")
    rng = np.random.default_rng(seed)
    params = MlpParams.init(widths, rng)
    X = data.X
    D = data.D

    def mse(out, idx):
        r = out - X[idx]
        with np.errstate(over="ignore"):  # overflow surfaces as a divergence error
            return float((r**2).sum() / D), 2.0 * r / D

    params, history = train_network(params, data.Z, mse, epochs, lr, batch_size, rng)
    log.info("mlp_train: final mse %.5g", history[-1])
    return MLPModel(params, history, seed)
