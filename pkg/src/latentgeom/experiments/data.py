"""The noisy circle embedded in a high-dimensional space."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..geometry import DiscreteCurve
from ..models.base import Dataset


@dataclass(frozen=True)
class CircleDatasetSpec:
    N: int = 200
    D: int = 1000
    noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.N < 4 or self.D < 3 or self.noise < 0:
            raise ValueError(f"invalid circle dataset spec {self}")

    def to_dict(self):
        return asdict(self)


def generate_circle_data(spec=CircleDatasetSpec()):
    """Angles uniform on ``[0, 2 pi]`` mapped to ``(cos t, sin t, cos t sin t, 0, ...)``
    plus isotropic Gaussian noise; the latents are the first two noisy coordinates."""
    rng = np.random.default_rng(spec.seed)
    t = rng.uniform(0.0, 2.0 * np.pi, spec.N)
    X = np.zeros((spec.N, spec.D))
    X[:, 0] = np.cos(t)
    X[:, 1] = np.sin(t)
    X[:, 2] = np.cos(t) * np.sin(t)
    X += spec.noise * rng.standard_normal((spec.N, spec.D))
    return Dataset(X[:, :2].copy(), X)


def ground_truth_geodesic(u, v, K=64):
    """Shorter unit-circle arc between the radial projections of ``u`` and ``v``.

    Returns ``(curve, length)``; antipodal endpoints are joined counterclockwise.
    Coincident projections give a constant curve of length zero.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(u) == 0 or np.linalg.norm(v) == 0:
        raise ValueError("cannot project the origin onto the circle")
    a = np.arctan2(u[1], u[0])
    b = np.arctan2(v[1], v[0])
    delta = np.mod(b - a, 2.0 * np.pi)
    if delta > np.pi:
        delta -= 2.0 * np.pi
    elif delta == -np.pi:
        delta = np.pi
    s = np.linspace(0.0, 1.0, K + 2)
    th = a + s * delta
    return DiscreteCurve(np.column_stack([np.cos(th), np.sin(th)])), float(abs(delta))
