"""A norm-preserving swirl that leaves the standard Gaussian invariant."""

from __future__ import annotations

import numpy as np
from scipy.stats import ks_2samp

from ..stochastic import RngStream


def swirl_transform(z):
    """Rotate each point by ``sin(pi |z|)`` radians about the origin."""
    Z = np.asarray(z, dtype=float)
    single = Z.ndim == 1
    Z = np.atleast_2d(Z)
    if Z.shape[1] != 2:
        raise ValueError("the swirl is defined for 2-d points")
    th = np.sin(np.pi * np.linalg.norm(Z, axis=1))
    c, s = np.cos(th), np.sin(th)
    out = np.column_stack([c * Z[:, 0] - s * Z[:, 1], s * Z[:, 0] + c * Z[:, 1]])
    return out[0] if single else out


def swirl_demo(n=10_000, seed=0):
    """Displacement statistics and per-coordinate KS tests between ``z`` and ``g(z)``."""
    gen = RngStream(seed).generator()
    Z = gen.standard_normal((n, 2))
    G = swirl_transform(Z)
    shift = np.linalg.norm(Z - G, axis=1)
    ks = [ks_2samp(Z[:, k], G[:, k]) for k in range(2)]
    return {
        "n": int(n),
        "seed": int(seed),
        "distance_shift_stats": {
            "mean": float(shift.mean()),
            "median": float(np.median(shift)),
            "max": float(shift.max()),
        },
        "max_norm_change": float(np.max(np.abs(np.linalg.norm(G, axis=1) - np.linalg.norm(Z, axis=1)))),
        "ks_statistic": [float(k.statistic) for k in ks],
        "ks_pvalue": [float(k.pvalue) for k in ks],
    }
