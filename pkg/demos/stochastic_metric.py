"""Moments of the Wishart metric, expected distances and the energy/length split.

    python3 demos/stochastic_metric.py
"""

import numpy as np

from latentgeom.geometry import DiscreteCurve
from latentgeom.models.base import StochasticJacobian
from latentgeom.stochastic import (
    GaussianJacobianField,
    RngStream,
    WishartMetricLaw,
    energy_length_decomposition,
    expected_metric,
    expected_sqrtdet_central,
    metric_variance,
    nakagami_expected_distance,
    reparametrize_constant_expected_speed,
    sample_metric,
)

rng = np.random.default_rng(0)
for D in (10, 100, 1000):
    j = StochasticJacobian(rng.normal(size=(D, 2)), np.array([[1.0, 0.3], [0.3, 0.5]]), D)
    M = sample_metric(WishartMetricLaw.from_jacobian(j), RngStream(D), 20_000)
    print(f"D={D:5d}  E[M]_00 closed {expected_metric(j)[0, 0]:.4f} mc {M[:, 0, 0].mean():.4f}   "
          f"Var[M]_00 closed {metric_variance(j)[0, 0]:.2e} mc {M[:, 0, 0].var():.2e}")
print("the variance shrinks like 1/D: in high dimensions the metric concentrates on its mean")

S = np.eye(2)
for D in (2, 10, 1000):
    ratio = expected_sqrtdet_central(WishartMetricLaw(D, S))
    dist = nakagami_expected_distance([0, 0], [1, 0], S, D)
    print(f"D={D:5d}  E[sqrt det M]/sqrt det Sigma = {ratio:.4f}   E[dist] = {dist:.4f}")


def cov(Z):
    s = 1.0 + 0.5 * np.sin(2 * Z[:, 0])
    return s[:, None, None] * np.eye(2)


field = GaussianJacobianField(lambda Z: np.zeros((len(Z), 2, 2)), cov, 100)
c = DiscreteCurve.straight([-1.0, 0.0], [1.0, 0.5], 30)
c = reparametrize_constant_expected_speed(field, c)
r = energy_length_decomposition(field, c, 5000, RngStream(1))
print(f"E[energy] {r['expected_energy']:.4f} = E[L]^2/2 {r['expected_length'] ** 2 / 2:.4f}"
      f" + half integrated variance {0.5 * r['length_variance_integral']:.4f}"
      f"  (residual {r['identity_residual']:.1e}, combined SE {r['combined_se']:.1e})")
