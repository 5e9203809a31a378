import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentgeom.errors import (
    DegenerateInputError,
    EvaluationError,
    MetricValidationError,
    SingularMetricError,
)
from latentgeom.geometry import (
    DiscreteCurve,
    MetricField,
    QuadratureRule,
    constant_field,
    curve_energy,
    curve_length,
    euclidean_field,
    geodesic_ode_residual,
    metric_derivative_fd,
    metric_inner,
    reparametrize_constant_speed,
    segment_lengths,
    validate_metric,
)


def bumpy_field():
    def fn(Z):
        r2 = (Z**2).sum(1)
        s = 1.0 + 3.0 * np.exp(-r2 / 0.3)
        M = np.zeros((len(Z), 2, 2))
        M[:, 0, 0] = s * (1 + 0.5 * Z[:, 1] ** 2)
        M[:, 1, 1] = s
        M[:, 0, 1] = M[:, 1, 0] = 0.2 * np.tanh(Z[:, 0])
        return M

    return MetricField(fn, 2, name="bumpy")


# metric_inner

def test_metric_inner_examples():
    I = np.eye(2)
    assert metric_inner(I, [1, 0], [0, 1]) == 0.0
    assert metric_inner(I, [3, 4], [3, 4]) == 25.0
    assert metric_inner(np.diag([2.0, 1.0]), [1, 1], [1, 1]) == 3.0


def test_metric_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        metric_inner(np.eye(2), [1, 0, 0], [1, 0])


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_metric_inner_symmetric(x):
    A = np.array(x[:4]).reshape(2, 2)
    M = A @ A.T
    u, v = np.array(x[4:5] + x[5:6]), np.array(x[5:6] + x[4:5])
    assert np.isclose(metric_inner(M, u, v), metric_inner(M, v, u), rtol=1e-12, atol=1e-9)


# validation

def test_validate_metric_symmetrizes_and_rejects():
    M = np.array([[1.0, 0.5 + 1e-12], [0.5, 1.0]])
    out = validate_metric(M)
    assert np.array_equal(out, out.T)
    with pytest.raises(MetricValidationError):
        validate_metric(np.array([[1.0, 0.6], [0.5, 1.0]]))
    with pytest.raises(MetricValidationError):
        validate_metric(np.diag([1.0, -0.1]))


def test_library_fields_pass_checks_on_random_points(rng):
    Z = rng.uniform(-2, 2, (1000, 2))
    for F in (euclidean_field(2), constant_field(np.diag([2.0, 0.5])), bumpy_field()):
        M = F.evaluate(Z)
        assert np.allclose(M, np.swapaxes(M, 1, 2))
        tr = np.trace(M, axis1=1, axis2=2)
        assert np.all(np.linalg.eigvalsh(M)[:, 0] >= -1e-10 * tr)


def test_nonfinite_metric_reports_parameter():
    F = MetricField(lambda Z: np.where((Z[:, 0] > 0.5)[:, None, None], np.nan, 1.0) * np.eye(2), 2)
    c = DiscreteCurve.straight([0, 0], [1, 0], 8)
    with pytest.raises(EvaluationError) as info:
        curve_length(F, c)
    assert info.value.t is not None and 0.4 < info.value.t <= 1.0


# length and energy

def test_length_energy_examples():
    c = DiscreteCurve.straight([0, 0], [1, 0], 8)
    E = euclidean_field()
    assert abs(curve_length(E, c) - 1.0) < 1e-9
    assert curve_length(constant_field(4 * np.eye(2)), c) == pytest.approx(2.0, abs=1e-12)
    assert curve_energy(E, c) == pytest.approx(0.5, abs=1e-12)
    assert curve_energy(constant_field(4 * np.eye(2)), c) == pytest.approx(2.0, abs=1e-12)
    bent = DiscreteCurve([[0, 0], [0.8, 0], [1, 0]])
    assert curve_energy(E, bent) > 0.5


def test_constant_metric_is_mahalanobis_polyline_length(rng):
    A = rng.normal(size=(2, 2))
    M = A @ A.T + 0.1 * np.eye(2)
    P = rng.normal(size=(7, 2))
    expected = sum(np.sqrt(d @ M @ d) for d in np.diff(P, axis=0))
    assert curve_length(constant_field(M), DiscreteCurve(P)) == pytest.approx(expected, rel=1e-12)


def test_trapezoid_rule_and_weights():
    for q in (QuadratureRule("trapezoid", 3), QuadratureRule("midpoint", 4)):
        _, w = q.nodes(0.25)
        assert w.sum() == pytest.approx(0.25)
    c = DiscreteCurve.straight([0, 0], [1, 1], 10)
    F = bumpy_field()
    fine = curve_length(F, c, QuadratureRule("midpoint", 64))
    assert curve_length(F, c, QuadratureRule("trapezoid", 4)) == pytest.approx(fine, rel=1e-3)


curves = st.lists(st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)), min_size=4, max_size=12)


@settings(max_examples=40, deadline=None)
@given(curves, st.floats(0.1, 10.0))
def test_cauchy_schwarz_and_scaling(pts, s):
    c = DiscreteCurve(np.array(pts), 0.0, 2.0)
    F = bumpy_field()
    L, E = curve_length(F, c), curve_energy(F, c)
    assert E >= L**2 / (2 * 2.0) * (1 - 1e-12)
    Fs = F.scaled(s)
    assert curve_length(Fs, c) == pytest.approx(np.sqrt(s) * L, rel=1e-10)
    assert curve_energy(Fs, c) == pytest.approx(s * E, rel=1e-10)


def _smooth_curve(n):
    t = np.linspace(0, 1, n)
    return np.column_stack([np.cos(2 * t) - 0.5, np.sin(3 * t)])


def test_length_invariant_under_reindexing():
    F = bumpy_field()
    fine = DiscreteCurve(_smooth_curve(400))
    L = curve_length(F, fine)
    # same image traversed with a nonuniform schedule
    s = np.linspace(0, 1, 400) ** 2
    t = s
    warped = DiscreteCurve(np.column_stack([np.cos(2 * t) - 0.5, np.sin(3 * t)]))
    assert curve_length(F, warped) == pytest.approx(L, rel=1e-3)


def test_energy_equals_bound_after_reparametrization():
    F = bumpy_field()
    c = DiscreteCurve(_smooth_curve(60) ** 1)
    r = reparametrize_constant_speed(F, c)
    L, E = curve_length(F, r), curve_energy(F, r)
    assert E == pytest.approx(L**2 / 2, rel=1e-3)


# reparametrization

def test_reparametrize_examples():
    E = euclidean_field()
    c = DiscreteCurve.straight([0, 0], [1, 0], 5)
    assert np.allclose(reparametrize_constant_speed(E, c).points, c.points, atol=1e-9)
    skew = DiscreteCurve([[0, 0], [0.9, 0], [1, 0]])
    out = reparametrize_constant_speed(E, skew)
    assert np.allclose(out.points[1], [0.5, 0], atol=1e-9)
    F = constant_field(np.diag([1.0, 9.0]))
    c = DiscreteCurve([[0, 0], [0.1, 0.5], [0.2, 0.6], [0.9, 0.7], [1, 1]])
    out = reparametrize_constant_speed(F, c)
    ell = segment_lengths(F, out)
    assert np.ptp(ell) / ell.mean() < 1e-3
    assert np.array_equal(out.start, c.start) and np.array_equal(out.end, c.end)


def test_reparametrize_bumpy_keeps_image():
    F = bumpy_field()
    c = DiscreteCurve(_smooth_curve(20))
    out = reparametrize_constant_speed(F, c)
    ell = segment_lengths(F, out)
    assert np.ptp(ell) / ell.mean() < 1e-3
    # every new knot lies on the original polyline
    from latentgeom.experiments.evaluation import _point_segment_dist

    assert _point_segment_dist(out.points, c.points).min(1).max() < 1e-12


def test_reparametrize_zero_length_raises():
    c = DiscreteCurve([[1, 1], [1, 1], [1, 1]])
    with pytest.raises(DegenerateInputError):
        reparametrize_constant_speed(euclidean_field(), c)


# curves

def test_curve_invariants_and_csv_roundtrip():
    c = DiscreteCurve.straight([0.1, 0.2], [1 / 3, 2 / 7], 5, a=-1.0, b=2.5)
    assert c.K == 5
    assert c.t[0] == -1.0 and c.t[-1] == 2.5 and np.all(np.diff(c.t) > 0)
    text = c.to_csv()
    assert text.splitlines()[0] == "t,z1,z2"
    back = DiscreteCurve.from_csv(text)
    assert np.array_equal(back.points, c.points) and back.a == c.a and back.b == c.b
    with pytest.raises(ValueError):
        DiscreteCurve([[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0


# derivatives and ODE residual

def test_fd_derivative_examples():
    assert np.abs(metric_derivative_fd(constant_field(np.eye(2)), np.array([0.3, 1.0]))).max() < 1e-10

    def diag_sq(Z):
        M = np.zeros((len(Z), 2, 2))
        M[:, 0, 0] = Z[:, 0] ** 2
        M[:, 1, 1] = 1.0
        return M

    D = metric_derivative_fd(MetricField(diag_sq, 2), np.array([2.0, 0.0]), h=1e-4)
    # vec index of M_11 is 0; column 0 is d/dz1
    assert D[0, 0] == pytest.approx(4.0, abs=1e-6)

    def quad(Z):
        a, b = Z[:, 0], Z[:, 1]
        M = np.zeros((len(Z), 2, 2))
        M[:, 0, 0] = 1 + a**2 + a * b
        M[:, 1, 1] = 2 + b**2
        M[:, 0, 1] = M[:, 1, 0] = 0.1 * a * b
        return M

    z = np.array([0.7, -0.4])
    exact = np.zeros((4, 2))
    exact[0] = [2 * z[0] + z[1], z[0]]
    exact[3] = [0, 2 * z[1]]
    exact[1] = exact[2] = [0.1 * z[1], 0.1 * z[0]]
    assert np.abs(metric_derivative_fd(MetricField(quad, 2), z, h=0.1) - exact).max() < 1e-12


def test_ode_residual_examples():
    E = euclidean_field()
    c = DiscreteCurve.straight([0, 0], [1, 2], 10)
    assert geodesic_ode_residual(E, c).max() < 1e-8
    kappa = 0.7
    t = np.linspace(0, 1, 21)
    par = DiscreteCurve(np.column_stack([t, kappa * t**2]))
    assert geodesic_ode_residual(E, par).max() == pytest.approx(2 * kappa, rel=1e-9)


def test_ode_residual_singular():
    F = MetricField(lambda Z: np.zeros((len(Z), 2, 2)), 2)
    with pytest.raises(SingularMetricError) as info:
        geodesic_ode_residual(F, DiscreteCurve.straight([0, 0], [1, 0], 4))
    assert info.value.min_eigenvalue is not None


def test_zero_residual_is_first_order_stationary():
    # great-circle-free check: straight line under a constant metric, energy change O(delta^2)
    F = constant_field(np.array([[2.0, 0.3], [0.3, 1.0]]))
    c = DiscreteCurve.straight([0, 0], [1, 1], 8)
    E0 = curve_energy(F, c)
    for delta in (1e-2, 1e-3):
        P = c.points.copy()
        P[4] += delta * np.array([0.6, -0.8])
        dE = curve_energy(F, DiscreteCurve(P)) - E0
        assert 0 <= dE < 50 * delta**2
