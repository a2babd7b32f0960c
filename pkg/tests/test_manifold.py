import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from rayforge.core.errors import NonTangentVectorError, NonUnitVectorError, PointOutsideDomainError
from rayforge.core.manifold import ChartDomain, MetricField, OneFormField, orthonormal_frame

from .helpers import make_system

angles = st.floats(min_value=0.0, max_value=2.0 * np.pi)
radii = st.floats(min_value=0.0, max_value=0.55)


def test_euclidean_metric_and_christoffel(euclid):
    x = np.array([0.3, -0.1])
    assert_allclose(euclid.metric_eval(x), np.eye(2))
    assert_allclose(euclid.christoffel(x), 0.0)


def test_grid_realization_of_euclidean_metric(euclid):
    gridded = euclid.on_grid(32)
    x = np.random.default_rng(0).uniform(-0.6, 0.6, size=(20, 2))
    assert_allclose(gridded.metric.value(x), np.broadcast_to(np.eye(2), (20, 2, 2)), atol=1e-6)
    assert_allclose(gridded.christoffel_unchecked(x), 0.0, atol=1e-6)


def test_metric_eval_outside_domain_raises(euclid):
    with pytest.raises(PointOutsideDomainError):
        euclid.metric_eval(np.array([1.2, 0.0]))


def test_conformal_christoffel_matches_closed_form():
    metric = MetricField.conformal_gaussian(0.3, (0.1, 0.0), 0.5)
    system = make_system(metric)
    x = np.array([0.2, -0.3])
    lam = metric.value(x)[0, 0]
    grad = metric.derivative(x)[:, 0, 0]
    expected = np.zeros((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                expected[k, i, j] = ((k == j) * grad[i] + (k == i) * grad[j] - (i == j) * grad[k]) / (2 * lam)
    assert_allclose(system.christoffel(x), expected, atol=1e-13)


def test_constant_field_force_direction():
    system = make_system(omega=OneFormField.constant_field(0.5))
    force = system.lorentz_force(np.array([0.1, 0.2]), np.array([1.0, 0.0]))
    assert_allclose(force, [0.0, 0.5], atol=1e-14)


def test_exterior_derivative_matches_finite_differences():
    omega = OneFormField.swirl(0.4, 0.5)
    system = make_system(omega=omega)
    x = np.array([0.15, -0.25])
    eps = 1e-6
    d1 = (omega.value(x + [eps, 0]) - omega.value(x - [eps, 0])) / (2 * eps)
    d2 = (omega.value(x + [0, eps]) - omega.value(x - [0, eps])) / (2 * eps)
    assert system.domega(x)[0, 1] == pytest.approx(d1[1] - d2[0], abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(angles, radii, angles)
def test_lorentz_force_is_g_antisymmetric(phi, r, alpha):
    system = make_system(MetricField.hyperbolic(), OneFormField.swirl(0.3, 0.5), ChartDomain.disk(0.6))
    x = r * np.array([np.cos(phi), np.sin(phi)])
    v = np.array([np.cos(alpha), np.sin(alpha)])
    assert abs(float(system.inner(x, system.lorentz_force(x, v), v))) < 1e-10


def test_unit_disk_convexity_margin_is_one(euclid):
    sweep = euclid.convexity_sweep()
    assert sweep.strictly_convex
    assert sweep.minimum == pytest.approx(1.0, abs=1e-12)


def test_constant_field_lowers_the_margin(field_05):
    assert field_05.convexity_sweep().minimum == pytest.approx(0.5, abs=1e-12)
    x, _, tau = field_05.boundary_frame(np.array(0.7))
    assert field_05.convexity_margin(0.7, tau) == pytest.approx(0.5, abs=1e-12)
    assert field_05.convexity_margin(0.7, -tau) == pytest.approx(1.5, abs=1e-12)


def test_strong_field_breaks_convexity():
    system = make_system(omega=OneFormField.constant_field(2.0))
    assert not system.convexity_sweep().strictly_convex


def test_flat_super_ellipse_is_not_strictly_convex():
    system = make_system(domain=ChartDomain.super_ellipse(4.0, (1.0, 0.75)))
    sweep = system.convexity_sweep()
    assert sweep.minimum == pytest.approx(0.0, abs=1e-12)
    assert not sweep.strictly_convex


def test_convexity_margin_checks_its_vector(euclid):
    x, nu, tau = euclid.boundary_frame(np.array(1.1))
    with pytest.raises(NonTangentVectorError):
        euclid.convexity_margin(1.1, nu)
    with pytest.raises(NonUnitVectorError):
        euclid.convexity_margin(1.1, 2.0 * tau)


def test_boundary_frame_is_orthonormal(hyperbolic):
    thetas = np.linspace(0.0, 2.0 * np.pi, 13)
    x, nu, tau = hyperbolic.boundary_frame(thetas)
    assert_allclose(hyperbolic.norm(x, nu), 1.0, atol=1e-12)
    assert_allclose(hyperbolic.norm(x, tau), 1.0, atol=1e-12)
    assert_allclose(hyperbolic.inner(x, nu, tau), 0.0, atol=1e-12)
    assert np.all(np.sum(nu * x, axis=-1) < 0)


def test_sup_omega_norm_for_constant_field(field_05):
    assert field_05.sup_omega_norm() == pytest.approx(0.25, abs=1e-12)


def test_orthonormal_frame(hyperbolic):
    x = np.array([[0.1, 0.2], [-0.3, 0.05]])
    e1, e2 = orthonormal_frame(hyperbolic, x)
    assert_allclose(hyperbolic.inner(x, e1, e1), 1.0, atol=1e-12)
    assert_allclose(hyperbolic.inner(x, e1, e2), 0.0, atol=1e-12)


def test_sample_interior_respects_margin():
    domain = ChartDomain.super_ellipse(2.0, (1.0, 0.5))
    pts = domain.sample_interior(np.random.default_rng(3), 100, margin=0.05)
    assert pts.shape == (100, 2)
    assert np.all(domain.boundary_distance(pts) < -0.05)


def test_invalid_domains_are_rejected():
    with pytest.raises(ValueError):
        ChartDomain.disk(-1.0)
    with pytest.raises(ValueError):
        ChartDomain.super_ellipse(1.5, (1.0, 1.0))
