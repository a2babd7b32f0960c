import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from rayforge.core.errors import ParameterOutOfIntervalError, PointOutsideDomainError, TrappedRayError
from rayforge.core.flow import MagneticFlow, PhasePoint, cumulative_integral, null_lift, trace_rows
from rayforge.core.manifold import OneFormField
from rayforge.core.transform import fan_points

from .helpers import make_system


def chord_exit_time(x, v):
    b = x @ v
    return -b + np.sqrt(b * b - (x @ x - 1.0))


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.8), st.floats(min_value=0.0, max_value=2 * np.pi),
       st.floats(min_value=0.0, max_value=2 * np.pi))
def test_straight_line_exit_time(r, phi, alpha):
    system = make_system()
    x = r * np.array([np.cos(phi), np.sin(phi)])
    v = np.array([np.cos(alpha), np.sin(alpha)])
    kappa = MagneticFlow(system).exit_time(PhasePoint(x, v), h=1e-2)
    assert kappa == pytest.approx(chord_exit_time(x, v), abs=1e-9)


def test_boundary_start_exit_time_is_the_chord(euclid):
    x = np.array([1.0, 0.0])
    v = np.array([-np.cos(0.4), np.sin(0.4)])
    kappa = MagneticFlow(euclid).exit_time(PhasePoint(x, v), h=1e-2)
    assert kappa == pytest.approx(2.0 * np.cos(0.4), abs=1e-9)


def test_constant_field_ray_follows_its_circle(field_05):
    # radius 2 circle centred at (0, 2); |x(s)| = 4 sin(s / 4)
    flow = MagneticFlow(field_05)
    trace = flow.integrate_magnetic_geodesic(PhasePoint(np.zeros(2), np.array([1.0, 0.0])))
    assert trace.exited
    assert trace.exit_time == pytest.approx(4.0 * np.arcsin(0.25), abs=1e-7)
    expected = np.stack([2.0 * np.sin(trace.s / 2.0), 2.0 - 2.0 * np.cos(trace.s / 2.0)], axis=-1)
    assert_allclose(trace.x, expected, atol=1e-7)


def test_trace_stays_unit_and_inside(hyperbolic):
    flow = MagneticFlow(hyperbolic, {"flow": {"step": 5e-3}})
    start = PhasePoint.unit(hyperbolic, [0.1, -0.2], [0.3, 1.0])
    trace = flow.integrate_magnetic_geodesic(start)
    assert_allclose(hyperbolic.norm(trace.x, trace.v), 1.0, atol=1e-12)
    assert np.all(hyperbolic.domain.level(trace.x[:-1]) <= 0.0)
    assert abs(float(hyperbolic.domain.level(trace.x[-1]))) < 1e-8


def test_enter_time_of_a_straight_line(euclid):
    x = np.array([0.2, 0.1])
    v = np.array([0.0, 1.0])
    sigma = MagneticFlow(euclid).enter_time(PhasePoint(x, v), h=1e-2)
    assert sigma == pytest.approx(-chord_exit_time(x, -v), abs=1e-9)


def test_entry_point_flows_through_the_whole_chord(field_05):
    flow = MagneticFlow(field_05, {"flow": {"step": 2e-3}})
    p = PhasePoint(np.array([0.1, -0.3]), np.array([0.6, 0.8]))
    kappa = flow.exit_time(p)
    sigma = flow.enter_time(p)
    assert sigma < 0.0 < kappa

    back = flow.reversed().integrate_magnetic_geodesic(PhasePoint(p.x, -p.v))
    entry = PhasePoint(back.x[-1], -back.v[-1])
    assert flow.exit_time(entry) == pytest.approx(kappa - sigma, abs=1e-6)


def test_glancing_and_outward_starts_exit_immediately(euclid):
    flow = MagneticFlow(euclid)
    x = np.array([[1.0, 0.0], [1.0, 0.0]])
    v = np.array([[0.0, 1.0], [1.0, 0.0]])
    bundle = flow.trace_batch(x, v)
    assert_allclose(bundle.end_times, 0.0)
    assert bundle.glancing.tolist() == [True, False]
    assert bundle.exited.all()


def test_batch_matches_single_rays(field_05):
    flow = MagneticFlow(field_05, {"flow": {"step": 5e-3}})
    x = np.array([[0.0, 0.0], [0.3, 0.4], [-0.5, 0.1]])
    v = np.array([[1.0, 0.0], [0.0, -1.0], [0.6, 0.8]])
    batch = flow.exit_times(x, v)
    single = [flow.exit_time(PhasePoint(x[i], v[i])) for i in range(3)]
    assert_allclose(batch, single, atol=1e-14)


def test_trapped_ray_is_reported():
    system = make_system(omega=OneFormField.constant_field(2.0))
    flow = MagneticFlow(system, {"flow": {"s_max_factor": 5.0}})
    p = PhasePoint(np.array([0.0, -0.2]), np.array([1.0, 0.0]))
    with pytest.raises(TrappedRayError) as info:
        flow.exit_time(p, h=1e-2)
    assert info.value.exit_code == 3

    bundle = flow.trace_batch(p.x[None], p.v[None], h=1e-2, raise_trapped=False)
    assert bundle.trapped[0]
    assert not bundle.exited[0]


def test_start_outside_the_domain_raises(euclid):
    with pytest.raises(PointOutsideDomainError):
        MagneticFlow(euclid).exit_time(PhasePoint(np.array([1.5, 0.0]), np.array([1.0, 0.0])))


def test_shift_along_a_straight_line(euclid):
    flow = MagneticFlow(euclid)
    p = PhasePoint(np.array([-0.2, 0.1]), np.array([0.8, 0.6]))
    q = flow.shift(p, 0.3)
    assert_allclose(q.x, p.x + 0.3 * p.v, atol=1e-12)
    assert_allclose(q.v, p.v, atol=1e-12)
    assert flow.shift(p, 0.0) is p


def test_shift_outside_the_interval_raises(euclid):
    flow = MagneticFlow(euclid)
    p = PhasePoint(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ParameterOutOfIntervalError):
        flow.shift(p, -0.1)
    with pytest.raises(ParameterOutOfIntervalError):
        flow.shift(p, 1.5)


def test_null_lift_without_field_is_arc_length(euclid):
    trace = MagneticFlow(euclid).integrate_magnetic_geodesic(
        PhasePoint(np.array([0.0, -0.5]), np.array([0.0, 1.0])), h=1e-2)
    lifted = null_lift(trace, euclid, t0=0.7)
    assert_allclose(lifted.t, 0.7 + lifted.s, atol=1e-14)
    assert lifted.t0 == 0.7


def test_null_lift_subtracts_the_one_form(field_05):
    trace = MagneticFlow(field_05).integrate_magnetic_geodesic(
        PhasePoint(np.zeros(2), np.array([1.0, 0.0])), h=1e-2)
    lifted = null_lift(trace, field_05)
    omega = field_05.omega_of(trace.x, trace.v)
    expected = trace.s - cumulative_integral(omega, trace.s)
    assert_allclose(lifted.t, expected, atol=1e-14)
    assert np.all(np.diff(lifted.t) > 0.0)


def test_cumulative_integral_is_exact_for_quadratics():
    s = np.linspace(0.0, 1.3, 41)
    assert_allclose(cumulative_integral(3.0 * s ** 2, s), s ** 3, atol=1e-12)
    assert_allclose(cumulative_integral(np.ones(2), np.array([0.0, 0.5])), [0.0, 0.5])
    assert_allclose(cumulative_integral(np.ones(1), np.array([0.0])), [0.0])


def test_trace_rows(euclid):
    trace = MagneticFlow(euclid).integrate_magnetic_geodesic(
        PhasePoint(np.zeros(2), np.array([1.0, 0.0])), h=0.1)
    rows = trace_rows(trace)
    assert len(rows) == trace.sample_count
    assert list(rows[0]) == ["s", "x1", "x2", "v1", "v2", "t"]
    assert np.isnan(rows[0]["t"])
    assert rows[-1]["x1"] == pytest.approx(1.0, abs=1e-9)
    assert trace_rows(null_lift(trace, euclid))[-1]["t"] == pytest.approx(1.0, abs=1e-9)


def circle_point(start, b, s):
    """Exact constant-field orbit: ``x0 + (sin(bs) v0 + (1 - cos(bs)) J v0) / b``."""
    turned = np.array([-start.v[1], start.v[0]])
    return start.x + (np.sin(b * s) * start.v + (1.0 - np.cos(b * s)) * turned) / b


def test_rk4_error_drops_sixteenfold_when_the_step_halves():
    # radius 1/2 orbit centred at (0, 0.05), well inside the disk
    b = 2.0
    flow = MagneticFlow(make_system(omega=OneFormField.constant_field(b)))
    start = PhasePoint(np.array([0.0, -0.2]), np.array([1.0, 0.0]))

    def error(h):
        trace = flow.integrate_magnetic_geodesic(start, h=h, s_max=10.0, s_stop=3.0)
        assert trace.s[-1] == pytest.approx(3.0, abs=1e-12)
        return np.linalg.norm(trace.x[-1] - circle_point(start, b, trace.s[-1]))

    coarse, fine = error(0.05), error(0.025)
    assert fine < coarse < 1e-4
    assert coarse / fine == pytest.approx(16.0, rel=0.2)


@pytest.mark.parametrize("s", [0.1, 0.4, 0.8])
def test_exit_time_decreases_along_the_flow(field_05, s):
    flow = MagneticFlow(field_05, {"flow": {"step": 2e-3}})
    p = PhasePoint(np.array([0.1, -0.3]), np.array([0.6, 0.8]))
    kappa = flow.exit_time(p)
    assert kappa > 1.0
    assert flow.exit_time(flow.shift(p, s)) == pytest.approx(kappa - s, abs=1e-8)


def test_exit_point_moves_continuously_with_the_start(field_05):
    flow = MagneticFlow(field_05, {"flow": {"step": 2e-3}})

    def exit_point(eps):
        x, v = fan_points(field_05, np.array([0.3 + eps]), np.array([0.4 - eps]))
        return flow.integrate_magnetic_geodesic(PhasePoint(x[0], v[0])).x[-1]

    base = exit_point(0.0)
    gaps = np.array([np.linalg.norm(exit_point(eps) - base) for eps in (1e-2, 1e-3, 1e-4)])
    assert gaps[0] > gaps[1] > gaps[2] > 0.0
    assert np.all(gaps / np.array([1e-2, 1e-3, 1e-4]) < 10.0)


@pytest.mark.parametrize("h, tol", [(1e-2, 1e-9), (5e-2, 1e-6)])
def test_null_lift_under_a_constant_field(field_05, h, tol):
    # along the b = 0.5 circle through the origin, omega(x') = (1 - cos(s/2)) / 2
    trace = MagneticFlow(field_05).integrate_magnetic_geodesic(
        PhasePoint(np.zeros(2), np.array([1.0, 0.0])), h=h)
    lifted = null_lift(trace, field_05, t0=0.25)
    assert_allclose(lifted.t, 0.25 + 0.5 * trace.s + np.sin(0.5 * trace.s), atol=tol)
    kappa = 4.0 * np.arcsin(0.25)
    assert lifted.t[-1] == pytest.approx(0.25 + 0.5 * kappa + np.sin(0.5 * kappa), abs=tol)


def test_exit_time_vanishes_monotonically_at_glancing(field_05):
    # near-glancing chords behave like 2 delta / (1 -+ b) depending on the bending side
    flow = MagneticFlow(field_05, {"flow": {"step": 2e-3}})
    delta = np.geomspace(0.3, 1e-3, 12)
    limits = []
    for side in (1.0, -1.0):
        alpha = side * (0.5 * np.pi - delta)
        x, v = fan_points(field_05, np.full(len(delta), 0.7), alpha)
        kappa = flow.exit_times(x, v)
        assert np.all(kappa > 0.0)
        assert np.all(np.diff(kappa) < 0.0)
        ratio = kappa / np.cos(alpha)
        assert np.all((ratio > 1.2) & (ratio < 4.5))
        limits.append(ratio[-1])
    assert_allclose(sorted(limits), [4.0 / 3.0, 4.0], rtol=1e-2)
