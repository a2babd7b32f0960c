import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.linalg import expm

from rayforge.core.connection import (ConnectionData, TransportSign, cocycle_defect, cocycle_defects,
                                      inverse_transport, parallel_transport, transport_pair)
from rayforge.core.errors import DimensionMismatchError, ParameterOutOfIntervalError, StepGridMismatchError
from rayforge.core.flow import MagneticFlow, PhasePoint
from rayforge.core.grids import BoxGrid
from rayforge.core.manifold import OneFormField

HIGGS = np.array([[0.3 + 0.2j, -0.5], [0.1j, -0.4]])
GAUGE = np.array([[[0.2, 0.1j], [0.0, -0.3]], [[-0.1j, 0.4], [0.25, 0.05j]]])


@pytest.fixture
def chord(euclid):
    flow = MagneticFlow(euclid)
    return flow.integrate_magnetic_geodesic(PhasePoint(np.array([-0.6, 0.0]), np.array([0.8, 0.6])))


@pytest.fixture
def magnetic_trace(field_05):
    flow = MagneticFlow(field_05)
    return flow.integrate_magnetic_geodesic(PhasePoint(np.array([0.1, -0.2]), np.array([0.0, 1.0])))


def test_constant_connection_transport_is_a_matrix_exponential(chord):
    conn = ConnectionData.constant_matrices(HIGGS, GAUGE)
    v = chord.v[0]
    c = HIGGS + v[0] * GAUGE[0] + v[1] * GAUGE[1]
    transport = parallel_transport(chord, conn)
    assert transport.final.shape == (2, 2)
    assert_allclose(transport.final, expm(-chord.exit_time * c), atol=1e-9)
    mid = len(chord.s) // 2
    assert_allclose(transport.samples[mid], expm(-chord.s[mid] * c), atol=1e-9)


def test_beam_sign_flips_the_exponent(chord):
    conn = ConnectionData.constant_diagonal([0.4j, -0.7])
    transport = parallel_transport(chord, conn, TransportSign.BEAM)
    assert_allclose(transport.final, expm(chord.exit_time * np.diag([0.4j, -0.7])), atol=1e-9)
    assert TransportSign.ATTENUATION.factor == -1.0
    assert TransportSign("beam").factor == 1.0


def test_inverse_transport_inverts(magnetic_trace):
    conn = ConnectionData.su2_gaussian(0.8, 0.5).with_omega(OneFormField.constant_field(0.5))
    forward = parallel_transport(magnetic_trace, conn)
    inverse = inverse_transport(magnetic_trace, conn)
    products = inverse.samples @ forward.samples
    assert_allclose(products, np.broadcast_to(np.eye(2), products.shape), atol=1e-9)


def test_su2_transport_is_unitary(magnetic_trace):
    conn = ConnectionData.su2_gaussian(0.8, 0.5)
    assert conn.unitary
    transport = parallel_transport(magnetic_trace, conn)
    assert transport.unitarity_defect() < 1e-9
    assert transport.min_abs_determinant() == pytest.approx(1.0, abs=1e-9)


def test_bundle_transport_matches_single_traces(field_05):
    flow = MagneticFlow(field_05, {"flow": {"step": 5e-3}})
    conn = ConnectionData.su2_gaussian(0.8, 0.5)
    x = np.array([[0.0, 0.0], [0.4, -0.1]])
    v = np.array([[1.0, 0.0], [0.0, 1.0]])
    forward, inverse = transport_pair(flow.trace_batch(x, v), conn)
    for i in range(2):
        trace = flow.integrate_magnetic_geodesic(PhasePoint(x[i], v[i]))
        assert_allclose(forward[i, -1], parallel_transport(trace, conn).final, atol=1e-13)
        assert_allclose(inverse[i, -1], inverse_transport(trace, conn).final, atol=1e-13)


def test_cocycle_defect_is_small(field_05):
    flow = MagneticFlow(field_05)
    conn = ConnectionData.su2_gaussian(0.8, 0.5)
    p = PhasePoint(np.array([0.0, -0.5]), np.array([0.6, 0.8]))
    assert cocycle_defect(flow, p, 0.4, 0.5, conn) < 1e-9

    x = np.array([[0.0, -0.5], [0.2, 0.3]])
    v = np.array([[0.6, 0.8], [-1.0, 0.0]])
    defects = cocycle_defects(flow, x, v, [0.4, 0.2], [0.5, 0.3], conn)
    assert defects.shape == (2,)
    assert np.all(defects < 1e-9)


def test_cocycle_split_outside_the_interval(euclid):
    flow = MagneticFlow(euclid)
    conn = ConnectionData.zero(2)
    p = PhasePoint(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ParameterOutOfIntervalError):
        cocycle_defect(flow, p, 0.6, 0.6, conn)
    with pytest.raises(ParameterOutOfIntervalError):
        cocycle_defect(flow, p, -0.1, 0.2, conn)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=-2.0, max_value=2.0), st.floats(min_value=-2.0, max_value=2.0))
def test_attenuation_is_affine_in_the_direction(a, b):
    conn = ConnectionData.su2_gaussian(0.8, 0.5).with_omega(OneFormField.constant_field(0.5))
    x = np.array([0.2, -0.1])
    v1 = np.array([1.0, 0.3])
    v2 = np.array([-0.4, 0.7])
    phi = conn.higgs(x)

    def linear(v):
        return conn.attenuation(x, v) - phi

    assert_allclose(linear(a * v1 + b * v2), a * linear(v1) + b * linear(v2), atol=1e-12)


def test_attenuation_subtracts_higgs_times_omega():
    omega = OneFormField.constant_field(0.5)
    conn = ConnectionData.constant_matrices(HIGGS, GAUGE).with_omega(omega)
    x = np.array([0.3, 0.4])
    v = np.array([0.6, -0.8])
    w = float(np.sum(omega.value(x) * v))
    expected = HIGGS + v[0] * GAUGE[0] + v[1] * GAUGE[1] - w * HIGGS
    assert_allclose(conn.attenuation(x, v), expected, atol=1e-14)
    assert_allclose(conn.effective_gauge(x)[0], GAUGE[0] - omega.value(x)[0] * HIGGS, atol=1e-14)


def test_endomorphism_attenuation_is_the_commutator():
    conn = ConnectionData.su2_gaussian(0.8, 0.5)
    x = np.array([0.1, 0.2])
    v = np.array([0.0, 1.0])
    a = conn.attenuation(x, v)
    w = np.array([[1.0, 2.0 - 1j], [0.5j, -3.0]])
    e = conn.endomorphism_attenuation(x, v)
    assert e.shape == (4, 4)
    assert_allclose(e @ w.reshape(4), (a @ w - w @ a).reshape(4), atol=1e-14)
    assert_allclose(e, -e.conj().T, atol=1e-14)


def test_skew_detection():
    assert ConnectionData.constant_diagonal([0.4, -0.7], skew=True).unitary
    assert not ConnectionData.constant_diagonal([0.4, -0.7]).unitary
    conn = ConnectionData.su2_gaussian(0.8, 0.5)
    assert conn.skew_defect(np.array([[0.0, 0.0], [0.3, -0.2]])) < 1e-14


def test_grid_connection_reproduces_constants():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 12)
    higgs = np.broadcast_to(HIGGS, grid.shape + (2, 2))
    gauge = np.broadcast_to(GAUGE, grid.shape + (2, 2, 2))
    conn = ConnectionData.from_grid(grid, higgs, gauge)
    x = np.array([[0.15, -0.35], [0.6, 0.1]])
    assert_allclose(conn.higgs(x), np.broadcast_to(HIGGS, (2, 2, 2)), atol=1e-12)
    assert_allclose(conn.gauge(x), np.broadcast_to(GAUGE, (2, 2, 2, 2)), atol=1e-12)
    with pytest.raises(DimensionMismatchError):
        ConnectionData.from_grid(grid, higgs[:-1])


def test_step_grid_mismatch(chord):
    broken = dataclasses.replace(chord, steps=chord.steps[:-1])
    with pytest.raises(StepGridMismatchError):
        parallel_transport(broken, ConnectionData.zero())
    with pytest.raises(StepGridMismatchError):
        inverse_transport(broken, ConnectionData.zero())


def test_dimension_errors():
    with pytest.raises(DimensionMismatchError):
        ConnectionData.constant_matrices(np.zeros((2, 3)))
    with pytest.raises(DimensionMismatchError):
        ConnectionData.constant_matrices(np.zeros((2, 2)), np.zeros((2, 3, 3)))
    with pytest.raises(DimensionMismatchError):
        ConnectionData.zero(2).attenuation(np.zeros(2), np.zeros(3))

    bad = ConnectionData(2, lambda x: np.zeros(np.shape(x)[:-1] + (3, 3)),
                         lambda x: np.zeros(np.shape(x)[:-1] + (2, 2, 2)))
    with pytest.raises(DimensionMismatchError):
        bad.attenuation(np.zeros(2), np.array([1.0, 0.0]))
