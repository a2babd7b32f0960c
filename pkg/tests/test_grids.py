import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from rayforge.core.grids import BoxGrid, SplineField, cubic_weights


def test_covering_grid_pads_the_box():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 17, pad=3)
    assert grid.shape == (17, 17)
    assert grid.spacing == pytest.approx(0.2)
    a1, _ = grid.axes()
    assert a1[3] == pytest.approx(-1.0)
    assert a1[-4] == pytest.approx(1.0)
    assert grid.nodes().shape == (17, 17, 2)


def test_covering_rejects_too_few_nodes():
    with pytest.raises(ValueError):
        BoxGrid.covering((0.0, 0.0), (1.0, 1.0), 6, pad=3)


def test_padded_keeps_the_lattice():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 17)
    bigger = grid.padded(2)
    assert bigger.shape == (21, 21)
    assert_allclose(bigger.nodes()[2:-2, 2:-2], grid.nodes(), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.999))
def test_cubic_weights_partition_unity(t):
    assert cubic_weights(t).sum() == pytest.approx(1.0, abs=1e-14)


def test_interpolation_reproduces_quadratics():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 24)

    def f(x):
        return 1.0 + 2.0 * x[..., 0] - x[..., 1] + 0.5 * x[..., 0] * x[..., 1] + x[..., 1] ** 2

    values = f(grid.nodes())[..., None]
    points = np.random.default_rng(0).uniform(-0.9, 0.9, size=(50, 2))
    assert_allclose(grid.interpolate(values, points)[:, 0], f(points), atol=1e-12)


def test_interpolation_matrix_rows_sum_to_one_inside():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 20)
    points = np.random.default_rng(1).uniform(-0.8, 0.8, size=(40, 2))
    matrix = grid.interpolation_matrix(points)
    assert matrix.shape == (40, grid.size)
    assert_allclose(np.asarray(matrix.sum(axis=1)).ravel(), 1.0, atol=1e-14)


def test_interpolation_on_grid_nodes_is_exact():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 12)
    values = np.random.default_rng(2).normal(size=grid.shape + (2, 2))
    nodes = grid.nodes()[4:8, 4:8]
    assert_allclose(grid.interpolate(values, nodes), values[4:8, 4:8], atol=1e-12)


def test_spline_field_reproduces_cubics_and_derivatives():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 16)
    nodes = grid.nodes()
    values = np.stack([nodes[..., 0] ** 3 - nodes[..., 1], nodes[..., 0] * nodes[..., 1] ** 2], axis=-1)
    field = SplineField(grid, values)
    x = np.array([[0.13, -0.41], [-0.72, 0.55]])
    assert_allclose(field(x), np.stack([x[:, 0] ** 3 - x[:, 1], x[:, 0] * x[:, 1] ** 2], axis=-1),
                    atol=1e-9)
    assert_allclose(field(x, 1, 0)[:, 0], 3.0 * x[:, 0] ** 2, atol=1e-8)
    assert_allclose(field(x, 0, 1)[:, 1], 2.0 * x[:, 0] * x[:, 1], atol=1e-8)


def test_spline_field_rejects_mismatched_values():
    grid = BoxGrid.covering((-1.0, -1.0), (1.0, 1.0), 16)
    with pytest.raises(ValueError):
        SplineField(grid, np.zeros((15, 16)))
