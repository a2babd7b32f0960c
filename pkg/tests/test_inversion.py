import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rayforge.core.errors import CacheMismatchError, DimensionMismatchError
from rayforge.core.inversion import LinearForwardMap, cgls_reconstruct, relative_error, ridge_path
from rayforge.core.orchestrator import SELFTEST_INVERSION
from rayforge.core.transform import BoundaryFan


@pytest.fixture
def small_problem(scenes):
    scene = scenes("euclid-disk-b05")
    transformer = scene.transformer(threads=2)
    truth = scene.potential(16, analytic=False)
    fan = BoundaryFan(12, 6)
    op = LinearForwardMap(transformer, scene.connection, fan, truth, 0.02)
    return scene, transformer, truth, fan, op


def test_adjoint_is_exact(small_problem):
    *_, op = small_problem
    assert op.adjoint_defect(trials=5) < 1e-10


def test_forward_map_matches_the_transform(small_problem):
    scene, transformer, truth, fan, op = small_problem
    direct = transformer.xray_transform(truth.grid_only(), scene.connection, fan, 0.02)
    cached = op.forward_apply(truth)
    assert cached.scene_hash == scene.hash
    assert_allclose(cached.values, direct.values, atol=1e-10)


def test_cgls_reduces_the_residual(small_problem):
    _, _, truth, _, op = small_problem
    y = op.forward_apply(truth)
    estimate, report = cgls_reconstruct(op, y, lam=1e-6, max_iters=30, truth=truth)
    assert report.iterations > 0
    assert report.residual_history[-1] < 0.1 * report.residual_history[0]
    assert report.relative_error < 1.0
    assert not report.diverged
    assert estimate.values.shape == truth.values.shape
    assert len(report.rows()) == report.iterations + 1


def test_zero_data_converges_immediately(small_problem):
    _, _, truth, _, op = small_problem
    y = op.forward_apply(truth.with_values(np.zeros_like(truth.values)))
    estimate, report = cgls_reconstruct(op, y)
    assert report.converged and report.iterations == 0
    assert not np.any(estimate.values)


def test_negative_regularization_is_rejected(small_problem):
    _, _, truth, _, op = small_problem
    with pytest.raises(ValueError):
        cgls_reconstruct(op, op.forward_apply(truth), lam=-1.0)


def test_foreign_sinograms_are_rejected(small_problem):
    scene, transformer, truth, fan, op = small_problem
    y = op.forward_apply(truth)
    with pytest.raises(CacheMismatchError):
        cgls_reconstruct(op, dataclasses.replace(y, scene_hash=y.scene_hash ^ 1))
    with pytest.raises(CacheMismatchError):
        op.adjoint_apply(dataclasses.replace(y, fan=BoundaryFan(12, 7)))
    with pytest.raises(CacheMismatchError):
        op.forward_apply(scene.potential(20, analytic=False))


def test_sizes_must_agree(scenes):
    scene = scenes("euclid-disk-b0")
    other = scenes("euclid-disk-b05")
    with pytest.raises(DimensionMismatchError):
        LinearForwardMap(scene.transformer(threads=1), other.connection, BoundaryFan(4, 4),
                         scene.potential(16, analytic=False), 0.02)


def test_ridge_path_shrinks_the_estimate(small_problem):
    _, _, truth, _, op = small_problem
    path = ridge_path(op, op.forward_apply(truth), [1e-6, 10.0], max_iters=40)
    assert [lam for lam, _, _ in path] == [1e-6, 10.0]
    assert path[0][1] > path[1][1]


def test_relative_error():
    truth = np.ones((4, 4, 1, 1))
    assert relative_error(truth, truth) == 0.0
    assert relative_error(1.1 * truth, truth) == pytest.approx(0.1)
    assert relative_error(truth, np.zeros_like(truth)) == pytest.approx(4.0)


def test_noiseless_recovery_improves_with_the_fan(scenes):
    scene = scenes("euclid-disk-b05")
    transformer = scene.transformer(threads=2)
    truth = scene.potential(32, analytic=False)
    errors = []
    for n_theta, n_alpha in [(8, 4), (16, 8), (32, 16)]:
        op = LinearForwardMap(transformer, scene.connection, BoundaryFan(n_theta, n_alpha), truth, 0.02)
        _, report = cgls_reconstruct(op, op.forward_apply(truth), lam=1e-8, max_iters=150, tol=1e-10,
                                     truth=truth)
        errors.append(report.relative_error)
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.slow
def test_reconstruction_of_the_su2_scene(scenes):
    inv = SELFTEST_INVERSION
    scene = scenes("euclid-disk-b03-su2")
    truth = scene.potential(inv["grid"], analytic=False)
    fan = BoundaryFan(inv["n_theta"], inv["n_alpha"], scene.fan.glancing_margin)
    op = LinearForwardMap(scene.transformer(), scene.connection, fan, truth, inv["step"])
    assert op.adjoint_defect() < 1e-10
    _, report = cgls_reconstruct(op, op.forward_apply(truth), lam=inv["lambda"], max_iters=inv["max_iters"],
                                 tol=inv["tol"], truth=truth)
    assert report.relative_error < 0.05
