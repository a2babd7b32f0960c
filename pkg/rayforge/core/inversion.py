"""
Linear forward map on grid potentials and its CGLS inversion.

Traces and transports of every fan ray are computed once; the forward map is
then ``Q -> sum_s w_s R_s (B Q)_s P_s`` with ``B`` the sparse cubic-convolution
matrix from grid nodes to ray samples. The adjoint is the exact transpose with
respect to the real part of the entrywise complex inner product.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .connection import ConnectionData
from .errors import CacheMismatchError, DimensionMismatchError
from .fileio import fnv1a64
from .transform import BoundaryFan, RayTransformer, Sinogram, VolumeField

logger = logging.getLogger(__name__)


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """``Re sum conj(a) b``."""
    return float(np.real(np.vdot(a, b)))


def _norm2(a: np.ndarray) -> float:
    return float(np.real(np.vdot(a, a)))


class LinearForwardMap:
    """Cached discrete X-ray transform acting on the values of a grid potential."""

    def __init__(self, transformer: RayTransformer, conn: ConnectionData, fan: BoundaryFan,
                 template: VolumeField, h: float):
        if conn.size != template.size:
            raise DimensionMismatchError(
                f"Connection acts on C^{conn.size} but the potential is {template.size}x{template.size}")
        started = time.perf_counter()
        self.template = template.grid_only()
        self.grid = template.grid
        self.mask = template.mask
        self.fan = fan
        self.size = conn.size
        self.step = float(h)
        self.scene_hash = transformer.scene_hash

        self.geometry = transformer.geometry(fan, conn, self.step)
        n_samples = len(self.geometry.weights)
        self.interpolation = self.grid.interpolation_matrix(self.geometry.points)
        self.summation = sparse.csr_matrix(
            (self.geometry.weights, (self.geometry.ray, np.arange(n_samples))),
            shape=(self.geometry.n_rays, n_samples),
        )
        self._inverse_h = np.swapaxes(self.geometry.inverse.conj(), -1, -2)
        self._forward_h = np.swapaxes(self.geometry.forward.conj(), -1, -2)
        self.hash = fnv1a64(repr((self.scene_hash, fan.key(), self.step, self.grid.key(),
                                  conn.name, self.size)).encode("utf-8"))
        self.setup_time = time.perf_counter() - started
        logger.info("Forward map ready: %d rays, %d samples, %d nodes (%.2fs)",
                    self.geometry.n_rays, n_samples, self.grid.size, self.setup_time)

    # --- raw operators ---------------------------------------------------------------------

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Grid values ``(n1, n2, N, N)`` to ray values ``(rays, N, N)``."""
        n = self.size
        masked = (values * self.mask[..., None, None]).reshape(self.grid.size, n * n)
        at_samples = np.asarray(self.interpolation @ masked).reshape(-1, n, n)
        conjugated = self.geometry.inverse @ at_samples @ self.geometry.forward
        return np.asarray(self.summation @ conjugated.reshape(-1, n * n)).reshape(-1, n, n)

    def apply_adjoint(self, rays: np.ndarray) -> np.ndarray:
        """Ray values ``(rays, N, N)`` to grid values ``(n1, n2, N, N)``."""
        n = self.size
        spread = rays[self.geometry.ray] * self.geometry.weights[:, None, None]
        pulled = self._inverse_h @ spread @ self._forward_h
        back = np.asarray(self.interpolation.T @ pulled.reshape(-1, n * n))
        return back.reshape(self.grid.shape + (n, n)) * self.mask[..., None, None]

    # --- typed operations ------------------------------------------------------------------

    def _check_field(self, q: VolumeField):
        if q.grid.key() != self.grid.key() or q.size != self.size:
            raise CacheMismatchError("Potential grid does not match the cached forward map")

    def _check_sinogram(self, y: Sinogram):
        if y.fan.key() != self.fan.key():
            raise CacheMismatchError("Sinogram fan does not match the cached forward map")
        if y.scene_hash != self.scene_hash:
            raise CacheMismatchError(
                f"Sinogram scene hash {y.scene_hash:016x} does not match {self.scene_hash:016x}")
        if y.size != self.size:
            raise CacheMismatchError("Sinogram matrix size does not match the cached forward map")

    def forward_apply(self, q: VolumeField) -> Sinogram:
        self._check_field(q)
        flat = self.apply(q.values)
        values = flat.reshape(self.fan.n_theta, self.fan.n_alpha, self.size, self.size)
        return Sinogram(self.fan, values, self.scene_hash, self.step)

    def adjoint_apply(self, y: Sinogram) -> VolumeField:
        self._check_sinogram(y)
        return self.template.with_values(self.apply_adjoint(y.flat()), name="backprojection")

    def adjoint_defect(self, rng: Optional[np.random.Generator] = None, trials: int = 20) -> float:
        """Largest ``|<Tq, y> - <q, T*y>| / (|q| |y|)`` over random complex pairs."""
        rng = rng or np.random.default_rng(0)
        worst = 0.0
        shape_q = self.grid.shape + (self.size, self.size)
        shape_y = (self.geometry.n_rays, self.size, self.size)
        for _ in range(trials):
            q = (rng.normal(size=shape_q) + 1j * rng.normal(size=shape_q)) * self.mask[..., None, None]
            y = rng.normal(size=shape_y) + 1j * rng.normal(size=shape_y)
            lhs = inner(self.apply(q), y)
            rhs = inner(q, self.apply_adjoint(y))
            worst = max(worst, abs(lhs - rhs) / (np.sqrt(_norm2(q) * _norm2(y))))
        return worst


@dataclass
class ReconstructionReport:
    """Convergence record of one CGLS solve."""

    iterations: int
    residual_history: List[float]
    normal_residual_history: List[float]
    lam: float
    relative_error: Optional[float] = None
    converged: bool = False
    diverged: bool = False
    timings: Dict[str, float] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, float]]:
        return [{"iteration": i, "residual": r, "normal_residual": g}
                for i, (r, g) in enumerate(zip(self.residual_history, self.normal_residual_history))]


def relative_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    denom = np.sqrt(_norm2(truth))
    return float(np.sqrt(_norm2(estimate - truth)) / denom) if denom > 0 else float(np.sqrt(_norm2(estimate)))


def cgls_reconstruct(op: LinearForwardMap, y: Sinogram, lam: float = 1e-6, max_iters: int = 200,
                     tol: float = 1e-8, truth: Optional[VolumeField] = None,
                     stagnation_window: int = 10) -> Tuple[VolumeField, ReconstructionReport]:
    """Minimize ``|T q - y|^2 + lam |q|^2`` by conjugate gradients on the normal equations."""
    if lam < 0:
        raise ValueError("Regularization weight must be non-negative")
    op._check_sinogram(y)
    started = time.perf_counter()
    mask = op.mask[..., None, None]

    data = y.flat()
    q = np.zeros(op.grid.shape + (op.size, op.size), dtype=complex)
    r = data.copy()
    s = op.apply_adjoint(r) - lam * q
    p = s.copy()
    gamma = _norm2(s)
    gamma0 = gamma

    residuals = [np.sqrt(_norm2(r) + lam * _norm2(q))]
    normals = [np.sqrt(gamma)]
    converged = gamma0 == 0.0
    diverged = False
    rising = 0
    iterations = 0

    while not converged and iterations < max_iters:
        t = op.apply(p)
        delta = _norm2(t) + lam * _norm2(p)
        if delta <= 0.0:
            break
        alpha = gamma / delta
        q = (q + alpha * p) * mask
        r = r - alpha * t
        s = op.apply_adjoint(r) - lam * q
        gamma_new = _norm2(s)
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
        iterations += 1

        residuals.append(np.sqrt(_norm2(r) + lam * _norm2(q)))
        normals.append(np.sqrt(gamma))
        rising = rising + 1 if residuals[-1] > residuals[-2] else 0
        if rising >= stagnation_window:
            diverged = True
            logger.warning("CGLS residual increased for %d consecutive iterations; stopping", rising)
            break
        if np.sqrt(gamma) <= tol * np.sqrt(gamma0):
            converged = True

    estimate = op.template.with_values(q, name="reconstruction")
    report = ReconstructionReport(
        iterations=iterations,
        residual_history=[float(v) for v in residuals],
        normal_residual_history=[float(v) for v in normals],
        lam=lam,
        converged=converged,
        diverged=diverged,
        timings={"setup": op.setup_time, "solve": time.perf_counter() - started},
    )
    if truth is not None:
        report.relative_error = relative_error(q, truth.values * mask)
    logger.info("CGLS: %d iterations, residual %.3e, %.2fs", iterations, residuals[-1],
                report.timings["solve"])
    return estimate, report


def ridge_path(op: LinearForwardMap, y: Sinogram, lambdas: Sequence[float], max_iters: int = 200,
               tol: float = 1e-10) -> List[Tuple[float, float, ReconstructionReport]]:
    """``(lambda, |q_lambda|, report)`` for each regularization weight."""
    path = []
    for lam in lambdas:
        estimate, report = cgls_reconstruct(op, y, lam=lam, max_iters=max_iters, tol=tol)
        path.append((float(lam), float(np.sqrt(_norm2(estimate.values))), report))
    return path
