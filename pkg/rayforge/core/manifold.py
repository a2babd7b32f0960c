"""
Base geometry of a magnetic system on a planar chart.

A ``MagneticSystem`` bundles the domain M (a level set ``phi < 0``), the
Riemannian metric g and the one-form omega. Every evaluator is vectorized over
leading axes: points are ``(..., 2)`` arrays, metrics ``(..., 2, 2)``.

Conventions used throughout the package:

* ``(d omega)_ij = d_i omega_j - d_j omega_i`` (no factor 1/2);
* ``F^i_j = -g^ik (d omega)_kj``, so on the Euclidean plane with
  ``omega = (b/2)(x^1 dx^2 - x^2 dx^1)`` one gets ``F(1, 0) = (0, b)``;
* ``nu`` is the inward g-unit normal and
  ``Pi(v, v) = Hess_g phi(v, v) / |grad_g phi|_g`` which is +1 on the unit circle.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import NonTangentVectorError, NonUnitVectorError, PointOutsideDomainError
from .grids import BoxGrid, SplineField

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-9
FRAME_TOL = 1e-8

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ChartDomain:
    """Strictly convex planar domain given as the level set ``phi(x) < 0``."""

    kind: str = "disk"
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    exponent: float = 2.0
    semi_axes: Tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("disk", "super-ellipse"):
            raise ValueError(f"Unknown domain kind: {self.kind}")
        if self.kind == "disk" and self.radius <= 0:
            raise ValueError("Disk radius must be positive")
        if self.kind == "super-ellipse":
            if self.exponent < 2:
                raise ValueError("Super-ellipse exponent must be >= 2")
            if min(self.semi_axes) <= 0:
                raise ValueError("Super-ellipse semi-axes must be positive")

    @classmethod
    def unit_disk(cls) -> "ChartDomain":
        return cls("disk", (0.0, 0.0), 1.0)

    @classmethod
    def disk(cls, radius: float, center: Sequence[float] = (0.0, 0.0)) -> "ChartDomain":
        return cls("disk", (float(center[0]), float(center[1])), float(radius))

    @classmethod
    def super_ellipse(cls, exponent: float, semi_axes: Sequence[float],
                      center: Sequence[float] = (0.0, 0.0)) -> "ChartDomain":
        return cls("super-ellipse", (float(center[0]), float(center[1])), 1.0,
                   float(exponent), (float(semi_axes[0]), float(semi_axes[1])))

    def _local(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) - np.asarray(self.center)

    def level(self, x: np.ndarray) -> np.ndarray:
        """Implicit function: negative inside, zero on the boundary."""
        y = self._local(x)
        if self.kind == "disk":
            return np.sum(y * y, axis=-1) / self.radius ** 2 - 1.0
        p = self.exponent
        a, b = self.semi_axes
        return np.abs(y[..., 0] / a) ** p + np.abs(y[..., 1] / b) ** p - 1.0

    def level_gradient(self, x: np.ndarray) -> np.ndarray:
        y = self._local(x)
        if self.kind == "disk":
            return 2.0 * y / self.radius ** 2
        p = self.exponent
        a, b = self.semi_axes
        g1 = (p / a) * np.sign(y[..., 0]) * np.abs(y[..., 0] / a) ** (p - 1)
        g2 = (p / b) * np.sign(y[..., 1]) * np.abs(y[..., 1] / b) ** (p - 1)
        return np.stack([g1, g2], axis=-1)

    def level_hessian(self, x: np.ndarray) -> np.ndarray:
        y = self._local(x)
        hess = np.zeros(y.shape[:-1] + (2, 2))
        if self.kind == "disk":
            hess[..., 0, 0] = hess[..., 1, 1] = 2.0 / self.radius ** 2
            return hess
        p = self.exponent
        a, b = self.semi_axes
        hess[..., 0, 0] = p * (p - 1) / a ** 2 * np.abs(y[..., 0] / a) ** (p - 2)
        hess[..., 1, 1] = p * (p - 1) / b ** 2 * np.abs(y[..., 1] / b) ** (p - 2)
        return hess

    def boundary_distance(self, x: np.ndarray) -> np.ndarray:
        """Signed distance to the boundary (negative inside); first order for super-ellipses."""
        if self.kind == "disk":
            return np.linalg.norm(self._local(x), axis=-1) - self.radius
        grad = np.linalg.norm(self.level_gradient(x), axis=-1)
        return self.level(x) / np.maximum(grad, 1e-300)

    def contains(self, x: np.ndarray, tol: float = BOUNDARY_TOL) -> np.ndarray:
        return self.boundary_distance(x) <= tol

    def on_boundary(self, x: np.ndarray, tol: float = BOUNDARY_TOL) -> np.ndarray:
        return np.abs(self.boundary_distance(x)) <= tol

    def boundary_point(self, theta: np.ndarray) -> np.ndarray:
        """Boundary parametrization by polar angle about the center."""
        theta = np.asarray(theta, dtype=float)
        c, s = np.cos(theta), np.sin(theta)
        if self.kind == "disk":
            r = np.full_like(theta, self.radius)
        else:
            p = self.exponent
            a, b = self.semi_axes
            r = (np.abs(c / a) ** p + np.abs(s / b) ** p) ** (-1.0 / p)
        return np.stack([self.center[0] + r * c, self.center[1] + r * s], axis=-1)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        half = (np.array([self.radius, self.radius]) if self.kind == "disk"
                else np.array(self.semi_axes))
        center = np.asarray(self.center)
        return center - half, center + half

    @property
    def diameter(self) -> float:
        lower, upper = self.bounding_box()
        return float(np.max(upper - lower))

    def sample_interior(self, rng: np.random.Generator, count: int, margin: float = 0.0) -> np.ndarray:
        """Uniform interior points at least ``margin`` (first order) away from the boundary."""
        lower, upper = self.bounding_box()
        points = []
        total = 0
        while total < count:
            candidates = rng.uniform(lower, upper, size=(2 * count + 8, 2))
            keep = candidates[self.boundary_distance(candidates) < -margin]
            points.append(keep)
            total += len(keep)
        return np.concatenate(points)[:count]


class MetricField:
    """Riemannian metric ``g_ij(x)`` with derivatives ``dg[..., k, i, j] = d_k g_ij``."""

    def __init__(self, name: str, value: ArrayFn, derivative: ArrayFn,
                 flat: bool = False, analytic: bool = True):
        self.name = name
        self.value = value
        self.derivative = derivative
        self.flat = flat
        self.analytic = analytic

    @classmethod
    def conformal(cls, name: str, factor: ArrayFn, factor_gradient: ArrayFn) -> "MetricField":
        """Metric ``lambda(x) * delta`` from a positive factor and its gradient."""
        eye = np.eye(2)

        def value(x):
            return factor(x)[..., None, None] * eye

        def derivative(x):
            return factor_gradient(x)[..., :, None, None] * eye

        return cls(name, value, derivative)

    @classmethod
    def euclidean(cls) -> "MetricField":
        eye = np.eye(2)
        return cls(
            "euclidean",
            lambda x: np.broadcast_to(eye, np.shape(x)[:-1] + (2, 2)).copy(),
            lambda x: np.zeros(np.shape(x)[:-1] + (2, 2, 2)),
            flat=True,
        )

    @classmethod
    def hyperbolic(cls) -> "MetricField":
        """Poincare disk metric ``4 / (1 - |x|^2)^2``."""

        def factor(x):
            return 4.0 / (1.0 - np.sum(x * x, axis=-1)) ** 2

        def gradient(x):
            denom = (1.0 - np.sum(x * x, axis=-1)) ** 3
            return 16.0 * x / denom[..., None]

        return cls.conformal("hyperbolic", factor, gradient)

    @classmethod
    def conformal_gaussian(cls, amplitude: float, center: Sequence[float] = (0.0, 0.0),
                           width: float = 0.5) -> "MetricField":
        """``exp(2 a exp(-|x - c|^2 / s^2)) * delta``."""
        c = np.asarray(center, dtype=float)

        def bump(x):
            d = x - c
            return np.exp(-np.sum(d * d, axis=-1) / width ** 2)

        def factor(x):
            return np.exp(2.0 * amplitude * bump(x))

        def gradient(x):
            e = bump(x)
            lam = np.exp(2.0 * amplitude * e)
            return (lam * 2.0 * amplitude * e * (-2.0 / width ** 2))[..., None] * (x - c)

        return cls.conformal("conformal-gaussian", factor, gradient)

    @classmethod
    def from_grid(cls, grid: BoxGrid, values: np.ndarray, name: str = "grid") -> "MetricField":
        """Bicubic realization of sampled ``values[i1, i2, 2, 2]``."""
        values = np.asarray(values, dtype=float)
        comps = np.stack([values[..., 0, 0], values[..., 0, 1], values[..., 1, 1]], axis=-1)
        spline = SplineField(grid, comps)

        def assemble(c):
            out = np.empty(c.shape[:-1] + (2, 2))
            out[..., 0, 0] = c[..., 0]
            out[..., 0, 1] = out[..., 1, 0] = c[..., 1]
            out[..., 1, 1] = c[..., 2]
            return out

        def value(x):
            return assemble(spline(x))

        def derivative(x):
            return np.stack([assemble(spline(x, 1, 0)), assemble(spline(x, 0, 1))], axis=-3)

        return cls(name, value, derivative, analytic=False)

    def sample(self, grid: BoxGrid) -> "MetricField":
        return MetricField.from_grid(grid, self.value(grid.nodes()), name=f"{self.name}@grid")


class OneFormField:
    """One-form ``omega_i(x)`` with derivatives ``domega[..., i, j] = d_j omega_i``."""

    def __init__(self, name: str, value: ArrayFn, derivative: ArrayFn,
                 vanishing: bool = False, analytic: bool = True):
        self.name = name
        self.value = value
        self.derivative = derivative
        self.vanishing = vanishing
        self.analytic = analytic

    @classmethod
    def zero(cls) -> "OneFormField":
        return cls(
            "zero",
            lambda x: np.zeros(np.shape(x)),
            lambda x: np.zeros(np.shape(x)[:-1] + (2, 2)),
            vanishing=True,
        )

    @classmethod
    def constant_field(cls, strength: float) -> "OneFormField":
        """``(b/2)(x^1 dx^2 - x^2 dx^1)`` whose exterior derivative is ``b dx^1 ^ dx^2``."""
        b = float(strength)
        jac = np.array([[0.0, -0.5 * b], [0.5 * b, 0.0]])

        def value(x):
            x = np.asarray(x, dtype=float)
            return 0.5 * b * np.stack([-x[..., 1], x[..., 0]], axis=-1)

        def derivative(x):
            return np.broadcast_to(jac, np.shape(x)[:-1] + (2, 2)).copy()

        return cls(f"constant-field({b:g})", value, derivative, vanishing=(b == 0.0))

    @classmethod
    def swirl(cls, amplitude: float, width: float) -> "OneFormField":
        """Localized rotation ``a exp(-|x|^2/w^2) (x^1 dx^2 - x^2 dx^1)``."""
        a = float(amplitude)

        def envelope(x):
            return np.exp(-np.sum(x * x, axis=-1) / width ** 2)

        def value(x):
            x = np.asarray(x, dtype=float)
            e = a * envelope(x)
            return np.stack([-x[..., 1] * e, x[..., 0] * e], axis=-1)

        def derivative(x):
            x = np.asarray(x, dtype=float)
            e = envelope(x)
            de1 = -2.0 * x[..., 0] / width ** 2 * e
            de2 = -2.0 * x[..., 1] / width ** 2 * e
            out = np.empty(x.shape[:-1] + (2, 2))
            out[..., 0, 0] = -a * x[..., 1] * de1
            out[..., 0, 1] = -a * (e + x[..., 1] * de2)
            out[..., 1, 0] = a * (e + x[..., 0] * de1)
            out[..., 1, 1] = a * x[..., 0] * de2
            return out

        return cls(f"swirl({a:g},{width:g})", value, derivative, vanishing=(a == 0.0))

    @classmethod
    def from_grid(cls, grid: BoxGrid, values: np.ndarray, name: str = "grid") -> "OneFormField":
        spline = SplineField(grid, np.asarray(values, dtype=float))

        def derivative(x):
            return np.stack([spline(x, 1, 0), spline(x, 0, 1)], axis=-1)

        return cls(name, spline, derivative, analytic=False)

    def sample(self, grid: BoxGrid) -> "OneFormField":
        return OneFormField.from_grid(grid, self.value(grid.nodes()), name=f"{self.name}@grid")


@dataclass(frozen=True)
class ConvexitySweep:
    """Result of sweeping the magnetic convexity margin around the boundary."""

    thetas: np.ndarray
    margins: np.ndarray

    @property
    def minimum(self) -> float:
        return float(np.min(self.margins))

    @property
    def theta_min(self) -> float:
        return float(self.thetas[int(np.argmin(self.margins))])

    @property
    def strictly_convex(self) -> bool:
        return self.minimum > 0.0


@dataclass(frozen=True)
class MagneticSystem:
    """Magnetic system (M, g, omega) with derived pointwise geometry."""

    domain: ChartDomain
    metric: MetricField
    omega: OneFormField
    name: str = "custom"

    # --- checked single-point operations -------------------------------------------------

    def _require_inside(self, x: np.ndarray):
        inside = self.domain.contains(x, BOUNDARY_TOL)
        if not np.all(inside):
            bad = np.asarray(x, dtype=float).reshape(-1, 2)[~np.asarray(inside).reshape(-1)][0]
            raise PointOutsideDomainError(f"Point ({bad[0]:.6g}, {bad[1]:.6g}) lies outside the domain")

    def metric_eval(self, x: np.ndarray) -> np.ndarray:
        """Metric matrix at ``x`` (must lie in M up to the boundary tolerance)."""
        x = np.asarray(x, dtype=float)
        self._require_inside(x)
        return self.metric.value(x)

    def christoffel(self, x: np.ndarray) -> np.ndarray:
        """Christoffel symbols ``Gamma[..., k, i, j]``."""
        x = np.asarray(x, dtype=float)
        self._require_inside(x)
        return self.christoffel_unchecked(x)

    def lorentz_force(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``F_x(v)`` with the index raised by g."""
        x = np.asarray(x, dtype=float)
        self._require_inside(x)
        return np.einsum("...ij,...j->...i", self.force_matrix(x), np.asarray(v, dtype=float))

    # --- batched unchecked geometry ------------------------------------------------------

    def inverse_metric(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self.metric.value(x))

    def inner(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.einsum("...i,...ij,...j->...", u, self.metric.value(x), w)

    def norm(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def normalize(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return v / self.norm(x, v)[..., None]

    def christoffel_unchecked(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.metric.flat:
            return np.zeros(x.shape[:-1] + (2, 2, 2))
        dg = self.metric.derivative(x)
        ginv = self.inverse_metric(x)
        # lowered[l, i, j] = d_i g_lj + d_j g_li - d_l g_ij
        lowered = (np.swapaxes(dg, -3, -2)
                   + np.moveaxis(np.swapaxes(dg, -3, -2), -1, -2)
                   - dg)
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, lowered)

    def domega(self, x: np.ndarray) -> np.ndarray:
        """Exterior derivative ``(d omega)_ij = d_i omega_j - d_j omega_i``."""
        jac = self.omega.derivative(np.asarray(x, dtype=float))
        return np.swapaxes(jac, -1, -2) - jac

    def force_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.omega.vanishing:
            return np.zeros(x.shape[:-1] + (2, 2))
        return -np.einsum("...ik,...kj->...ij", self.inverse_metric(x), self.domega(x))

    def acceleration(self, x: np.ndarray, v: np.ndarray, charge: float = 1.0) -> np.ndarray:
        """Right-hand side of ``x'' = -Gamma(x', x') + charge * F(x')``."""
        acc = np.zeros_like(v)
        if not self.metric.flat:
            acc -= np.einsum("...kij,...i,...j->...k", self.christoffel_unchecked(x), v, v)
        if not self.omega.vanishing:
            acc += charge * np.einsum("...ij,...j->...i", self.force_matrix(x), v)
        return acc

    def omega_of(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``omega_x(v)``."""
        return np.sum(self.omega.value(x) * v, axis=-1)

    def omega_norm(self, x: np.ndarray) -> np.ndarray:
        w = self.omega.value(x)
        return np.sqrt(np.einsum("...i,...ij,...j->...", w, self.inverse_metric(x), w))

    # --- boundary geometry ---------------------------------------------------------------

    def _gradient_norm(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        grad = self.domain.level_gradient(x)
        ginv = self.inverse_metric(x)
        raised = np.einsum("...ij,...j->...i", ginv, grad)
        return grad, raised, np.sqrt(np.sum(grad * raised, axis=-1))

    def inward_normal(self, x: np.ndarray) -> np.ndarray:
        _, raised, size = self._gradient_norm(x)
        return -raised / size[..., None]

    def boundary_tangent(self, x: np.ndarray) -> np.ndarray:
        """g-unit tangent, counter-clockwise; g-orthogonal to the normal since g nu ~ -grad phi."""
        grad = self.domain.level_gradient(x)
        tangent = np.stack([-grad[..., 1], grad[..., 0]], axis=-1)
        return self.normalize(x, tangent)

    def boundary_frame(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Boundary point, inward normal and tangent at parameter ``theta``."""
        x = self.domain.boundary_point(theta)
        return x, self.inward_normal(x), self.boundary_tangent(x)

    def second_fundamental_form(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        grad, _, size = self._gradient_norm(x)
        hess = self.domain.level_hessian(x) - np.einsum(
            "...kij,...k->...ij", self.christoffel_unchecked(x), grad)
        return np.einsum("...i,...ij,...j->...", v, hess, v) / size

    def margin_unchecked(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        force = np.einsum("...ij,...j->...i", self.force_matrix(x), v)
        return self.second_fundamental_form(x, v) - self.inner(x, force, self.inward_normal(x))

    def convexity_margin(self, theta: float, v: np.ndarray) -> float:
        """``Pi(v, v) - g(F(v), nu)`` for a unit tangent ``v`` at ``beta(theta)``."""
        x, nu, _ = self.boundary_frame(np.asarray(theta, dtype=float))
        v = np.asarray(v, dtype=float)
        if abs(float(self.inner(x, v, nu))) > FRAME_TOL:
            raise NonTangentVectorError(f"Vector {v} is not tangent to the boundary at theta={theta:.6g}")
        if abs(float(self.norm(x, v)) - 1.0) > FRAME_TOL:
            raise NonUnitVectorError(f"Vector {v} does not have unit length in the metric")
        return float(self.margin_unchecked(x, v))

    def convexity_sweep(self, n: int = 720) -> ConvexitySweep:
        """Margin over ``n`` boundary points, minimized over both tangent orientations."""
        thetas = 2.0 * np.pi * np.arange(n) / n
        x, _, tau = self.boundary_frame(thetas)
        margins = np.minimum(self.margin_unchecked(x, tau), self.margin_unchecked(x, -tau))
        return ConvexitySweep(thetas, margins)

    def sup_omega_norm(self, n: int = 64) -> float:
        """Sampled ``sup ||omega||_g`` over the closed domain."""
        if self.omega.vanishing:
            return 0.0
        lower, upper = self.domain.bounding_box()
        g1, g2 = np.meshgrid(np.linspace(lower[0], upper[0], n),
                             np.linspace(lower[1], upper[1], n), indexing="ij")
        pts = np.stack([g1, g2], axis=-1).reshape(-1, 2)
        pts = pts[self.domain.contains(pts, 0.0)]
        boundary = self.domain.boundary_point(2.0 * np.pi * np.arange(4 * n) / (4 * n))
        pts = np.concatenate([pts, boundary])
        return float(np.max(self.omega_norm(pts)))

    # --- realizations --------------------------------------------------------------------

    def on_grid(self, cells: int = 128, pad: int = 3) -> "MagneticSystem":
        """Same system with metric and one-form sampled on a grid of ``cells`` per diameter."""
        lower, upper = self.domain.bounding_box()
        grid = BoxGrid.covering(lower, upper, cells + 1 + 2 * pad, pad)
        logger.debug("Sampling %s on a %dx%d grid", self.name, *grid.shape)
        return MagneticSystem(self.domain, self.metric.sample(grid), self.omega.sample(grid),
                              name=f"{self.name}@grid")


def orthonormal_frame(system: MagneticSystem, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """g-orthonormal frame at ``x`` by Gram-Schmidt on the coordinate basis."""
    x = np.asarray(x, dtype=float)
    e1 = np.zeros(x.shape)
    e1[..., 0] = 1.0
    e2 = np.zeros(x.shape)
    e2[..., 1] = 1.0
    e1 = system.normalize(x, e1)
    e2 = e2 - system.inner(x, e2, e1)[..., None] * e1
    return e1, system.normalize(x, e2)


def unit_vectors(system: MagneticSystem, x: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Unit vectors at ``x`` making ``angles`` with the first frame vector."""
    e1, e2 = orthonormal_frame(system, x)
    angles = np.asarray(angles, dtype=float)
    return np.cos(angles)[..., None] * e1 + np.sin(angles)[..., None] * e2


def random_unit_vectors(system: MagneticSystem, x: np.ndarray,
                        rng: Optional[np.random.Generator] = None) -> np.ndarray:
    rng = rng or np.random.default_rng(0)
    return unit_vectors(system, x, rng.uniform(0.0, 2.0 * np.pi, size=np.shape(x)[:-1]))
