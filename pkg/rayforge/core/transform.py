"""
Forward transforms over influx fans and transport-identity checks.

All transforms integrate ``R(s) Q(phi_s) P(s)`` along magnetic geodesics, where
``P`` is the transport and ``R`` its inverse from the adjoint equation. Quadrature
is composite Simpson on the integrator's own grid. Rays are processed in
fixed-size chunks so results do not depend on the worker count.
"""

import logging
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import BSpline

from .config import resolve_config, thread_count
from .connection import ConnectionData, TransportSign, transport_pair
from .errors import DimensionMismatchError, QuadratureStepError, SupportError
from .flow import MagneticFlow, RayBundle, cumulative_integral
from .grids import BoxGrid
from .manifold import ChartDomain, MagneticSystem, unit_vectors
from .parallel import map_chunks

logger = logging.getLogger(__name__)


def simpson_weights(s: np.ndarray) -> np.ndarray:
    """Composite Simpson weights on the (possibly non-uniform) grid ``s``.

    Pairs of intervals use the non-uniform Simpson rule; a trailing odd interval
    is integrated with the quadratic through the last three nodes. Two nodes fall
    back to the trapezoid, one node integrates to zero.
    """
    s = np.asarray(s, dtype=float)
    n = len(s) - 1
    w = np.zeros(len(s))
    if n <= 0:
        return w
    if n == 1:
        w[:] = 0.5 * (s[1] - s[0])
        return w
    h = np.diff(s)
    pairs = n // 2
    for k in range(pairs):
        h0, h1 = h[2 * k], h[2 * k + 1]
        total = h0 + h1
        w[2 * k] += total / 6.0 * (2.0 - h1 / h0)
        w[2 * k + 1] += total / 6.0 * total * total / (h0 * h1)
        w[2 * k + 2] += total / 6.0 * (2.0 - h0 / h1)
    if n % 2:
        h0, h1 = h[n - 2], h[n - 1]
        w[n] += (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1))
        w[n - 1] += (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0)
        w[n - 2] -= h1 ** 3 / (6.0 * h0 * (h0 + h1))
    return w


@dataclass(frozen=True)
class BoundaryFan:
    """Influx fan: boundary angles ``theta_j`` and cell-centred inward angles ``alpha_k``."""

    n_theta: int
    n_alpha: int
    glancing_margin: float = 0.02

    def __post_init__(self):
        if self.n_theta < 1 or self.n_alpha < 1:
            raise ValueError("Fan needs at least one angle in each direction")
        if not 0.0 < self.glancing_margin < 0.5 * np.pi:
            raise ValueError("Glancing margin must lie in (0, pi/2)")

    @property
    def size(self) -> int:
        return self.n_theta * self.n_alpha

    @property
    def thetas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def alphas(self) -> np.ndarray:
        lo = -0.5 * np.pi + self.glancing_margin
        width = np.pi - 2.0 * self.glancing_margin
        return lo + (np.arange(self.n_alpha) + 0.5) * width / self.n_alpha

    def phase_points(self, system: MagneticSystem) -> Tuple[np.ndarray, np.ndarray]:
        """Start points and directions, flattened in ``(theta, alpha)`` row-major order."""
        theta, alpha = np.meshgrid(self.thetas, self.alphas, indexing="ij")
        return fan_points(system, theta.reshape(-1), alpha.reshape(-1))

    def key(self) -> Tuple[int, int, float]:
        return (self.n_theta, self.n_alpha, self.glancing_margin)


def fan_points(system: MagneticSystem, theta: np.ndarray, alpha: np.ndarray,
               outward: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """``v = cos(alpha) nu + sin(alpha) tau`` at ``beta(theta)``; ``outward`` flips the normal part."""
    x, nu, tau = system.boundary_frame(np.asarray(theta, dtype=float))
    alpha = np.asarray(alpha, dtype=float)
    normal = -np.cos(alpha) if outward else np.cos(alpha)
    return x, normal[..., None] * nu + np.sin(alpha)[..., None] * tau


@dataclass
class Sinogram:
    """Matrix-valued transform samples, ``values[j, k]`` for ``(theta_j, alpha_k)``."""

    fan: BoundaryFan
    values: np.ndarray
    scene_hash: int = 0
    step: float = 0.0

    @property
    def size(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def zeros(cls, fan: BoundaryFan, size: int, scene_hash: int = 0, step: float = 0.0) -> "Sinogram":
        return cls(fan, np.zeros((fan.n_theta, fan.n_alpha, size, size), dtype=complex), scene_hash, step)

    def flat(self) -> np.ndarray:
        return self.values.reshape(self.fan.size, self.size, self.size)


@dataclass(frozen=True)
class TimeProfile:
    """Time dependence ``Q(t, x) = profile(t) q(x)``: ``exp(i tau t)`` or a B-spline bump."""

    kind: str = "separable"
    frequency: float = 0.0
    knots: Tuple[float, ...] = ()

    @classmethod
    def separable(cls, frequency: float) -> "TimeProfile":
        return cls("separable", float(frequency))

    @classmethod
    def spline(cls, knots: Sequence[float]) -> "TimeProfile":
        knots = tuple(float(k) for k in knots)
        if len(knots) < 2 or any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("Spline knots must be strictly increasing")
        return cls("spline", 0.0, knots)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "separable":
            return np.exp(1j * self.frequency * t)
        basis = BSpline.basis_element(np.asarray(self.knots), extrapolate=False)
        return np.nan_to_num(basis(t), nan=0.0).astype(complex)


def support_mask(domain: ChartDomain, grid: BoxGrid, cells: float = 2.0) -> np.ndarray:
    """Nodes at least ``cells`` grid spacings inside the boundary."""
    return domain.boundary_distance(grid.nodes()) <= -cells * grid.spacing


class VolumeField:
    """Matrix-valued potential on a grid over M, optionally with a closed-form evaluator.

    Grid values vanish outside the support mask. Point evaluation uses the
    evaluator when present and cubic-convolution interpolation otherwise.
    """

    def __init__(self, grid: BoxGrid, values: np.ndarray, mask: np.ndarray,
                 evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 profile: Optional[TimeProfile] = None, name: str = "field"):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 4 or values.shape[:2] != grid.shape or values.shape[2] != values.shape[3]:
            raise DimensionMismatchError(f"Volume values of shape {values.shape} do not fit grid {grid.shape}")
        outside = np.abs(values[~mask]).max() if np.any(~mask) and values.size else 0.0
        if outside > 1e-12:
            raise SupportError(f"Potential '{name}' is nonzero ({outside:.3g}) within two cells of the boundary")
        self.grid = grid
        self.values = values
        self.mask = mask
        self.evaluator = evaluator
        self.profile = profile
        self.name = name

    @property
    def size(self) -> int:
        return self.values.shape[-1]

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    @classmethod
    def zeros(cls, domain: ChartDomain, size: int = 1, nodes: int = 128) -> "VolumeField":
        grid = BoxGrid.covering(*domain.bounding_box(), nodes)
        return cls(grid, np.zeros(grid.shape + (size, size), dtype=complex),
                   support_mask(domain, grid), name="zero")

    @classmethod
    def from_function(cls, domain: ChartDomain, fn: Callable[[np.ndarray], np.ndarray], size: int,
                      nodes: int = 128, analytic: bool = True, name: str = "field") -> "VolumeField":
        """Sample ``fn`` on a grid over ``domain``; keep ``fn`` as evaluator when ``analytic``."""
        grid = BoxGrid.covering(*domain.bounding_box(), nodes)
        mask = support_mask(domain, grid)
        values = np.asarray(fn(grid.nodes()), dtype=complex)
        if values.shape != grid.shape + (size, size):
            raise DimensionMismatchError(f"Potential '{name}' returned shape {values.shape}")
        values = values * mask[..., None, None]
        return cls(grid, values, mask, fn if analytic else None, name=name)

    def with_values(self, values: np.ndarray, name: Optional[str] = None) -> "VolumeField":
        """Grid-only field on the same grid and mask."""
        return VolumeField(self.grid, values, self.mask, None, self.profile, name or self.name)

    def with_profile(self, profile: Optional[TimeProfile]) -> "VolumeField":
        return VolumeField(self.grid, self.values, self.mask, self.evaluator, profile, self.name)

    def grid_only(self) -> "VolumeField":
        return VolumeField(self.grid, self.values, self.mask, None, self.profile, self.name)

    def zero_extended(self, extra: int) -> "VolumeField":
        """Same grid values padded with ``extra`` zero cells per side."""
        grid = self.grid.padded(extra)
        values = np.zeros(grid.shape + self.values.shape[2:], dtype=complex)
        values[extra:extra + self.grid.shape[0], extra:extra + self.grid.shape[1]] = self.values
        mask = np.zeros(grid.shape, dtype=bool)
        mask[extra:extra + self.grid.shape[0], extra:extra + self.grid.shape[1]] = self.mask
        return VolumeField(grid, values, mask, self.evaluator, self.profile, self.name)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Spatial part ``q(x)``, shape ``(..., N, N)``."""
        if self.evaluator is not None:
            return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=complex)
        return self.grid.interpolate(self.values, x)

    def evaluate_at(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        q = self.evaluate(x)
        if self.profile is None:
            return q
        return self.profile(t)[..., None, None] * q


@dataclass(frozen=True)
class SMGrid:
    """Phase-space samples tagged ``interior``, ``influx`` or ``outflux``."""

    x: np.ndarray
    v: np.ndarray
    kind: np.ndarray

    @property
    def size(self) -> int:
        return len(self.kind)

    def select(self, kind: str) -> np.ndarray:
        return np.nonzero(self.kind == kind)[0]

    @classmethod
    def build(cls, system: MagneticSystem, n_points: int = 12, n_dir: int = 64,
              fan: Optional[BoundaryFan] = None) -> "SMGrid":
        """Interior grid points times ``n_dir`` directions, plus the fan and its outflux mirror."""
        lower, upper = system.domain.bounding_box()
        g1, g2 = np.meshgrid(np.linspace(lower[0], upper[0], n_points),
                             np.linspace(lower[1], upper[1], n_points), indexing="ij")
        pts = np.stack([g1, g2], axis=-1).reshape(-1, 2)
        margin = 0.5 * system.domain.diameter / n_points
        pts = pts[system.domain.boundary_distance(pts) < -margin]
        angles = 2.0 * np.pi * np.arange(n_dir) / n_dir
        xs = np.repeat(pts, n_dir, axis=0)
        vs = unit_vectors(system, xs, np.tile(angles, len(pts)))
        parts_x, parts_v, kinds = [xs], [vs], [np.full(len(xs), "interior")]

        if fan is not None:
            fx, fv = fan.phase_points(system)
            theta, alpha = np.meshgrid(fan.thetas, fan.alphas, indexing="ij")
            ox, ov = fan_points(system, theta.reshape(-1), alpha.reshape(-1), outward=True)
            parts_x += [fx, ox]
            parts_v += [fv, ov]
            kinds += [np.full(len(fx), "influx"), np.full(len(ox), "outflux")]

        return cls(np.concatenate(parts_x), np.concatenate(parts_v), np.concatenate(kinds))


@dataclass
class SMField:
    """Matrix field sampled on an ``SMGrid``; ``evaluator`` recomputes it at arbitrary phase points."""

    grid: SMGrid
    values: np.ndarray
    evaluator: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    @classmethod
    def zeros(cls, grid: SMGrid, size: int) -> "SMField":
        def evaluator(x, v):
            return np.zeros(np.shape(x)[:-1] + (size, size), dtype=complex)
        return cls(grid, evaluator(grid.x, grid.v), evaluator)


@dataclass
class TransportResidual:
    """Sup-norm residual of ``GW + [A, W] + V`` over interior samples and the outflux boundary value."""

    sup: float
    residual: np.ndarray
    checked: int
    skipped: int
    outflux_max: float


@dataclass
class RayGeometry:
    """Flattened per-sample geometry of a fan: the cache behind the inversion operator."""

    fan: BoundaryFan
    step: float
    points: np.ndarray
    weights: np.ndarray
    forward: np.ndarray
    inverse: np.ndarray
    ray: np.ndarray
    n_rays: int


class RayTransformer:
    """Computes transforms of potentials over fans and phase-space grids."""

    def __init__(self, system: MagneticSystem, config: Optional[Dict[str, Any]] = None,
                 scene_hash: int = 0, threads: Optional[int] = None):
        self.system = system
        self.config = resolve_config(config)
        self.transform_config = self.config["transform"]
        self.flow = MagneticFlow(system, self.config)
        self.sign = TransportSign(self.config["connection"]["sign"])
        self.chunk_size = int(self.transform_config["chunk_size"])
        self.threads = thread_count(self.config) if threads is None else int(threads)
        self.scene_hash = scene_hash

    # --- helpers ---------------------------------------------------------------------------

    def _step(self, potential: VolumeField, h: Optional[float]) -> float:
        h = self.flow.step if h is None else float(h)
        if h <= 0 or h > potential.spacing:
            raise QuadratureStepError(
                f"Quadrature step {h:g} must be positive and not exceed the potential grid spacing "
                f"{potential.spacing:g}")
        return h

    @staticmethod
    def _weights(bundle: RayBundle) -> np.ndarray:
        s = bundle.parameters
        weights = np.zeros(s.shape)
        for r in range(bundle.size):
            k = int(bundle.counts[r])
            weights[r, :k + 1] = simpson_weights(s[r, :k + 1])
        return weights

    def _relative_times(self, bundle: RayBundle) -> np.ndarray:
        """``t(s) - t0`` on every ray, padded with the final value."""
        s = bundle.parameters
        omega = self.system.omega_of(bundle.positions, bundle.velocities)
        out = np.empty(s.shape)
        for r in range(bundle.size):
            k = int(bundle.counts[r])
            out[r, :k + 1] = s[r, :k + 1] - cumulative_integral(omega[r, :k + 1], s[r, :k + 1])
            out[r, k + 1:] = out[r, k]
        return out

    def _accumulate(self, bundle: RayBundle, potential: VolumeField, conn: ConnectionData,
                    tau: float = 0.0, t0: Optional[float] = None) -> np.ndarray:
        forward, inverse = transport_pair(bundle, conn, self.sign)
        integrand = inverse @ potential.evaluate(bundle.positions) @ forward
        needs_time = tau != 0.0 or (t0 is not None and potential.profile is not None)
        if needs_time:
            rel = self._relative_times(bundle)
            if t0 is not None and potential.profile is not None:
                integrand = integrand * potential.profile(t0 + rel)[..., None, None]
            if tau != 0.0:
                integrand = integrand * np.exp(1j * tau * rel)[..., None, None]
        return np.einsum("rk,rkij->rij", self._weights(bundle), integrand)

    def ray_integrals(self, x: np.ndarray, v: np.ndarray, potential: VolumeField,
                      conn: ConnectionData, h: float, tau: float = 0.0,
                      t0: Optional[float] = None) -> np.ndarray:
        """``int_0^kappa e^{i tau (t - t0)} R Q P ds`` from every start ``(x[i], v[i])``."""
        if conn.size != potential.size:
            raise DimensionMismatchError(
                f"Connection acts on C^{conn.size} but the potential is {potential.size}x{potential.size}")
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        v = np.asarray(v, dtype=float).reshape(-1, 2)

        def work(start: int, stop: int) -> np.ndarray:
            bundle = self.flow.trace_batch(x[start:stop], v[start:stop], h=h)
            return self._accumulate(bundle, potential, conn, tau, t0)

        parts = map_chunks(work, len(x), self.chunk_size, self.threads)
        if not parts:
            return np.zeros((0, conn.size, conn.size), dtype=complex)
        return np.concatenate(parts)

    def _fan_sinogram(self, potential, conn, fan, h, tau=0.0, t0=None) -> Sinogram:
        h = self._step(potential, h)
        started = time.perf_counter()
        x, v = fan.phase_points(self.system)
        flat = self.ray_integrals(x, v, potential, conn, h, tau, t0)
        logger.info("Integrated %d rays (h=%g) in %.2fs", fan.size, h, time.perf_counter() - started)
        values = flat.reshape(fan.n_theta, fan.n_alpha, conn.size, conn.size)
        return Sinogram(fan, values, self.scene_hash, h)

    # --- transforms ------------------------------------------------------------------------

    def xray_transform(self, potential: VolumeField, conn: ConnectionData, fan: BoundaryFan,
                       h: Optional[float] = None) -> Sinogram:
        """Non-Abelian magnetic X-ray transform of the spatial part of ``potential``."""
        return self._fan_sinogram(potential, conn, fan, h)

    def slice_transform(self, potential: VolumeField, tau: float, conn: ConnectionData,
                        fan: BoundaryFan, h: Optional[float] = None) -> Sinogram:
        """Transform with phase ``exp(i tau (t(s) - t0))``; ``tau = 0`` is the X-ray transform."""
        return self._fan_sinogram(potential, conn, fan, h, tau=float(tau))

    def lightray_fan(self, potential: VolumeField, t0: float, conn: ConnectionData,
                     fan: BoundaryFan, h: Optional[float] = None) -> Sinogram:
        """Light ray transform of ``Q(t, x)`` along the null lifts of a whole fan starting at ``t0``."""
        return self._fan_sinogram(potential, conn, fan, h, t0=float(t0))

    def lightray_transform(self, potential: VolumeField, start: Tuple[float, float, float],
                           conn: ConnectionData, h: Optional[float] = None) -> np.ndarray:
        """Light ray transform along the null geodesic with initial time ``t0`` over fan point ``(theta, alpha)``."""
        h = self._step(potential, h)
        t0, theta, alpha = (float(c) for c in start)
        x, v = fan_points(self.system, np.array([theta]), np.array([alpha]))
        return self.ray_integrals(x, v, potential, conn, h, t0=t0)[0]

    # --- phase-space fields ----------------------------------------------------------------

    def wv_field(self, potential: VolumeField, conn: ConnectionData, grid: SMGrid,
                 h: Optional[float] = None) -> SMField:
        """``W(x, v) = int_0^kappa R V P ds`` at every sample of ``grid``."""
        h = self._step(potential, h)

        def evaluator(x, v):
            return self.ray_integrals(x, v, potential, conn, h)

        return SMField(grid, evaluator(grid.x, grid.v), evaluator)

    def transport_residual(self, field: SMField, potential: VolumeField, conn: ConnectionData,
                           delta: Optional[float] = None) -> TransportResidual:
        """Residual of ``GW + [A, W] = -V`` with ``GW`` from a centred flow difference."""
        if field.evaluator is None:
            raise ValueError("Transport residual needs a field that can be evaluated off the grid")
        delta = float(self.transform_config["residual_delta"]) if delta is None else float(delta)
        grid = field.grid
        interior = grid.select("interior")
        x, v = grid.x[interior], grid.v[interior]

        xp, vp = self.flow.step_points(x, v, delta)
        xm, vm = self.flow.step_points(x, v, -delta)
        domain = self.system.domain
        ok = domain.contains(xp, 0.0) & domain.contains(xm, 0.0)
        skipped = int(np.sum(~ok))
        if skipped:
            logger.info("Skipped %d samples too close to the boundary for the centred stencil", skipped)

        residual = np.full((grid.size, conn.size, conn.size), np.nan, dtype=complex)
        sup = 0.0
        if np.any(ok):
            w_plus = field.evaluator(xp[ok], vp[ok])
            w_minus = field.evaluator(xm[ok], vm[ok])
            w = field.values[interior[ok]]
            att = conn.attenuation(x[ok], v[ok])
            res = ((w_plus - w_minus) / (2.0 * delta) + att @ w - w @ att
                   + potential.evaluate(x[ok]))
            residual[interior[ok]] = res
            sup = float(np.max(np.linalg.norm(res, axis=(-2, -1))))

        outflux = grid.select("outflux")
        outflux_max = (float(np.max(np.linalg.norm(field.values[outflux], axis=(-2, -1))))
                       if len(outflux) else 0.0)
        return TransportResidual(sup, residual, int(np.sum(ok)), skipped, outflux_max)

    # --- cached geometry -------------------------------------------------------------------

    def geometry(self, fan: BoundaryFan, conn: ConnectionData, h: float) -> RayGeometry:
        """Per-sample points, Simpson weights and transports of every fan ray."""
        x, v = fan.phase_points(self.system)

        def work(start: int, stop: int):
            bundle = self.flow.trace_batch(x[start:stop], v[start:stop], h=h)
            forward, inverse = transport_pair(bundle, conn, self.sign)
            weights = self._weights(bundle)
            valid = np.arange(bundle.states.shape[1])[None, :] <= bundle.counts[:, None]
            rays = np.broadcast_to(np.arange(start, stop)[:, None], valid.shape)
            return (bundle.positions[valid], weights[valid], forward[valid], inverse[valid], rays[valid])

        started = time.perf_counter()
        parts: List[tuple] = map_chunks(work, len(x), self.chunk_size, self.threads)
        geometry = RayGeometry(
            fan=fan,
            step=h,
            points=np.concatenate([p[0] for p in parts]),
            weights=np.concatenate([p[1] for p in parts]),
            forward=np.concatenate([p[2] for p in parts]),
            inverse=np.concatenate([p[3] for p in parts]),
            ray=np.concatenate([p[4] for p in parts]),
            n_rays=len(x),
        )
        logger.info("Cached %d samples over %d rays in %.2fs", len(geometry.weights), len(x),
                    time.perf_counter() - started)
        return geometry
