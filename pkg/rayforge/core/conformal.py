"""
Conformal rescaling ``g~ = c^2 g`` of the spacetime metric.

Null geodesics of ``g`` are pregeodesics of ``g~``: ``gamma~(s~) = gamma(h(s~))``
with ``h' = c(gamma(0))^2 / c(gamma(h))^2``. The reparametrized ray is integrated
as its own ODE (the magnetic flow scaled by ``h'`` with ``h`` as a clock) and
compared against the quadrature inverse of ``s~(s) = int c^2 / c0^2 ds``.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .connection import ConnectionData, parallel_transport, transport_pair
from .errors import ConformalFactorError
from .flow import GeodesicTrace, MagneticFlow, PhasePoint, cumulative_integral, null_lift
from .transform import RayTransformer, VolumeField, fan_points, simpson_weights

logger = logging.getLogger(__name__)


class ConformalFactor:
    """Positive factor ``c(t, x)``."""

    def __init__(self, name: str, value: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.name = name
        self._value = value

    def __call__(self, t, x) -> np.ndarray:
        return np.asarray(self._value(np.asarray(t, dtype=float), np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def constant(cls, k: float = 1.0) -> "ConformalFactor":
        if k <= 0:
            raise ConformalFactorError(f"Constant conformal factor must be positive, got {k}")
        return cls(f"constant({k:g})", lambda t, x: np.full(np.shape(x)[:-1], float(k)))

    @classmethod
    def spatial_gaussian(cls, amplitude: float, center: Sequence[float] = (0.0, 0.0),
                         width: float = 0.5) -> "ConformalFactor":
        """``1 + a exp(-|x - x0|^2 / s^2)``, positive for ``a > -1``."""
        if amplitude <= -1.0:
            raise ConformalFactorError(f"Gaussian factor amplitude must exceed -1, got {amplitude}")
        c = np.asarray(center, dtype=float)

        def value(t, x):
            d = x - c
            return 1.0 + amplitude * np.exp(-np.sum(d * d, axis=-1) / width ** 2)

        return cls(f"gaussian({amplitude:g},{width:g})", value)

    def check_on(self, t: np.ndarray, x: np.ndarray, floor: float = 1e-12) -> np.ndarray:
        values = self(t, x)
        if not np.all(np.isfinite(values)) or np.min(values) <= floor:
            raise ConformalFactorError(
                f"Conformal factor '{self.name}' is not bounded below on the ray (min {np.min(values):.3g})")
        return values


@dataclass
class Reparametrization:
    """Pregeodesic reparametrization of a lifted trace."""

    base: GeodesicTrace
    trace: GeodesicTrace
    factor0: float
    h: np.ndarray
    hprime: np.ndarray
    h_quadrature: np.ndarray
    hprime_formula: np.ndarray
    t: np.ndarray

    @property
    def h_defect(self) -> float:
        """ODE path against quadrature path."""
        return float(np.max(np.abs(self.h - self.h_quadrature)))

    @property
    def hprime_defect(self) -> float:
        return float(np.max(np.abs(self.hprime - self.hprime_formula)))


def _time_of(base: GeodesicTrace) -> Callable[[np.ndarray], np.ndarray]:
    if base.sample_count < 2:
        return lambda s: np.full(np.shape(s), base.t[0])
    spline = CubicSpline(base.s, base.t)
    return lambda s: spline(np.clip(s, base.s[0], base.s[-1]))


def reparametrize(flow: MagneticFlow, base: GeodesicTrace, factor: ConformalFactor) -> Reparametrization:
    """Reparametrize a null-lifted trace for the metric ``factor^2 * g``."""
    if base.t is None:
        base = null_lift(base, flow.system, 0.0)
    factor.check_on(base.t, base.x)
    c0 = float(factor(base.t[0], base.x[0]))
    time_of = _time_of(base)

    def rate(x, clock):
        return c0 ** 2 / factor(time_of(clock), x) ** 2

    start = PhasePoint(base.x[0], base.v[0])
    trace = flow.reparametrized(rate).integrate_magnetic_geodesic(start, h=base.step)
    h = trace.clock
    hprime = rate(trace.x, h)

    omega = flow.system.omega_of(trace.x, trace.v)
    t = base.t0 + cumulative_integral(hprime * (1.0 - omega), trace.s)

    stretch = cumulative_integral(factor(base.t, base.x) ** 2 / c0 ** 2, base.s)
    if base.sample_count >= 2:
        h_quadrature = CubicSpline(stretch, base.s)(np.clip(trace.s, 0.0, stretch[-1]))
        x_at = CubicSpline(base.s, base.x, axis=0)(h_quadrature)
    else:
        h_quadrature = np.zeros_like(trace.s)
        x_at = base.x[:1].repeat(len(trace.s), axis=0)
    hprime_formula = c0 ** 2 / factor(time_of(h_quadrature), x_at) ** 2

    logger.debug("Reparametrized ray: length %.6g -> %.6g", base.exit_time, trace.exit_time)
    return Reparametrization(base, trace.with_lift(t, base.t0), c0, h, hprime, h_quadrature,
                             hprime_formula, t)


def transport_invariance_defect(rep: Reparametrization, conn: ConnectionData) -> float:
    """``max |P(h(s~)) - P~(s~)|`` with ``P~`` integrated in the new parameter."""
    base_p = parallel_transport(rep.base, conn).samples
    forward, _ = transport_pair(rep.trace.to_bundle(), conn)
    if rep.base.sample_count < 2:
        return float(np.max(np.linalg.norm(forward[0] - base_p[0], axis=(-2, -1))))
    p_at = CubicSpline(rep.base.s, base_p, axis=0)(np.clip(rep.h, 0.0, rep.base.s[-1]))
    return float(np.max(np.linalg.norm(forward[0] - p_at, axis=(-2, -1))))


def change_of_variables_defect(rep: Reparametrization, fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                               seed: int = 0) -> float:
    """``|int f(gamma) ds - int f(gamma~) h' ds~|`` for a smooth test function."""
    if fn is None:
        rng = np.random.default_rng(seed)
        freqs = rng.normal(size=(3, 2)) * 2.0
        phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
        amps = rng.normal(size=3)

        def fn(x):
            return np.sin(x @ freqs.T + phases) @ amps

    lhs = float(simpson_weights(rep.base.s) @ fn(rep.base.x))
    rhs = float(simpson_weights(rep.trace.s) @ (fn(rep.trace.x) * rep.hprime))
    return abs(lhs - rhs)


def conformal_lightray_check(transformer: RayTransformer, potential: VolumeField, factor: ConformalFactor,
                             start: Tuple[float, float, float], conn: ConnectionData,
                             h: Optional[float] = None) -> Tuple[float, Reparametrization]:
    """Defect of ``L Q(gamma) = c(gamma(0))^2 L~(Q / c^2)(gamma~)`` on one ray."""
    t0, theta, alpha = (float(c) for c in start)
    lhs = transformer.lightray_transform(potential, (t0, theta, alpha), conn, h)

    h = transformer.flow.step if h is None else float(h)
    x, v = fan_points(transformer.system, np.array([theta]), np.array([alpha]))
    base = transformer.flow.trace_batch(x, v, h=h).trace(0)
    base = null_lift(base, transformer.system, t0)
    rep = reparametrize(transformer.flow, base, factor)

    forward, inverse = transport_pair(rep.trace.to_bundle(), conn, transformer.sign)
    scaled = potential.evaluate_at(rep.t, rep.trace.x) / (factor(rep.t, rep.trace.x) ** 2)[:, None, None]
    integrand = inverse[0] @ scaled @ forward[0]
    rhs = rep.factor0 ** 2 * np.einsum("k,kij->ij", simpson_weights(rep.trace.s), integrand)
    return float(np.linalg.norm(lhs - rhs)), rep


def conformal_report(transformer: RayTransformer, potential: VolumeField, factor: ConformalFactor,
                     start: Tuple[float, float, float], conn: ConnectionData,
                     h: Optional[float] = None) -> Dict[str, float]:
    defect, rep = conformal_lightray_check(transformer, potential, factor, start, conn, h)
    return {
        "identity": defect,
        "h_paths": rep.h_defect,
        "hprime": rep.hprime_defect,
        "transport_invariance": transport_invariance_defect(rep, conn),
        "change_of_variables": change_of_variables_defect(rep),
    }
