"""
Magnetic geodesic flow on the unit sphere bundle.

Rays are integrated in batches with the classical fourth-order Runge-Kutta
scheme. Every step renormalizes the velocity to unit g-length; a step that
leaves M is shortened by bisection on the implicit boundary function so the
last sample sits on the boundary. The four stage states of every step are
kept, so matrix ODEs along the ray (parallel transport) can be advanced with
the same scheme as a joint system.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .config import resolve_config
from .errors import (ParameterOutOfIntervalError, PointOutsideDomainError,
                     StepUnderflowError, TrappedRayError)
from .manifold import MagneticSystem

logger = logging.getLogger(__name__)

RateFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PhasePoint:
    """Point ``(x, v)`` of the unit sphere bundle."""

    x: np.ndarray
    v: np.ndarray

    @classmethod
    def unit(cls, system: MagneticSystem, x, v) -> "PhasePoint":
        """Build a phase point, renormalizing ``v`` to unit g-length."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return cls(x, system.normalize(x, v))


@dataclass(frozen=True)
class GeodesicTrace:
    """One sampled magnetic geodesic.

    ``stages[i]`` holds the four Runge-Kutta stage states of the step from
    sample ``i`` to ``i + 1`` and ``steps[i]`` its length. ``t`` is the null
    lift once computed.
    """

    step: float
    s: np.ndarray
    x: np.ndarray
    v: np.ndarray
    exit_time: float
    exited: bool
    stages: np.ndarray
    steps: np.ndarray
    t: Optional[np.ndarray] = None
    t0: float = 0.0
    clock: Optional[np.ndarray] = None
    rates: Optional[np.ndarray] = None

    @property
    def sample_count(self) -> int:
        return len(self.s)

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(self.x[-1], self.v[-1])

    def with_lift(self, t: np.ndarray, t0: float) -> "GeodesicTrace":
        return dataclasses.replace(self, t=t, t0=t0)

    def to_bundle(self) -> "RayBundle":
        states = np.concatenate([self.x, self.v], axis=-1)
        if self.clock is not None:
            states = np.concatenate([states, self.clock[:, None]], axis=-1)
        return RayBundle(
            states=states[None],
            stages=self.stages[None],
            steps=self.steps[None],
            counts=np.array([len(self.steps)]),
            end_times=np.array([self.exit_time]),
            exited=np.array([self.exited]),
            trapped=np.array([False]),
            glancing=np.array([False]),
            step=self.step,
            rates=None if self.rates is None else self.rates[None],
        )


@dataclass
class RayBundle:
    """Padded batch of traces: ``states (m, n+1, D)``, ``stages (m, n, 4, D)``, ``steps (m, n)``.

    Rays that finished early repeat their final state and carry zero steps.
    """

    states: np.ndarray
    stages: np.ndarray
    steps: np.ndarray
    counts: np.ndarray
    end_times: np.ndarray
    exited: np.ndarray
    trapped: np.ndarray
    glancing: np.ndarray
    step: float
    rates: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.states[..., 0:2]

    @property
    def velocities(self) -> np.ndarray:
        return self.states[..., 2:4]

    @property
    def parameters(self) -> np.ndarray:
        """Arc-length parameter of every sample, shape ``(m, n+1)``."""
        s = np.zeros(self.states.shape[:2])
        s[:, 1:] = np.cumsum(self.steps, axis=1)
        return s

    def trace(self, i: int) -> GeodesicTrace:
        k = int(self.counts[i])
        states = self.states[i, :k + 1]
        return GeodesicTrace(
            step=self.step,
            s=self.parameters[i, :k + 1],
            x=states[:, 0:2].copy(),
            v=states[:, 2:4].copy(),
            exit_time=float(self.end_times[i]),
            exited=bool(self.exited[i]),
            stages=self.stages[i, :k].copy(),
            steps=self.steps[i, :k].copy(),
            clock=states[:, 4].copy() if states.shape[-1] > 4 else None,
            rates=None if self.rates is None else self.rates[i, :k].copy(),
        )


def cumulative_integral(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Cumulative composite Simpson integral along axis 0, starting at 0."""
    values = np.asarray(values)
    if len(s) == 1:
        return np.zeros_like(values)
    if len(s) == 2:
        return cumulative_trapezoid(values, x=s, axis=0, initial=0)
    return cumulative_simpson(values, x=s, axis=0, initial=0)


class MagneticFlow:
    """Unit-speed magnetic geodesic flow of a ``MagneticSystem``.

    ``charge = -1`` integrates the reversed system used for enter times.
    ``rate`` rescales the vector field by ``rate(x, clock)`` and appends the
    original parameter as a fifth state component (the clock).
    """

    def __init__(self, system: MagneticSystem, config: Optional[Dict[str, Any]] = None,
                 charge: float = 1.0, rate: Optional[RateFn] = None):
        self.system = system
        self.config = resolve_config(config)
        self.flow_config = self.config["flow"]
        self.charge = charge
        self.rate = rate

        self.step = float(self.flow_config["step"])
        self.boundary_tol = float(self.flow_config["boundary_tol"])
        self.glancing_tol = float(self.flow_config["glancing_tol"])
        self.bisection_tol = float(self.flow_config["bisection_tol"])
        self.bisection_iters = int(self.flow_config["bisection_iters"])
        self.s_max = float(self.flow_config["s_max_factor"]) * system.domain.diameter

    def reversed(self) -> "MagneticFlow":
        return MagneticFlow(self.system, self.config, charge=-self.charge, rate=self.rate)

    def reparametrized(self, rate: RateFn) -> "MagneticFlow":
        return MagneticFlow(self.system, self.config, charge=self.charge, rate=rate)

    # --- one-step machinery --------------------------------------------------------------

    def derivative(self, y: np.ndarray) -> np.ndarray:
        x = y[..., 0:2]
        v = y[..., 2:4]
        out = np.concatenate([v, self.system.acceleration(x, v, self.charge)], axis=-1)
        if self.rate is None:
            return out
        r = self.rate(x, y[..., 4])
        return np.concatenate([out * r[..., None], r[..., None]], axis=-1)

    def rk4_step(self, y: np.ndarray, ds) -> Tuple[np.ndarray, np.ndarray]:
        """One step of length ``ds`` (scalar or per ray); returns the new state and the stage states."""
        ds = np.asarray(ds, dtype=float)
        if ds.ndim:
            ds = ds[..., None]
        k1 = self.derivative(y)
        y2 = y + 0.5 * ds * k1
        k2 = self.derivative(y2)
        y3 = y + 0.5 * ds * k2
        k3 = self.derivative(y3)
        y4 = y + ds * k3
        k4 = self.derivative(y4)
        y_new = y + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y_new[..., 2:4] = self.system.normalize(y_new[..., 0:2], y_new[..., 2:4])
        return y_new, np.stack([y, y2, y3, y4], axis=-2)

    def step_points(self, x: np.ndarray, v: np.ndarray, ds: float) -> Tuple[np.ndarray, np.ndarray]:
        """Flow a batch of phase points by one step of length ``ds`` (may be negative)."""
        y = np.concatenate([x, v], axis=-1)
        y_new, _ = self.rk4_step(y, ds)
        return y_new[..., 0:2], y_new[..., 2:4]

    def _bisect_exit(self, y: np.ndarray, ds: np.ndarray) -> np.ndarray:
        """Shortest step in ``(0, ds]`` whose endpoint is outside M, to ``bisection_tol``."""
        lo = np.zeros_like(ds)
        hi = ds.copy()
        for _ in range(self.bisection_iters):
            open_ = (hi - lo) > self.bisection_tol
            if not np.any(open_):
                break
            mid = 0.5 * (lo + hi)
            y_mid, _ = self.rk4_step(y, mid)
            outside = self.system.domain.level(y_mid[:, 0:2]) > 0.0
            # bracketed rays keep their interval
            hi = np.where(open_ & outside, mid, hi)
            lo = np.where(open_ & ~outside, mid, lo)
        return hi

    # --- batched tracing -----------------------------------------------------------------

    def trace_batch(self, x: np.ndarray, v: np.ndarray, h: Optional[float] = None,
                    s_max: Optional[float] = None, s_stop=None,
                    raise_trapped: bool = True) -> RayBundle:
        """Integrate every start ``(x[i], v[i])`` until it leaves M, reaches ``s_stop`` or ``s_max``."""
        h = self.step if h is None else float(h)
        if h <= 0:
            raise ValueError(f"Integration step must be positive, got {h}")
        s_max = self.s_max if s_max is None else float(s_max)
        domain = self.system.domain

        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        m = x.shape[0]
        if not np.all(domain.contains(x, self.boundary_tol)):
            raise PointOutsideDomainError("Start point lies outside the domain")
        v = self.system.normalize(x, v)

        y = np.concatenate([x, v], axis=-1)
        if self.rate is not None:
            y = np.concatenate([y, np.zeros((m, 1))], axis=-1)

        on_boundary = domain.on_boundary(x, self.boundary_tol)
        normal_part = self.system.inner(x, v, self.system.inward_normal(x))
        glancing = on_boundary & (np.abs(normal_part) < self.glancing_tol)
        outward = on_boundary & (normal_part <= -self.glancing_tol)

        stop = None if s_stop is None else np.broadcast_to(np.asarray(s_stop, dtype=float), (m,))
        s = np.zeros(m)
        counts = np.zeros(m, dtype=np.int64)
        exited = glancing | outward
        trapped = np.zeros(m, dtype=bool)
        active = ~exited
        if stop is not None:
            active &= stop > 0.0

        states: List[np.ndarray] = [y.copy()]
        stages: List[np.ndarray] = []
        steps: List[np.ndarray] = []

        while np.any(active):
            over = active & (s >= s_max)
            if np.any(over):
                trapped |= over
                active &= ~over
                if not np.any(active):
                    break

            idx = np.nonzero(active)[0]
            ds = np.full(len(idx), h)
            last = np.zeros(len(idx), dtype=bool)
            if stop is not None:
                remaining = stop[idx] - s[idx]
                last = remaining <= h
                ds = np.where(last, remaining, ds)
            y_new, stg = self.rk4_step(y[idx], ds)

            crossed = domain.level(y_new[:, 0:2]) > 0.0
            if np.any(crossed):
                c = np.nonzero(crossed)[0]
                tau = self._bisect_exit(y[idx[c]], ds[c])
                underflow = (tau <= self.bisection_tol) & (s[idx[c]] == 0.0)
                if np.any(underflow):
                    raise StepUnderflowError("Ray leaves the domain within the bisection tolerance of its start")
                y_c, stg_c = self.rk4_step(y[idx[c]], tau)
                y_new[c] = y_c
                stg[c] = stg_c
                ds[c] = tau

            step_row = np.zeros(m)
            step_row[idx] = ds
            stage_row = np.repeat(y[:, None, :], 4, axis=1)
            stage_row[idx] = stg
            y[idx] = y_new
            s[idx] += ds
            counts[idx] += 1

            done = last | crossed
            exited[idx[crossed]] = True
            active[idx[done]] = False

            states.append(y.copy())
            stages.append(stage_row)
            steps.append(step_row)

        if raise_trapped and np.any(trapped):
            raise TrappedRayError(
                f"{int(trapped.sum())} ray(s) did not leave the domain before s_max={s_max:g}",
                count=int(trapped.sum()),
            )

        dim = y.shape[-1]
        bundle = RayBundle(
            states=np.stack(states, axis=1),
            stages=np.stack(stages, axis=1) if stages else np.zeros((m, 0, 4, dim)),
            steps=np.stack(steps, axis=1) if steps else np.zeros((m, 0)),
            counts=counts,
            end_times=s,
            exited=exited,
            trapped=trapped,
            glancing=glancing,
            step=h,
        )
        if self.rate is not None and bundle.stages.shape[1]:
            st = bundle.stages
            bundle.rates = self.rate(st[..., 0:2], st[..., 4])
        elif self.rate is not None:
            bundle.rates = np.zeros((m, 0, 4))
        return bundle

    # --- single-ray operations -----------------------------------------------------------

    def integrate_magnetic_geodesic(self, start: PhasePoint, h: Optional[float] = None,
                                    s_max: Optional[float] = None,
                                    s_stop: Optional[float] = None) -> GeodesicTrace:
        """Trace of the magnetic geodesic through ``start`` up to its exit (or ``s_stop``)."""
        bundle = self.trace_batch(start.x[None], start.v[None], h=h, s_max=s_max, s_stop=s_stop)
        return bundle.trace(0)

    def exit_time(self, p: PhasePoint, h: Optional[float] = None) -> float:
        return float(self.trace_batch(p.x[None], p.v[None], h=h).end_times[0])

    def exit_times(self, x: np.ndarray, v: np.ndarray, h: Optional[float] = None) -> np.ndarray:
        return self.trace_batch(x, v, h=h).end_times

    def enter_time(self, p: PhasePoint, h: Optional[float] = None) -> float:
        """``sigma(x, v) = -kappa'(x, -v)`` with ``kappa'`` the exit time of the reversed flow."""
        return -self.reversed().exit_time(PhasePoint(p.x, -p.v), h=h)

    def shift(self, p: PhasePoint, s: float, h: Optional[float] = None) -> PhasePoint:
        """``phi_s(p)`` for ``0 <= s <= kappa(p)``."""
        if s < 0:
            raise ParameterOutOfIntervalError(f"Flow parameter {s} is negative")
        if s == 0:
            return p
        trace = self.integrate_magnetic_geodesic(p, h=h, s_stop=s)
        if trace.exited and trace.exit_time < s - self.bisection_tol:
            raise ParameterOutOfIntervalError(
                f"Flow parameter {s:.6g} exceeds the exit time {trace.exit_time:.6g}")
        return trace.end


def null_lift(trace: GeodesicTrace, system: MagneticSystem, t0: float = 0.0) -> GeodesicTrace:
    """Attach ``t(s) = t0 + s - int_0^s omega(x') ds`` to a trace."""
    omega = system.omega_of(trace.x, trace.v)
    t = t0 + trace.s - cumulative_integral(omega, trace.s)
    return trace.with_lift(t, t0)


def trace_rows(trace: GeodesicTrace) -> List[Dict[str, float]]:
    """Rows ``s, x1, x2, v1, v2, t`` for CSV export."""
    t = trace.t if trace.t is not None else np.full(trace.sample_count, np.nan)
    return [
        {"s": float(trace.s[i]), "x1": float(trace.x[i, 0]), "x2": float(trace.x[i, 1]),
         "v1": float(trace.v[i, 0]), "v2": float(trace.v[i, 1]), "t": float(t[i])}
        for i in range(trace.sample_count)
    ]
