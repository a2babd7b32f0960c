"""
Matrix connections and parallel transport along magnetic geodesics.

A connection ``A = Phi dt + A~`` acts on a null direction over ``(x, v)``
through the attenuation ``Phi(x) + A~_x(v) - Phi(x) omega_x(v)``. Transport
solves ``P' + attenuation * P = 0`` (attenuation sign, the default) or
``P' - A P = 0`` (beam sign); its inverse is obtained from the adjoint equation
rather than by matrix inversion.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, ParameterOutOfIntervalError, StepGridMismatchError
from .grids import BoxGrid, SplineField
from .manifold import OneFormField

logger = logging.getLogger(__name__)

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class TransportSign(str, Enum):
    """Sign convention of the transport equation."""

    ATTENUATION = "attenuation"
    BEAM = "beam"

    @property
    def factor(self) -> float:
        """Coefficient multiplying the attenuation in ``P' = factor * A * P``."""
        return -1.0 if self is TransportSign.ATTENUATION else 1.0


class ConnectionData:
    """Higgs field ``Phi`` and spatial one-form ``A~`` with values in ``N x N`` complex matrices."""

    def __init__(self, size: int, higgs: Callable[[np.ndarray], np.ndarray],
                 gauge: Callable[[np.ndarray], np.ndarray],
                 omega: Optional[OneFormField] = None, unitary: bool = False,
                 name: str = "custom", constant: bool = False):
        self.size = int(size)
        self._higgs = higgs
        self._gauge = gauge
        self.omega = omega or OneFormField.zero()
        self.unitary = unitary
        self.name = name
        self.constant = constant

    # --- built-ins ------------------------------------------------------------------------

    @classmethod
    def zero(cls, size: int = 1) -> "ConnectionData":
        return cls.constant_matrices(np.zeros((size, size), dtype=complex), name="zero")

    @classmethod
    def constant_matrices(cls, higgs: np.ndarray, gauge: Optional[np.ndarray] = None,
                          unitary: Optional[bool] = None, name: str = "constant") -> "ConnectionData":
        """Spatially constant ``Phi`` (``N x N``) and ``A~`` (``2 x N x N``)."""
        higgs = np.asarray(higgs, dtype=complex)
        size = higgs.shape[-1]
        if higgs.shape != (size, size):
            raise DimensionMismatchError(f"Higgs field must be square, got shape {higgs.shape}")
        gauge = np.zeros((2, size, size), dtype=complex) if gauge is None else np.asarray(gauge, dtype=complex)
        if gauge.shape != (2, size, size):
            raise DimensionMismatchError(f"Gauge field must have shape (2, {size}, {size}), got {gauge.shape}")
        if unitary is None:
            unitary = bool(np.allclose(higgs, -higgs.conj().T, atol=1e-14)
                           and np.allclose(gauge, -np.swapaxes(gauge.conj(), -1, -2), atol=1e-14))

        def higgs_fn(x):
            return np.broadcast_to(higgs, np.shape(x)[:-1] + (size, size)).copy()

        def gauge_fn(x):
            return np.broadcast_to(gauge, np.shape(x)[:-1] + (2, size, size)).copy()

        return cls(size, higgs_fn, gauge_fn, unitary=unitary, name=name, constant=True)

    @classmethod
    def constant_diagonal(cls, diagonal: Sequence[complex], skew: bool = False) -> "ConnectionData":
        """``Phi = diag(d)`` (or ``i diag(d)`` with ``skew``) and ``A~ = 0``."""
        d = np.asarray(diagonal, dtype=complex)
        if skew:
            d = 1j * d.real
        return cls.constant_matrices(np.diag(d), unitary=skew or None, name="constant-diagonal")

    @classmethod
    def su2_gaussian(cls, amplitude: float, width: float,
                     center: Sequence[float] = (0.0, 0.0)) -> "ConnectionData":
        """``f = a exp(-|x - c|^2 / w^2)``; ``Phi = f i sigma_3``, ``A~_k = f i sigma_k``."""
        c = np.asarray(center, dtype=float)

        def profile(x):
            d = np.asarray(x, dtype=float) - c
            return amplitude * np.exp(-np.sum(d * d, axis=-1) / width ** 2)

        def higgs(x):
            return profile(x)[..., None, None] * (1j * PAULI[2])

        def gauge(x):
            f = profile(x)[..., None, None, None]
            return f * (1j * np.stack([PAULI[0], PAULI[1]]))

        return cls(2, higgs, gauge, unitary=True, name="su2-gaussian")

    @classmethod
    def from_grid(cls, grid: BoxGrid, higgs_values: np.ndarray,
                  gauge_values: Optional[np.ndarray] = None, name: str = "grid") -> "ConnectionData":
        """Bicubic realization of sampled ``Phi[i1, i2, N, N]`` and ``A~[i1, i2, 2, N, N]``."""
        higgs_values = np.asarray(higgs_values, dtype=complex)
        size = higgs_values.shape[-1]
        if gauge_values is None:
            gauge_values = np.zeros(grid.shape + (2, size, size), dtype=complex)
        gauge_values = np.asarray(gauge_values, dtype=complex)
        if higgs_values.shape != grid.shape + (size, size):
            raise DimensionMismatchError(f"Higgs grid has shape {higgs_values.shape}")
        if gauge_values.shape != grid.shape + (2, size, size):
            raise DimensionMismatchError(f"Gauge grid has shape {gauge_values.shape}")

        higgs_spline = SplineField(grid, np.stack([higgs_values.real, higgs_values.imag], axis=-1))
        gauge_spline = SplineField(grid, np.stack([gauge_values.real, gauge_values.imag], axis=-1))

        def higgs(x):
            out = higgs_spline(x)
            return out[..., 0] + 1j * out[..., 1]

        def gauge(x):
            out = gauge_spline(x)
            return out[..., 0] + 1j * out[..., 1]

        unitary = bool(np.allclose(higgs_values, -np.swapaxes(higgs_values.conj(), -1, -2), atol=1e-12)
                       and np.allclose(gauge_values, -np.swapaxes(gauge_values.conj(), -1, -2), atol=1e-12))
        return cls(size, higgs, gauge, unitary=unitary, name=name)

    def with_omega(self, omega: OneFormField) -> "ConnectionData":
        """Same connection acting on null directions of the system with one-form ``omega``."""
        return ConnectionData(self.size, self._higgs, self._gauge, omega=omega,
                              unitary=self.unitary, name=self.name, constant=self.constant)

    # --- evaluation -----------------------------------------------------------------------

    def higgs(self, x: np.ndarray) -> np.ndarray:
        return self._higgs(np.asarray(x, dtype=float))

    def gauge(self, x: np.ndarray) -> np.ndarray:
        return self._gauge(np.asarray(x, dtype=float))

    def effective_gauge(self, x: np.ndarray) -> np.ndarray:
        """``B_k = A~_k - Phi omega_k``, shape ``(..., 2, N, N)``."""
        x = np.asarray(x, dtype=float)
        omega = self.omega.value(x)
        return self.gauge(x) - omega[..., :, None, None] * self.higgs(x)[..., None, :, :]

    def attenuation(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``Phi(x) + A~_x(v) - Phi(x) omega_x(v)``."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if x.shape != v.shape or x.shape[-1] != 2:
            raise DimensionMismatchError(f"Point shape {x.shape} and vector shape {v.shape} differ")
        phi = self.higgs(x)
        if phi.shape[-2:] != (self.size, self.size):
            raise DimensionMismatchError(
                f"Higgs field returned {phi.shape[-2:]}, expected ({self.size}, {self.size})")
        result = phi + np.einsum("...k,...kij->...ij", v, self.gauge(x))
        if not self.omega.vanishing:
            result = result - self.omega_along(x, v)[..., None, None] * phi
        return result

    def omega_along(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.sum(self.omega.value(x) * v, axis=-1)

    def endomorphism_attenuation(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Matrix of ``W -> [A(x, v), W]`` on row-major ``vec(W)``, shape ``(..., N^2, N^2)``."""
        a = self.attenuation(x, v)
        n = self.size
        eye = np.eye(n)
        left = np.einsum("...ij,kl->...ikjl", a, eye)
        right = np.einsum("ij,...lk->...ikjl", eye, a)
        return (left - right).reshape(a.shape[:-2] + (n * n, n * n))

    def skew_defect(self, x: np.ndarray) -> float:
        """Largest Frobenius norm of ``M + M^H`` over ``Phi`` and ``A~_k`` at the given points."""
        phi = self.higgs(x)
        gauge = self.gauge(x)
        d_phi = np.linalg.norm(phi + np.swapaxes(phi.conj(), -1, -2), axis=(-2, -1))
        d_gauge = np.linalg.norm(gauge + np.swapaxes(gauge.conj(), -1, -2), axis=(-2, -1))
        return float(max(np.max(d_phi), np.max(d_gauge)))


@dataclass(frozen=True)
class TransportMatrix:
    """Transport samples aligned with a trace's parameter grid."""

    s: np.ndarray
    samples: np.ndarray
    sign: TransportSign = TransportSign.ATTENUATION

    @property
    def final(self) -> np.ndarray:
        return self.samples[-1]

    def unitarity_defect(self) -> float:
        n = self.samples.shape[-1]
        gram = np.swapaxes(self.samples.conj(), -1, -2) @ self.samples
        return float(np.max(np.linalg.norm(gram - np.eye(n), axis=(-2, -1))))

    def min_abs_determinant(self) -> float:
        return float(np.min(np.abs(np.linalg.det(self.samples))))


def rk4_linear(coefficients: np.ndarray, steps: np.ndarray, initial: np.ndarray,
               side: str = "left") -> np.ndarray:
    """Classical Runge-Kutta for ``Y' = M Y`` (``side='left'``) or ``Y' = Y M``.

    ``coefficients[r, k, j]`` is ``M`` at stage ``j`` of step ``k`` of ray ``r``
    (stages at ``s_k``, the two midpoints and ``s_{k+1}``); a zero step leaves Y unchanged.
    Returns ``Y`` at every node, shape ``(m, n + 1) + Y.shape``.
    """
    m, n = steps.shape
    y = np.broadcast_to(np.asarray(initial, dtype=complex),
                        (m,) + np.shape(initial)[-2:]).copy()
    out = np.empty((m, n + 1) + y.shape[1:], dtype=complex)
    out[:, 0] = y
    if side == "left":
        def mul(a, b):
            return a @ b
    elif side == "right":
        def mul(a, b):
            return b @ a
    else:
        raise ValueError(f"Unknown multiplication side: {side}")

    for k in range(n):
        h = steps[:, k, None, None]
        c = coefficients[:, k]
        k1 = mul(c[:, 0], y)
        k2 = mul(c[:, 1], y + 0.5 * h * k1)
        k3 = mul(c[:, 2], y + 0.5 * h * k2)
        k4 = mul(c[:, 3], y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[:, k + 1] = y
    return out


def stage_attenuation(bundle, conn: ConnectionData) -> np.ndarray:
    """Attenuation at every stored stage state, scaled by the reparametrization rate if any."""
    stages = bundle.stages
    att = conn.attenuation(stages[..., 0:2], stages[..., 2:4])
    if bundle.rates is not None:
        att = att * bundle.rates[..., None, None]
    return att


def transport_pair(bundle, conn: ConnectionData,
                   sign: TransportSign = TransportSign.ATTENUATION):
    """Transport ``P`` and its inverse ``R`` (from the adjoint equation) for every ray of a bundle."""
    sign = TransportSign(sign)
    att = stage_attenuation(bundle, conn)
    eye = np.eye(conn.size, dtype=complex)
    forward = rk4_linear(sign.factor * att, bundle.steps, eye, side="left")
    inverse = rk4_linear(-sign.factor * att, bundle.steps, eye, side="right")
    return forward, inverse


def _check_grid(trace):
    if len(trace.steps) != trace.sample_count - 1 or len(trace.stages) != len(trace.steps):
        raise StepGridMismatchError(
            f"Trace has {trace.sample_count} samples but {len(trace.steps)} steps")


def parallel_transport(trace, conn: ConnectionData,
                       sign: TransportSign = TransportSign.ATTENUATION) -> TransportMatrix:
    """Transport along a trace on its own step grid, ``P(0) = Id``."""
    _check_grid(trace)
    sign = TransportSign(sign)
    att = stage_attenuation(trace.to_bundle(), conn)
    samples = rk4_linear(sign.factor * att, trace.steps[None], np.eye(conn.size), side="left")[0]
    return TransportMatrix(trace.s, samples, sign)


def inverse_transport(trace, conn: ConnectionData,
                      sign: TransportSign = TransportSign.ATTENUATION) -> TransportMatrix:
    """``P^{-1}`` along a trace from ``R' = -factor * R A``, ``R(0) = Id``."""
    _check_grid(trace)
    sign = TransportSign(sign)
    att = stage_attenuation(trace.to_bundle(), conn)
    samples = rk4_linear(-sign.factor * att, trace.steps[None], np.eye(conn.size), side="right")[0]
    return TransportMatrix(trace.s, samples, sign)


def cocycle_defect(flow, p, s: float, s_next: float, conn: ConnectionData,
                   h: Optional[float] = None,
                   sign: TransportSign = TransportSign.ATTENUATION) -> float:
    """Frobenius norm of ``P(s + s', p) - P(s', phi_s p) P(s, p)``."""
    kappa = flow.exit_time(p, h=h)
    if s < 0 or s_next < 0 or s + s_next > kappa + flow.bisection_tol:
        raise ParameterOutOfIntervalError(
            f"Split ({s:.6g}, {s_next:.6g}) leaves the maximal interval [0, {kappa:.6g}]")

    total = parallel_transport(flow.integrate_magnetic_geodesic(p, h=h, s_stop=s + s_next), conn, sign)
    first_trace = flow.integrate_magnetic_geodesic(p, h=h, s_stop=s)
    first = parallel_transport(first_trace, conn, sign)
    second = parallel_transport(flow.integrate_magnetic_geodesic(first_trace.end, h=h, s_stop=s_next),
                                conn, sign)
    return float(np.linalg.norm(total.final - second.final @ first.final))


def cocycle_defects(flow, x: np.ndarray, v: np.ndarray, s, s_next, conn: ConnectionData,
                    h: Optional[float] = None,
                    sign: TransportSign = TransportSign.ATTENUATION) -> np.ndarray:
    """Batched ``cocycle_defect`` over starts ``(x[i], v[i])`` with splits ``(s[i], s_next[i])``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    s = np.broadcast_to(np.asarray(s, dtype=float), (len(x),))
    s_next = np.broadcast_to(np.asarray(s_next, dtype=float), (len(x),))
    kappa = flow.exit_times(x, v, h=h)
    if np.any(s < 0) or np.any(s_next < 0) or np.any(s + s_next > kappa + flow.bisection_tol):
        raise ParameterOutOfIntervalError("A split leaves the maximal interval of its ray")

    total = flow.trace_batch(x, v, h=h, s_stop=s + s_next)
    first = flow.trace_batch(x, v, h=h, s_stop=s)
    ends = first.states[:, -1]
    second = flow.trace_batch(ends[:, 0:2], ends[:, 2:4], h=h, s_stop=s_next)

    p_total = transport_pair(total, conn, sign)[0][:, -1]
    p_first = transport_pair(first, conn, sign)[0][:, -1]
    p_second = transport_pair(second, conn, sign)[0][:, -1]
    return np.linalg.norm(p_total - p_second @ p_first, axis=(-2, -1))
