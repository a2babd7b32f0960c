"""
On-geodesic amplitude equations and the recovery identity.

A ``BeamLine`` carries the data a Gaussian beam sees along its central null
geodesic: the connection along the curve ``A(s)``, the scalar weight ``c(s)``,
the potential ``Q(s)`` and an initial amplitude ``x0``. Transport here uses the
beam sign ``P' = A P``. All ODEs are advanced with the shared Runge-Kutta
stepper; inhomogeneous equations are solved as block-triangular linear systems.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np
from scipy.integrate import simpson

from .connection import PAULI, TransportMatrix, TransportSign, rk4_linear
from .errors import DimensionMismatchError
from .flow import cumulative_integral

logger = logging.getLogger(__name__)


@dataclass
class BeamLine:
    """Attenuation, weight and potential sampled along ``[a, b]`` on a uniform grid."""

    attenuation: Callable[[np.ndarray], np.ndarray]
    weight: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    interval: Tuple[float, float] = (0.0, 1.0)
    steps: int = 2000
    name: str = "line"
    _cache: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=complex)
        a, b = self.interval
        if not b > a:
            raise ValueError(f"Line interval [{a}, {b}] is empty")
        if self.steps < 2:
            raise ValueError("A line needs at least two steps")
        if not np.any(self.x0):
            raise ValueError("Initial amplitude x0 must be nonzero")
        probe = np.asarray(self.attenuation(np.array([a])))
        if probe.shape[-2:] != (self.size, self.size):
            raise DimensionMismatchError(f"Attenuation is {probe.shape[-2:]} but x0 has length {self.size}")

    @property
    def size(self) -> int:
        return len(self.x0)

    @property
    def h(self) -> float:
        a, b = self.interval
        return (b - a) / self.steps

    @property
    def nodes(self) -> np.ndarray:
        a, b = self.interval
        return a + self.h * np.arange(self.steps + 1)

    def _stage_parameters(self) -> np.ndarray:
        s = self.nodes[:-1]
        half = s + 0.5 * self.h
        return np.stack([s, half, half, self.nodes[1:]], axis=-1)

    def _sampled(self, key: str) -> np.ndarray:
        if key not in self._cache:
            fn = {"A": self.attenuation, "c": self.weight, "Q": self.potential}[key]
            self._cache[key] = np.asarray(fn(self._stage_parameters()), dtype=complex)
        return self._cache[key]

    def _step_grid(self) -> np.ndarray:
        return np.full((1, self.steps), self.h)

    def restricted(self, interval: Tuple[float, float], steps: int) -> "BeamLine":
        return BeamLine(self.attenuation, self.weight, self.potential, self.x0,
                        interval, steps, f"{self.name}[{interval[0]:g},{interval[1]:g}]")


def _solve(coefficients: np.ndarray, line: BeamLine, initial: np.ndarray, side: str = "left") -> np.ndarray:
    return rk4_linear(coefficients[None], line._step_grid(), initial, side=side)[0]


def _block(upper_left: np.ndarray, lower_left: np.ndarray) -> np.ndarray:
    """``[[D, 0], [L, D]]`` for stacks of ``N x N`` blocks."""
    zero = np.zeros_like(upper_left)
    top = np.concatenate([upper_left, zero], axis=-1)
    bottom = np.concatenate([lower_left, upper_left], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def transport_P(line: BeamLine) -> TransportMatrix:
    """Fundamental solution of ``P' - A P = 0``, ``P(a) = Id``."""
    samples = _solve(line._sampled("A"), line, np.eye(line.size))
    return TransportMatrix(line.nodes, samples, TransportSign.BEAM)


def inverse_P(line: BeamLine) -> TransportMatrix:
    """``P^{-1}`` from ``R' + R A = 0``."""
    samples = _solve(-line._sampled("A"), line, np.eye(line.size), side="right")
    return TransportMatrix(line.nodes, samples, TransportSign.BEAM)


def weight_exponent(line: BeamLine) -> np.ndarray:
    """``r(s) = -int_a^s c``, the solution of ``r' + c = 0``, ``r(a) = 0``."""
    return -cumulative_integral(np.asarray(line.weight(line.nodes), dtype=complex), line.nodes)


def solve_a00(line: BeamLine) -> np.ndarray:
    """Leading amplitude: ``u' + c u - A u = 0``, ``u(a) = x0``; shape ``(n + 1, N)``."""
    eye = np.eye(line.size)
    coefficients = line._sampled("A") - line._sampled("c")[..., None, None] * eye
    return _solve(coefficients, line, line.x0[:, None])[..., 0]


def a00_closed_form(line: BeamLine) -> np.ndarray:
    """``exp(r(s)) P(s) x0``."""
    p = transport_P(line).samples
    return np.exp(weight_exponent(line))[:, None] * (p @ line.x0)


def solve_c1(line: BeamLine) -> np.ndarray:
    """``c1' - A c1 = Q P x0``, ``c1(a) = 0``, as the lower half of a block system."""
    n = line.size
    coefficients = _block(line._sampled("A"), line._sampled("Q"))
    initial = np.concatenate([line.x0, np.zeros(n)])[:, None]
    return _solve(coefficients, line, initial)[:, n:, 0]


def c1_closed_form(line: BeamLine) -> np.ndarray:
    """``P(s) int_a^s P^{-1} Q P x0``."""
    p = transport_P(line).samples
    r = inverse_P(line).samples
    q = np.asarray(line.potential(line.nodes), dtype=complex)
    integrand = r @ q @ p @ line.x0
    return np.einsum("kij,kj->ki", p, cumulative_integral(integrand, line.nodes))


def solve_c1_weighted(line: BeamLine) -> np.ndarray:
    """``c~1' + c c~1 - A c~1 = Q a00``, ``c~1(a) = 0``; equals ``exp(r) c1``."""
    n = line.size
    diagonal = line._sampled("A") - line._sampled("c")[..., None, None] * np.eye(n)
    coefficients = _block(diagonal, line._sampled("Q"))
    initial = np.concatenate([line.x0, np.zeros(n)])[:, None]
    return _solve(coefficients, line, initial)[:, n:, 0]


def direct_weighted_integral(line: BeamLine) -> np.ndarray:
    """``int_a^b P^{-1} Q P ds`` by Simpson quadrature of the integrand."""
    p = transport_P(line).samples
    r = inverse_P(line).samples
    q = np.asarray(line.potential(line.nodes), dtype=complex)
    return simpson(r @ q @ p, x=line.nodes, axis=0)


@dataclass
class Recovery:
    """Matrix recovered from endpoint data and its direct-quadrature counterpart."""

    matrix: np.ndarray
    applied: np.ndarray
    direct: np.ndarray

    @property
    def matrix_defect(self) -> float:
        return float(np.linalg.norm(self.matrix - self.direct))


def recover_weighted_integral(line: BeamLine) -> Recovery:
    """``P(b)^{-1} c1(b)`` for ``x0 = e_1..e_N`` (basis sweep) and for ``line.x0``."""
    n = line.size
    coefficients = _block(line._sampled("A"), line._sampled("Q"))
    initial = np.concatenate([np.eye(n), np.zeros((n, n))])
    end = _solve(coefficients, line, initial)[-1]
    p_end, c_end = end[:n], end[n:]
    matrix = np.linalg.solve(p_end, c_end)
    applied = np.linalg.solve(transport_P(line).final, solve_c1(line)[-1])
    return Recovery(matrix, applied, direct_weighted_integral(line))


def recovery_defect(line: BeamLine) -> float:
    """``|P(b)^{-1} c1(b) - (int P^{-1} Q P) x0|``."""
    rec = recover_weighted_integral(line)
    return float(np.linalg.norm(rec.applied - rec.direct @ line.x0))


def sign_coherence(line: BeamLine) -> float:
    """Beam-sign transport of ``A`` against attenuation-sign transport of ``-A``."""
    beam = transport_P(line).samples
    flipped = TransportSign.ATTENUATION.factor * (-line._sampled("A"))
    other = _solve(flipped, line, np.eye(line.size))
    return float(np.max(np.linalg.norm(beam - other, axis=(-2, -1))))


def line_cocycle_defect(line: BeamLine, split_index: int) -> float:
    """``P_[a,b] - P_[m,b] P_[a,m]`` with ``m`` the node ``split_index``."""
    m = line.nodes[split_index]
    a, b = line.interval
    first = transport_P(line.restricted((a, m), split_index)).final
    second = transport_P(line.restricted((m, b), line.steps - split_index)).final
    return float(np.linalg.norm(transport_P(line).final - second @ first))


def beam_report(line: BeamLine) -> Dict[str, float]:
    """Every identity defect of a line scene."""
    r = np.exp(weight_exponent(line))
    c1 = solve_c1(line)
    return {
        "a00_closed_form": float(np.max(np.abs(solve_a00(line) - a00_closed_form(line)))),
        "c1_closed_form": float(np.max(np.abs(c1 - c1_closed_form(line)))),
        "recovery": recovery_defect(line),
        "recovery_matrix": recover_weighted_integral(line).matrix_defect,
        "weighted_chain": float(np.max(np.abs(solve_c1_weighted(line) - r[:, None] * c1))),
        "sign_coherence": sign_coherence(line),
    }


# --- built-in line scenes ----------------------------------------------------------------


def minkowski_line(steps: int = 2000) -> BeamLine:
    """Flat-space line ``phi = t - x^1``: zero weight, constant su(2) connection, bump potential."""
    a_const = 0.8j * PAULI[0] + 0.3j * PAULI[2]
    q_const = np.array([[1.0, 0.5], [0.5j, -0.2]], dtype=complex)

    def attenuation(s):
        return np.broadcast_to(a_const, np.shape(s) + (2, 2)).copy()

    def weight(s):
        return np.zeros(np.shape(s), dtype=complex)

    def potential(s):
        return np.exp(-(np.asarray(s) - 0.5) ** 2 / 0.05)[..., None, None] * q_const

    return BeamLine(attenuation, weight, potential, np.array([1.0, 0.0]), (0.0, 1.0), steps, "minkowski")


def random_line(seed: int, size: int = 2, interval: Tuple[float, float] = (0.0, 1.0),
                steps: int = 2000) -> BeamLine:
    """Smooth random line scene: trigonometric matrix coefficients drawn from ``seed``."""
    rng = np.random.default_rng(seed)

    def matrices(count, scale):
        return scale * (rng.normal(size=(count, size, size)) + 1j * rng.normal(size=(count, size, size)))

    a_coef = matrices(3, 0.4)
    q_coef = matrices(3, 0.5)
    c_coef = 0.3 * (rng.normal(size=3) + 1j * rng.normal(size=3))
    freqs = rng.uniform(0.5, 3.0, size=3)
    x0 = rng.normal(size=size) + 1j * rng.normal(size=size)

    def basis(s):
        s = np.asarray(s, dtype=float)
        return np.stack([np.ones_like(s), np.sin(freqs[1] * s), np.cos(freqs[2] * s)], axis=-1)

    def attenuation(s):
        return np.einsum("...k,kij->...ij", basis(s), a_coef)

    def weight(s):
        return basis(s) @ c_coef

    def potential(s):
        return np.einsum("...k,kij->...ij", basis(s), q_coef) * np.exp(-np.asarray(s) * freqs[0])[..., None, None]

    return BeamLine(attenuation, weight, potential, x0 / np.linalg.norm(x0), interval, steps,
                    f"random-{seed}")
