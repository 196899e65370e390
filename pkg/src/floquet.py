"""
Transfer and monodromy matrices for -u'' = lambda u on the necklace cell.

States are (u, u') with right-sided derivatives at vertices. Crossing a vertex
from a link into a semicircle multiplies u' by 1/2, the opposite crossing by 2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.errors import NecklaceError, StepSizeError
from src.graph_core import LINK_TO_SEMICIRCLE, SEMICIRCLE_TO_LINK, Geometry

logger = logging.getLogger(__name__)

# |lambda| s^2 below this switches cos/sinc to their Taylor series
SERIES_CUTOFF = 1e-4
DET_TOL = 1e-10


def _as_array(lam: float | np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.asarray(lam, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def cos_like(s: float, lam: float | np.ndarray) -> float | np.ndarray:
    """cos(sqrt(lam) s), continued to cosh for lam < 0, smooth through lam = 0"""
    lam_arr, scalar = _as_array(lam)
    z = lam_arr * s * s
    out = np.empty_like(z)
    small = np.abs(z) < SERIES_CUTOFF
    pos = ~small & (z > 0)
    neg = ~small & (z < 0)
    zs = z[small]
    out[small] = 1.0 - zs / 2.0 + zs**2 / 24.0 - zs**3 / 720.0
    out[pos] = np.cos(np.sqrt(lam_arr[pos]) * s)
    out[neg] = np.cosh(np.sqrt(-lam_arr[neg]) * s)
    return float(out[0]) if scalar else out


def sinc_like(s: float, lam: float | np.ndarray) -> float | np.ndarray:
    """sin(sqrt(lam) s) / (sqrt(lam) s), continued to sinh for lam < 0; equals 1 at lam = 0"""
    lam_arr, scalar = _as_array(lam)
    z = lam_arr * s * s
    out = np.empty_like(z)
    small = np.abs(z) < SERIES_CUTOFF
    pos = ~small & (z > 0)
    neg = ~small & (z < 0)
    zs = z[small]
    out[small] = 1.0 - zs / 6.0 + zs**2 / 120.0 - zs**3 / 5040.0
    k = np.sqrt(lam_arr[pos]) * s
    out[pos] = np.sin(k) / k
    k = np.sqrt(-lam_arr[neg]) * s
    out[neg] = np.sinh(k) / k
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class TransferMatrix:
    """Fundamental matrix of (u, u')' = [[0, 1], [-lam, 0]] (u, u') over length s"""

    entries: np.ndarray
    lam: float
    s: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))


@dataclass(frozen=True)
class Monodromy:
    """One-period propagator based at x_check"""

    entries: np.ndarray
    lam: float
    base_point: float
    geometry: Geometry

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))


class FloquetCase(str, Enum):
    GAP_POSITIVE = "gap_positive"
    GAP_NEGATIVE = "gap_negative"
    BAND = "band"
    EDGE = "edge"

    @property
    def in_spectrum(self) -> bool:
        return self in (FloquetCase.BAND, FloquetCase.EDGE)

    @property
    def is_gap(self) -> bool:
        return not self.in_spectrum


@dataclass(frozen=True)
class FloquetClassification:
    case: FloquetCase
    trace: float
    multipliers: tuple[complex, complex]
    exponent: float
    degenerate_edge: bool


def transfer(s: float, lam: float) -> TransferMatrix:
    """Closed-form transfer matrix [[c, sn], [-lam sn, c]]"""
    if s <= 0:
        raise NecklaceError(f"segment length must be positive, got {s}")
    c = cos_like(s, lam)
    sn = s * sinc_like(s, lam)
    entries = np.array([[c, sn], [-lam * sn, c]])
    return TransferMatrix(entries, float(lam), float(s))


def _cell_pieces(geometry: Geometry, base_point: float) -> list[float | np.ndarray]:
    """
    Segment lengths and jump matrices met on [x_check, x_check + P), in order.

    Zero-length pieces are dropped.
    """
    L, P = geometry.L, geometry.P
    base_point = float(base_point)
    if not 0.0 <= base_point < P:
        raise NecklaceError(f"base point must lie in [0, P) = [0, {P}), got {base_point}")
    r0 = base_point
    if r0 < L:
        pieces: list[float | np.ndarray] = [
            L - r0,
            LINK_TO_SEMICIRCLE.matrix(),
            math.pi,
            SEMICIRCLE_TO_LINK.matrix(),
            r0,
        ]
    else:
        pieces = [P - r0, SEMICIRCLE_TO_LINK.matrix(), L, LINK_TO_SEMICIRCLE.matrix(), r0 - L]
    return [p for p in pieces if isinstance(p, np.ndarray) or p > 0.0]


def monodromy(lam: float, geometry: Geometry, base_point: float = 0.0) -> Monodromy:
    """
    Closed-form monodromy; for x_check = 0 this is
    diag(1, 2) T(pi) diag(1, 1/2) T(L).
    """
    M = np.eye(2)
    for piece in _cell_pieces(geometry, base_point):
        factor = piece if isinstance(piece, np.ndarray) else transfer(piece, lam).entries
        M = factor @ M
    return Monodromy(M, float(lam), float(base_point), geometry)


def _rk4_propagator(lam: float, h: float) -> np.ndarray:
    """One classical RK4 step of the linear system, as a matrix"""
    hA = h * np.array([[0.0, 1.0], [-lam, 0.0]])
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    return np.eye(2) + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 @ hA / 24.0


def monodromy_by_integration(
    lam: float,
    geometry: Geometry,
    base_point: float = 0.0,
    h: float = 1e-4,
    exact_steps: bool = False,
) -> Monodromy:
    """
    Monodromy by explicit RK4 integration with vertex jumps applied at crossings.

    Each segment of length s uses ceil(s/h) uniform steps. With exact_steps the
    step must divide every segment length.
    """
    if h <= 0:
        raise StepSizeError(f"step must be positive, got {h}")
    M = np.eye(2)
    for piece in _cell_pieces(geometry, base_point):
        if isinstance(piece, np.ndarray):
            M = piece @ M
            continue
        ratio = piece / h
        n = max(1, math.ceil(ratio - 1e-9))
        if exact_steps and abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise StepSizeError(f"step {h} does not divide segment length {piece}")
        # n RK4 steps of a constant-coefficient linear system compose to R^n
        R = _rk4_propagator(lam, piece / n)
        M = np.linalg.matrix_power(R, n) @ M
    return Monodromy(M, float(lam), float(base_point), geometry)


def trace_formula(omega_m: float | np.ndarray, geometry: Geometry) -> float | np.ndarray:
    """tr M(omega_m^2) = (9 cos((L+pi) w) - cos((L-pi) w)) / 4"""
    L = geometry.L
    return (9.0 * np.cos((L + math.pi) * omega_m) - np.cos((L - math.pi) * omega_m)) / 4.0


def trace_formula_lambda(lam: float | np.ndarray, geometry: Geometry) -> float | np.ndarray:
    """Trace formula in the spectral parameter; cos turns into cosh for lam < 0"""
    L = geometry.L
    return (9.0 * cos_like(L + math.pi, lam) - cos_like(L - math.pi, lam)) / 4.0


def trace_derivative(lam: float | np.ndarray, geometry: Geometry) -> float | np.ndarray:
    """d tr M / d lambda, analytic and continuous through lam = 0"""
    a, b = geometry.L + math.pi, geometry.L - math.pi
    return -(9.0 * a * a * sinc_like(a, lam) - b * b * sinc_like(b, lam)) / 8.0


def multipliers_from_trace(trace: float) -> tuple[complex, complex]:
    """Roots of mu^2 - tr mu + 1 = 0, dominant root first"""
    disc = trace * trace - 4.0
    if disc >= 0.0:
        r = math.sqrt(disc)
        mu = (trace + math.copysign(r, trace)) / 2.0
        return complex(mu), complex(1.0 / mu)
    r = math.sqrt(-disc)
    return complex(trace / 2.0, r / 2.0), complex(trace / 2.0, -r / 2.0)


def classify_trace(trace: float, period: float, tol: float = 1e-9) -> FloquetClassification:
    """Four-case classification from the trace alone"""
    margin = abs(trace) - 2.0
    if abs(margin) <= tol:
        case = FloquetCase.EDGE
    elif margin < 0:
        case = FloquetCase.BAND
    elif trace > 0:
        case = FloquetCase.GAP_POSITIVE
    else:
        case = FloquetCase.GAP_NEGATIVE

    if case is FloquetCase.EDGE:
        mu = 1.0 if trace > 0 else -1.0
        multipliers = (complex(mu), complex(mu))
    else:
        multipliers = multipliers_from_trace(trace)
    exponent = math.acosh(abs(trace) / 2.0) / period if case.is_gap else 0.0
    return FloquetClassification(case, float(trace), multipliers, exponent, case is FloquetCase.EDGE)


def classify(M: Monodromy, tol: float = 1e-9) -> FloquetClassification:
    """Classify a monodromy matrix; requires det M = 1 (relative to |M|^2)"""
    scale = max(1.0, float(np.max(np.abs(M.entries))) ** 2)
    if abs(M.det - 1.0) > DET_TOL * scale:
        raise NecklaceError(f"monodromy determinant {M.det!r} differs from 1")
    return classify_trace(M.trace, M.geometry.P, tol)


@dataclass(frozen=True)
class FloquetSplitting:
    """Stable / unstable Floquet directions of M_0(lam) inside a gap"""

    mu_stable: float
    stable: np.ndarray
    unstable: np.ndarray

    def components(self, state: np.ndarray) -> tuple[float, float]:
        """Coefficients (c_s, c_u) of state = c_s*stable + c_u*unstable"""
        basis = np.column_stack([self.stable, self.unstable])
        c_s, c_u = np.linalg.solve(basis, state)
        return float(c_s), float(c_u)

    def project_stable(self, state: np.ndarray) -> np.ndarray:
        """Drop the unstable component of a cell-boundary state"""
        c_s, _ = self.components(state)
        return c_s * self.stable


def stable_direction(lam: float, geometry: Geometry) -> FloquetSplitting:
    """
    Eigen-decomposition of M_0(lam) for lam in a gap.

    Both eigenvectors are scaled to a positive u component.
    """
    M = monodromy(lam, geometry, 0.0)
    if abs(M.trace) <= 2.0:
        raise NecklaceError(f"lambda={lam} is not in a spectral gap (tr={M.trace})")
    values, vectors = np.linalg.eig(M.entries)
    values = values.real
    vectors = vectors.real
    vectors = vectors * np.where(vectors[0] < 0, -1.0, 1.0)
    i_s = int(np.argmin(np.abs(values)))
    return FloquetSplitting(float(values[i_s]), vectors[:, i_s].copy(), vectors[:, 1 - i_s].copy())
