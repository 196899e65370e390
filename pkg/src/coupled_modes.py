"""
Truncated coupled-mode system for the time-Fourier coefficients u_m(x).

With u(t, x) = -2 sum_{m odd} u_m(x) sin(m omega t) the Klein-Gordon equation
u_tt = u_xx - (alpha + eps^2) u + u^3 becomes, for every odd m >= 1,

    u_m'' + (m^2 omega^2 - alpha - eps^2) u_m - N_m = 0,
    N_m = -s_m (s u * s u * s u)_m,    s_m = (-1)^((m-1)/2),

where * is the convolution over the symmetric index set u_{-m} = u_m. For
M_max = 1 this reads u_1'' = eps^2 u_1 - 3 u_1^3.

The boundary-value problem is discretized with the flux-balance graph
Laplacian and solved by damped Newton with banded linear solves.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import solve_banded

from src.config import config
from src.errors import ConfigurationError, InvalidFrequencyError, NewtonDivergenceError
from src.graph_core import Family, Geometry, GraphGrid, GraphProfile
from src.homoclinic import find_bound_state
from src.spectrum import validate_frequency

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
STEP_FLOOR = 1e-6
MAX_NEWTON_ITERATIONS = 50
WINDOW_WARN_RATIO = 1e-8


def odd_modes(m_max: int) -> list[int]:
    return list(range(1, m_max + 1, 2))


def default_mode_cells(eps: float, geometry: Geometry) -> int:
    return math.ceil(20.0 / (eps * geometry.P))


@dataclass
class ModeStack:
    """
    Odd harmonics u_1, u_3, ..., u_{M_max} on a common grid.

    values[i] holds u_{2i+1}; even and negative indices are implied.
    """

    grid: GraphGrid
    values: np.ndarray
    eps: float
    k: int
    family: Family | None = None
    iterations: int = 0
    residual_sup: float = float("nan")
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.grid.n_nodes:
            raise ConfigurationError("mode values do not match the grid")

    @classmethod
    def zeros(cls, grid: GraphGrid, m_max: int, eps: float, k: int) -> ModeStack:
        return cls(grid, np.zeros((len(odd_modes(m_max)), grid.n_nodes)), eps, k)

    @property
    def m_max(self) -> int:
        return 2 * self.values.shape[0] - 1

    @property
    def omega(self) -> float:
        return self.k / 2.0

    @property
    def alpha(self) -> float:
        return self.omega**2

    @property
    def geometry(self) -> Geometry:
        return self.grid.geometry

    def index(self, m: int) -> int:
        if m < 1 or m % 2 == 0 or m > self.m_max:
            raise KeyError(m)
        return (m - 1) // 2

    def u(self, m: int) -> np.ndarray:
        return self.values[self.index(m)]

    def mode(self, m: int) -> GraphProfile:
        return GraphProfile.from_values(self.grid, self.u(m))

    def norms(self) -> dict[int, float]:
        return {m: float(np.max(np.abs(self.u(m)))) for m in odd_modes(self.m_max)}

    def with_values(self, values: np.ndarray, grid: GraphGrid | None = None) -> ModeStack:
        return ModeStack(grid or self.grid, values, self.eps, self.k, self.family)

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "k": self.k,
            "l": self.geometry.l,
            "m_max": self.m_max,
            "family": None if self.family is None else self.family.value,
            "window": list(self.grid.window),
            "norms": {str(m): v for m, v in self.norms().items()},
            "iterations": self.iterations,
            "residual_sup": self.residual_sup,
            "warnings": list(self.warnings),
        }


def _extend(values: np.ndarray) -> np.ndarray:
    """Rows indexed -M..M (offset M) with u_{-m} = u_m and zero even rows"""
    n_modes, n = values.shape
    m_max = 2 * n_modes - 1
    ext = np.zeros((2 * m_max + 1, n))
    for i in range(n_modes):
        m = 2 * i + 1
        ext[m_max + m] = values[i]
        ext[m_max - m] = values[i]
    return ext


def _pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Index convolution of two centred row stacks"""
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1]))
    rows_a = [i for i in range(a.shape[0]) if a[i].any()]
    rows_b = [j for j in range(b.shape[0]) if b[j].any()]
    for i in rows_a:
        for j in rows_b:
            out[i + j] += a[i] * b[j]
    return out


def convolve3_field(values: np.ndarray) -> np.ndarray:
    """
    (u * u * u)_m for m = -3M..3M (row offset 3M) at every node.

    Only indices |.| <= M enter the sums; outputs beyond M are kept for
    inspection and dropped by the mode equations.
    """
    ext = _extend(np.atleast_2d(values))
    return _pair(_pair(ext, ext), ext)


def convolve3(stack: ModeStack, m: int, j: int) -> float:
    """Triple convolution of the symmetric extension at output index m, node j"""
    m_max = stack.m_max
    if abs(m) > 3 * m_max:
        return 0.0
    column = stack.values[:, j : j + 1]
    return float(convolve3_field(column)[3 * m_max + m, 0])


def _signs(n_modes: int) -> np.ndarray:
    return np.array([(-1.0) ** i for i in range(n_modes)])


def mode_nonlinearity(values: np.ndarray) -> np.ndarray:
    """N_m for m = 1, 3, ..., M_max (rows of values)"""
    n_modes = values.shape[0]
    m_max = 2 * n_modes - 1
    s = _signs(n_modes)[:, None]
    conv = convolve3_field(s * values)
    rows = [3 * m_max + 2 * i + 1 for i in range(n_modes)]
    return -s * conv[rows]


def _nonlinearity_jacobian(values: np.ndarray) -> np.ndarray:
    """
    dN_m / du_n per node, shape (K, K, nodes).

    d(w*w*w)_m / dw_n = 3 [(w*w)_{m-n} + (w*w)_{m+n}] for the symmetric
    extension, with w = s u.
    """
    n_modes, n = values.shape
    m_max = 2 * n_modes - 1
    s = _signs(n_modes)
    w = s[:, None] * values
    ext = _extend(w)
    ww = _pair(ext, ext)  # offset 2M
    jac = np.zeros((n_modes, n_modes, n))
    for i in range(n_modes):
        m = 2 * i + 1
        for i2 in range(n_modes):
            q = 2 * i2 + 1
            d = 3.0 * (ww[2 * m_max + m - q] + ww[2 * m_max + m + q])
            jac[i, i2] = -s[i] * d * s[i2]
    return jac


def _operator_diagonals(grid: GraphGrid, reflect_first: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(lower, diag, upper) of the second-derivative operator on grid"""
    lap = grid.laplacian()
    lower = lap.diagonal(-1).copy()
    diag = lap.diagonal(0).copy()
    upper = lap.diagonal(1).copy()
    if reflect_first:
        # symmetry point: u_{-1} = u_1
        h2 = grid.dx**2
        diag[0] = -2.0 / h2
        upper[0] = 2.0 / h2
    return lower, diag, upper


def _apply(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = diag * values
    out[:, :-1] += upper * values[:, 1:]
    out[:, 1:] += lower * values[:, :-1]
    return out


def _linear_coefficients(n_modes: int, omega: float, alpha: float, eps: float) -> np.ndarray:
    return np.array([(2 * i + 1) ** 2 * omega**2 - alpha - eps**2 for i in range(n_modes)])


def _residual_fields(
    values: np.ndarray,
    ops: tuple[np.ndarray, np.ndarray, np.ndarray],
    coeffs: np.ndarray,
    dirichlet: list[int],
) -> np.ndarray:
    lower, diag, upper = ops
    r = _apply(lower, diag, upper, values) + coeffs[:, None] * values - mode_nonlinearity(values)
    for j in dirichlet:
        r[:, j] = values[:, j]
    return r


@dataclass(frozen=True)
class Residual:
    fields: np.ndarray
    sup: float
    l2: float
    per_mode_sup: dict[int, float]


def residual(stack: ModeStack) -> Residual:
    """Mode-equation residual on the stack's own window, zero Dirichlet ends"""
    grid = stack.grid
    n_modes = stack.values.shape[0]
    ops = _operator_diagonals(grid, reflect_first=False)
    coeffs = _linear_coefficients(n_modes, stack.omega, stack.alpha, stack.eps)
    r = _residual_fields(stack.values, ops, coeffs, [0, grid.n_nodes - 1])
    weights = grid.node_mass() * grid.dx
    l2 = float(np.sqrt(np.sum(weights * r**2)))
    per_mode = {2 * i + 1: float(np.max(np.abs(r[i]))) for i in range(n_modes)}
    return Residual(r, float(np.max(np.abs(r))), l2, per_mode)


def _banded_jacobian(
    values: np.ndarray,
    ops: tuple[np.ndarray, np.ndarray, np.ndarray],
    coeffs: np.ndarray,
    dirichlet: list[int],
) -> np.ndarray:
    """
    Jacobian in solve_banded layout with K lower and K upper bands.

    Unknowns are ordered node-major, index j*K + i.
    """
    lower, diag, upper = ops
    lower, upper = lower.copy(), upper.copy()
    n_modes, n = values.shape
    K = n_modes
    dn = _nonlinearity_jacobian(values)
    row_diag = diag[None, :] + coeffs[:, None] - np.stack([dn[i, i] for i in range(K)])

    for j in dirichlet:
        row_diag[:, j] = 1.0
        dn[:, :, j] = 0.0
        if j < n - 1:
            upper[j] = 0.0
        if j > 0:
            lower[j - 1] = 0.0

    ab = np.zeros((2 * K + 1, n * K))
    nodes = np.arange(n)
    for i in range(K):
        cols = nodes * K + i
        ab[K, cols] = row_diag[i]
        # row j*K+i, column (j+1)*K+i
        ab[0, cols[1:]] = upper
        # row j*K+i, column (j-1)*K+i
        ab[2 * K, cols[:-1]] = lower
        for i2 in range(K):
            if i2 != i:
                ab[K + i - i2, nodes * K + i2] = -dn[i, i2]
    return ab


def _newton(
    values: np.ndarray,
    ops: tuple[np.ndarray, np.ndarray, np.ndarray],
    coeffs: np.ndarray,
    dirichlet: list[int],
    tol: float,
    max_iterations: int,
) -> tuple[np.ndarray, int, float]:
    """Damped Newton with Armijo backtracking (factor 1/2, floor STEP_FLOOR)"""
    K, n = values.shape
    r = _residual_fields(values, ops, coeffs, dirichlet)
    sup = float(np.max(np.abs(r)))
    iterations = 0
    while sup > tol:
        if iterations >= max_iterations:
            raise NewtonDivergenceError(
                f"no convergence after {iterations} Newton steps (residual {sup:.3e})", sup, iterations
            )
        ab = _banded_jacobian(values, ops, coeffs, dirichlet)
        delta = solve_banded((K, K), ab, -r.T.reshape(-1)).reshape(n, K).T
        norm0 = float(np.linalg.norm(r))
        t = 1.0
        while True:
            trial = values + t * delta
            r_trial = _residual_fields(trial, ops, coeffs, dirichlet)
            norm_trial = float(np.linalg.norm(r_trial))
            if norm_trial <= (1.0 - ARMIJO_C * t) * norm0 or float(np.max(np.abs(r_trial))) <= tol:
                break
            t *= 0.5
            if t < STEP_FLOOR:
                raise NewtonDivergenceError(
                    f"line search reached the step floor at iteration {iterations} "
                    f"(residual {sup:.3e})",
                    sup,
                    iterations,
                )
        values, r = trial, r_trial
        sup = float(np.max(np.abs(r)))
        iterations += 1
        logger.debug(f"newton {iterations}: step {t:g}, residual {sup:.3e}")
    return values, iterations, sup


def _on_grid(stack: ModeStack, grid: GraphGrid, n_modes: int) -> np.ndarray:
    """Initial-guess values transferred to grid (zero padding, truncation)"""
    out = np.zeros((n_modes, grid.n_nodes))
    lo = max(grid.g_start, stack.grid.g_start)
    hi = min(grid.g_end, stack.grid.g_end)
    if stack.grid.samples_per_pi != grid.samples_per_pi or stack.geometry != grid.geometry:
        raise ConfigurationError("initial guess lives on a different lattice")
    if hi < lo:
        return out
    rows = min(n_modes, stack.values.shape[0])
    out[:rows, lo - grid.g_start : hi - grid.g_start + 1] = stack.values[
        :rows, lo - stack.grid.g_start : hi - stack.grid.g_start + 1
    ]
    return out


def solve_bvp(
    eps: float,
    k: int,
    l: int,
    m_max: int,
    n_cells: int | None = None,
    samples_per_pi: int | None = None,
    initial: ModeStack | None = None,
    family: Family = Family.LINK_CENTERED,
    symmetric: bool = True,
    tol: float | None = None,
    max_iterations: int = MAX_NEWTON_ITERATIONS,
) -> ModeStack:
    """
    Solve the truncated mode equations on cells [-n_cells, n_cells].

    The default initial guess is u_1 = (bound state)/sqrt(3), u_m = 0 for
    m >= 3. With symmetric=True only the half window right of the symmetry
    point is solved (reflecting row there, zero at the far end) and the
    result is mirrored; this removes the near-translation mode of the
    full-window Jacobian.
    """
    if m_max < 1 or m_max % 2 == 0:
        raise ConfigurationError(f"M_max must be odd and >= 1, got {m_max}")
    report = validate_frequency(k, l)
    if not report.valid:
        raise InvalidFrequencyError(f"k={k}, l={l} violates the gap condition", report.reasons)
    geometry = Geometry(l)
    samples_per_pi = samples_per_pi or config.numerics.samples_per_pi
    n_cells = n_cells or default_mode_cells(eps, geometry)
    tol = config.numerics.newton_tol if tol is None else tol
    K = len(odd_modes(m_max))

    full = GraphGrid.for_cells(geometry, -n_cells, n_cells, samples_per_pi)
    if initial is None:
        state = find_bound_state(eps, family, l, k, n_cells, samples_per_pi)
        guess = np.zeros((K, full.n_nodes))
        guess[0] = state.profile.restrict(full).u / math.sqrt(3.0)
    else:
        family = initial.family or family
        guess = _on_grid(initial, full, K)

    coeffs = _linear_coefficients(K, k / 2.0, (k / 2.0) ** 2, eps)
    if symmetric:
        g0 = round(geometry.symmetry_point(family) / full.dx)
        grid = GraphGrid(geometry, samples_per_pi, g0, full.g_end)
        start = g0 - full.g_start
        ops = _operator_diagonals(grid, reflect_first=True)
        solved, iterations, sup = _newton(
            guess[:, start:], ops, coeffs, [grid.n_nodes - 1], tol, max_iterations
        )
        values = np.zeros_like(guess)
        values[:, start:] = solved
        # nodes whose mirror lies beyond the far end stay zero
        reach = min(start, solved.shape[1] - 1)
        values[:, start - reach : start] = solved[:, reach:0:-1]
    else:
        ops = _operator_diagonals(full, reflect_first=False)
        values, iterations, sup = _newton(
            guess, ops, coeffs, [0, full.n_nodes - 1], tol, max_iterations
        )

    stack = ModeStack(full, values, eps, k, family, iterations, sup)
    u1 = float(np.max(np.abs(values[0])))
    edge = float(np.max(np.abs(values[:, [1, -2]])))
    if u1 > 0.0 and edge > WINDOW_WARN_RATIO * u1:
        message = f"window too small: boundary-adjacent |u| = {edge:.3e} exceeds 1e-8 * |u_1|"
        logger.warning(message)
        stack.warnings.append(message)
    logger.info(
        f"modes eps={eps} k={k} l={l} M_max={m_max}: {iterations} Newton steps, "
        f"residual {sup:.3e}, |u_1|={u1:.6g}"
    )
    return stack


@dataclass(frozen=True)
class SlavingRow:
    eps: float
    norms: dict[int, float]


@dataclass
class SlavingReport:
    """Harmonic amplitudes against eps and log-log slopes against |u_1|"""

    k: int
    l: int
    m_max: int
    rows: list[SlavingRow]
    slopes: dict[int, float]
    stacks: dict[float, ModeStack] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "l": self.l,
            "m_max": self.m_max,
            "rows": [{"eps": r.eps, **{f"u{m}": v for m, v in r.norms.items()}} for r in self.rows],
            "slopes": {f"u{m}": v for m, v in self.slopes.items()},
        }


def fit_slopes(rows: list[SlavingRow]) -> dict[int, float]:
    """Slope of log|u_m| against log|u_1| for every m >= 3"""
    if len(rows) < 2:
        return {}
    log_u1 = np.log([r.norms[1] for r in rows])
    slopes = {}
    for m in sorted(rows[0].norms):
        if m == 1:
            continue
        slope, _ = np.polyfit(log_u1, np.log([r.norms[m] for r in rows]), 1)
        slopes[m] = float(slope)
    return slopes


def slaving_report(
    eps_grid: list[float],
    k: int,
    l: int,
    m_max: int,
    jobs: int = 1,
    n_cells: int | None = None,
    samples_per_pi: int | None = None,
) -> SlavingReport:
    """Solve every eps (in worker processes with jobs > 1) and fit the slaving orders"""
    results: dict[float, ModeStack] = {}
    if jobs <= 1 or len(eps_grid) == 1:
        for eps in eps_grid:
            results[eps] = solve_bvp(eps, k, l, m_max, n_cells, samples_per_pi)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            future_to_eps = {
                executor.submit(solve_bvp, eps, k, l, m_max, n_cells, samples_per_pi): eps
                for eps in eps_grid
            }
            for future in as_completed(future_to_eps):
                results[future_to_eps[future]] = future.result()

    rows = [SlavingRow(eps, results[eps].norms()) for eps in eps_grid]
    slopes = fit_slopes(rows) if m_max > 1 else {}
    for m, slope in slopes.items():
        logger.info(f"slaving slope |u_{m}| vs |u_1|: {slope:.3f}")
    return SlavingReport(k, l, m_max, rows, slopes, results)
