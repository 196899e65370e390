"""
Symmetric homoclinic bound states of u'' = eps^2 u - u^3 on the necklace.

A bound state is even about a symmetry point x0 (mid-link or mid-semicircle),
so it is found by shooting from (u, u') = (a, 0) at x0 towards +x and
bisecting on a until the orbit lands on the stable manifold of the zero
state. The left half is the mirror image.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from scipy import optimize

from src.config import config
from src.errors import BracketError, ConfigurationError, InvalidFrequencyError, NecklaceError
from src.floquet import FloquetSplitting, classify, monodromy, stable_direction
from src.graph_core import (
    LINK_TO_SEMICIRCLE,
    SEMICIRCLE_TO_LINK,
    Family,
    Geometry,
    GraphGrid,
    GraphProfile,
)
from src.spectrum import validate_frequency

logger = logging.getLogger(__name__)

ESCAPE_FACTOR = 10.0
# below this fraction of a (at a cell boundary) the tail follows the stable direction
TAIL_THRESHOLD = 1e-5
# the decay fit uses cell samples below this fraction of a
FIT_THRESHOLD = 1e-2
MAX_BISECTIONS = 200
BRACKET = (0.1, 10.0)

SymmetryCheck = Literal["reflection", "cross_check"]


def default_cells(eps: float, geometry: Geometry, decades: float = 12.0) -> int:
    """Cells per side so that exp(-eps * x) reaches exp(-decades) inside the window"""
    return math.ceil(decades / (eps * geometry.P))


@dataclass
class _March:
    """Raw output of one RK4 sweep"""

    u: np.ndarray
    du_arrive: np.ndarray
    du_depart: np.ndarray
    escape: int
    escape_x: float | None
    projection_x: float | None
    final_state: tuple[float, float]
    completed: bool


def _march(
    eps: float,
    amplitude: float,
    geometry: Geometry,
    samples_per_pi: int,
    g0: int,
    n_steps: int,
    direction: int = 1,
    jumps: bool = True,
    stop_on_escape: bool = False,
    splitting: FloquetSplitting | None = None,
) -> _March:
    """
    Classical RK4 with step dx from node g0, n_steps nodes in `direction`.

    du_arrive is the derivative on the side the sweep comes from, du_depart the
    one after the vertex jump. With a splitting (rightward only), every cell
    boundary state once |u| < TAIL_THRESHOLD * a is projected onto the stable
    Floquet direction.
    """
    dx = math.pi / samples_per_pi
    per_cell = (int(geometry.l) + 1) * samples_per_pi
    link_edges = int(geometry.l) * samples_per_pi
    eps2 = eps * eps
    h = direction * dx
    h2 = 0.5 * h
    h6 = h / 6.0
    # rightward crossings multiply u' by the factor, leftward ones divide by it
    into_semi = LINK_TO_SEMICIRCLE.factor if direction > 0 else 1.0 / SEMICIRCLE_TO_LINK.factor
    into_link = SEMICIRCLE_TO_LINK.factor if direction > 0 else 1.0 / LINK_TO_SEMICIRCLE.factor

    u_out = np.zeros(n_steps + 1)
    arrive = np.zeros(n_steps + 1)
    depart = np.zeros(n_steps + 1)
    u, p = float(amplitude), 0.0
    u_out[0] = u

    escape = 0
    escape_x = None
    projecting = False
    projection_x = None
    last = n_steps
    for i in range(1, n_steps + 1):
        k1u = p
        k1p = eps2 * u - u * u * u
        w = u + h2 * k1u
        k2u = p + h2 * k1p
        k2p = eps2 * w - w * w * w
        w = u + h2 * k2u
        k3u = p + h2 * k2p
        k3p = eps2 * w - w * w * w
        w = u + h * k3u
        k4u = p + h * k3p
        k4p = eps2 * w - w * w * w
        u += h6 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        p += h6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)

        g = g0 + direction * i
        offset = g % per_cell
        p_arrive = p
        if jumps:
            # crossing into the segment that starts (rightward) or ends (leftward) here
            entering_semi = offset == link_edges if direction > 0 else offset == 0
            entering_link = offset == 0 if direction > 0 else offset == link_edges
            if entering_semi:
                p *= into_semi
            elif entering_link:
                p *= into_link

        if splitting is not None and offset == 0:
            if not projecting and abs(u) < TAIL_THRESHOLD * amplitude:
                projecting = True
                projection_x = g * dx
            if projecting:
                u, p = (float(c) for c in splitting.project_stable(np.array([u, p])))
                p_arrive = p / SEMICIRCLE_TO_LINK.factor

        u_out[i] = u
        arrive[i] = p_arrive
        depart[i] = p

        if escape == 0 and not projecting:
            if u < 0.0:
                escape = -1
            elif direction * p > 0.0 or u > ESCAPE_FACTOR * amplitude:
                escape = 1
            if escape:
                escape_x = g * dx
                if stop_on_escape:
                    last = i
                    break

    return _March(
        u_out[: last + 1],
        arrive[: last + 1],
        depart[: last + 1],
        escape,
        escape_x,
        projection_x,
        (u, p),
        last == n_steps,
    )


@dataclass
class ShotResult:
    """Outcome of one shot; profile is None when the run stopped at an escape"""

    eps: float
    family: Family
    amplitude: float
    profile: GraphProfile | None
    escape: int
    escape_x: float | None
    final_sign: int
    projection_x: float | None

    @property
    def sign(self) -> int:
        """+1: amplitude too small, -1: too large, 0: undecided"""
        return self.escape if self.escape else self.final_sign


def _unstable_sign(state: tuple[float, float], eps: float, splitting: FloquetSplitting | None) -> int:
    if splitting is not None:
        _, c_u = splitting.components(np.array(state))
    else:
        # on the line the unstable direction is (1, eps)
        c_u = eps * state[0] + state[1]
    return int(np.sign(c_u))


def _mirror(grid: GraphGrid, g0: int, march: _March) -> GraphProfile:
    """Assemble the even extension about node g0 and restrict it to grid"""
    n = march.u.size
    g_lo = g0 - (n - 1)
    u = np.concatenate([march.u[:0:-1], march.u])
    du_left = np.concatenate([-march.du_depart[:0:-1], march.du_arrive])
    du_right = np.concatenate([-march.du_arrive[:0:-1], march.du_depart])
    full = GraphGrid(grid.geometry, grid.samples_per_pi, g_lo, g0 + n - 1)
    return GraphProfile(full, u, du_left, du_right).restrict(grid)


def shoot(
    eps: float,
    family: Family,
    amplitude: float,
    n_cells: int | None = None,
    geometry: Geometry | None = None,
    samples_per_pi: int | None = None,
    jumps: bool = True,
    stop_on_escape: bool = True,
    project_tail: bool = False,
) -> ShotResult:
    """
    Integrate u'' = eps^2 u - u^3 from (a, 0) at the symmetry point and mirror.

    jumps=False turns the graph into the plain line (test hook). The escape
    sign is -1 when u crosses zero and +1 when the orbit turns back up or
    exceeds 10a; with stop_on_escape the run ends there and no profile is
    built.
    """
    if not 0.0 < eps <= 0.5:
        raise ConfigurationError(f"eps must lie in (0, 0.5], got {eps}")
    if amplitude < 0.0:
        raise ConfigurationError(f"amplitude must be non-negative, got {amplitude}")
    geometry = geometry or Geometry(1)
    samples_per_pi = samples_per_pi or config.numerics.samples_per_pi
    n_cells = n_cells or default_cells(eps, geometry)

    grid = GraphGrid.for_cells(geometry, -n_cells, n_cells, samples_per_pi)
    x0 = geometry.symmetry_point(family)
    g0 = round(x0 / grid.dx)
    # the mirror image must reach the left end of the window; stop on a cell boundary
    g_needed = max(grid.g_end, 2 * g0 - grid.g_start)
    g_end = grid.per_cell * math.ceil(g_needed / grid.per_cell)

    splitting = stable_direction(-eps * eps, geometry) if jumps else None
    march = _march(
        eps,
        amplitude,
        geometry,
        samples_per_pi,
        g0,
        g_end - g0,
        jumps=jumps,
        stop_on_escape=stop_on_escape,
        splitting=splitting if project_tail else None,
    )
    profile = _mirror(grid, g0, march) if march.completed else None
    final_sign = _unstable_sign(march.final_state, eps, splitting) if march.completed else 0
    return ShotResult(
        eps, family, amplitude, profile, march.escape, march.escape_x, final_sign, march.projection_x
    )


@dataclass
class BoundState:
    """Even, positive homoclinic profile about its symmetry point"""

    eps: float
    family: Family
    profile: GraphProfile
    amplitude: float
    beta_hat: float
    beta_lin: float
    n_cells: int
    bisections: int
    projection_x: float | None

    @property
    def geometry(self) -> Geometry:
        return self.profile.geometry

    @property
    def x0(self) -> float:
        return self.geometry.symmetry_point(self.family)

    @property
    def max_u(self) -> float:
        return self.profile.sup_norm()

    @property
    def c0(self) -> float:
        """Measured ratio max|u| / eps"""
        return self.max_u / self.eps

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "family": self.family.value,
            "amplitude": self.amplitude,
            "beta_hat": self.beta_hat,
            "beta_lin": self.beta_lin,
            "max_u": self.max_u,
            "c0": self.c0,
            "window": list(self.profile.window),
            "projection_x": self.projection_x,
        }


def linear_decay_rate(eps: float, geometry: Geometry) -> float:
    """beta_lin with 2 cosh(beta_lin P) = tr M(-eps^2)"""
    return classify(monodromy(-eps * eps, geometry)).exponent


def _fit_decay(profile: GraphProfile, x0: float, amplitude: float, stop_x: float | None) -> float:
    """Slope of log u along x0 + nP inside the small-amplitude region"""
    geometry = profile.geometry
    xs, logs = [], []
    n = 1
    while True:
        x = x0 + n * geometry.P
        if x > profile.x[-1] or (stop_x is not None and x > stop_x):
            break
        value = profile.value_at(x)
        if 0.0 < value < FIT_THRESHOLD * amplitude:
            xs.append(x)
            logs.append(math.log(value))
        n += 1
    if len(xs) < 2:
        logger.warning("too few tail samples for a decay fit")
        return float("nan")
    slope, _ = np.polyfit(xs, logs, 1)
    return float(-slope)


def find_bound_state(
    eps: float,
    family: Family,
    l: int = 1,
    k: int = 1,
    n_cells: int | None = None,
    samples_per_pi: int | None = None,
    rtol: float | None = None,
) -> BoundState:
    """
    Bisection on the shooting amplitude inside [0.1, 10] * sqrt(2) eps.

    The converged profile is re-shot with the tail projected onto the stable
    direction so the window can extend past the shadowing horizon.
    """
    report = validate_frequency(k, l)
    if not report.valid:
        raise InvalidFrequencyError(
            f"k={k}, l={l} violates the gap condition; no bound state is constructed",
            report.reasons,
        )
    geometry = Geometry(l)
    samples_per_pi = samples_per_pi or config.numerics.samples_per_pi
    n_cells = n_cells or default_cells(eps, geometry)
    rtol = config.numerics.bisection_rtol if rtol is None else rtol

    def sign(a: float) -> int:
        return shoot(eps, family, a, n_cells, geometry, samples_per_pi).sign

    lo, hi = (f * math.sqrt(2.0) * eps for f in BRACKET)
    s_lo, s_hi = sign(lo), sign(hi)
    if s_lo != 1 or s_hi != -1:
        raise BracketError(
            f"bracket [{lo:.6g}, {hi:.6g}] does not separate the escape directions "
            f"(signs {s_lo}, {s_hi})",
            (s_lo, s_hi),
            (lo, hi),
        )

    # scipy refuses rtol below 4 machine epsilons
    rtol = max(rtol, 4.0 * np.finfo(float).eps)
    amplitude, result = optimize.bisect(
        sign, lo, hi, xtol=rtol * lo, rtol=rtol, maxiter=MAX_BISECTIONS, full_output=True, disp=False
    )
    iterations = result.iterations
    if not result.converged:
        logger.warning(f"amplitude bisection stopped after {iterations} steps at a={amplitude!r}")
    shot = shoot(
        eps,
        family,
        amplitude,
        n_cells,
        geometry,
        samples_per_pi,
        stop_on_escape=False,
        project_tail=True,
    )
    profile = shot.profile
    if profile is None:
        raise NecklaceError(f"final shot at a={amplitude!r} did not complete")
    x0 = geometry.symmetry_point(family)
    beta_hat = _fit_decay(profile, x0, amplitude, shot.projection_x)
    beta_lin = linear_decay_rate(eps, geometry)
    state = BoundState(
        eps, family, profile, amplitude, beta_hat, beta_lin, n_cells, iterations, shot.projection_x
    )
    logger.info(
        f"bound state eps={eps} family={family.value}: a={amplitude:.12g}, "
        f"max/eps={state.c0:.4f}, beta_hat={beta_hat:.5g}, beta_lin={beta_lin:.5g}"
    )
    if profile.u.min() <= 0.0:
        logger.warning(f"bound state eps={eps} family={family.value} is not positive on the window")
    return state


def reversibility_residual(state: BoundState, mode: SymmetryCheck = "reflection") -> float:
    """
    max |u(x0 + d) - u(x0 - d)|.

    reflection compares the stored profile with itself; cross_check integrates
    the left half independently (step -dx) and compares it with the stored
    right half wherever the rightward run was still a plain shot.
    """
    profile = state.profile
    grid = profile.grid
    g0 = round(state.x0 / grid.dx)
    j0 = g0 - grid.g_start
    reach = min(j0, grid.n_nodes - 1 - j0)
    if reach == 0 or not np.any(profile.u):
        return 0.0

    right = profile.u[j0 : j0 + reach + 1]
    if mode == "reflection":
        left = profile.u[j0 - reach : j0 + 1][::-1]
        return float(np.max(np.abs(right - left)))
    if mode != "cross_check":
        raise ConfigurationError(f"unknown symmetry check {mode!r}")

    march = _march(
        state.eps, state.amplitude, state.geometry, grid.samples_per_pi, g0, reach, direction=-1
    )
    reliable = right >= TAIL_THRESHOLD * state.amplitude
    if state.projection_x is not None:
        reliable &= np.arange(reach + 1) * grid.dx < state.projection_x - state.x0
    return float(np.max(np.abs(right - march.u)[reliable]))
