"""
Time-domain Klein-Gordon solver on the necklace (symmetric subspace).

    u_tt = u_xx - (alpha + eps^2) u + u^3

u_xx is the flux-balance graph Laplacian of GraphGrid, the far window ends
are clamped to zero and time stepping is Stormer-Verlet.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy.integrate import solve_ivp

from src.coupled_modes import ModeStack, odd_modes
from src.errors import SimulationError
from src.graph_core import Family, GraphGrid

logger = logging.getLogger(__name__)

CFL_LIMIT = 0.5
DEFAULT_DT_FACTOR = 0.25
PAD_CELLS = 2
TAIL_FRACTION = 0.75
CONTAMINATION_RATIO = 1e-6


@dataclass(frozen=True)
class SimState:
    """Field u, velocity v = u_t and time t on a graph grid"""

    grid: GraphGrid
    u: np.ndarray
    v: np.ndarray
    t: float
    k: int
    eps: float

    @property
    def omega(self) -> float:
        return self.k / 2.0

    @property
    def alpha(self) -> float:
        return self.omega**2

    @property
    def mass(self) -> float:
        """alpha + eps^2"""
        return self.alpha + self.eps**2

    @property
    def period(self) -> float:
        """T = 2 pi / omega = 4 pi / k"""
        return 4.0 * math.pi / self.k

    def phase_norm(self) -> float:
        """max(|u|_inf, |v|_inf / omega)"""
        return max(float(np.max(np.abs(self.u))), float(np.max(np.abs(self.v))) / self.omega)


def _padded_grid(grid: GraphGrid, pad_cells: int) -> GraphGrid:
    pad = pad_cells * grid.per_cell
    return GraphGrid(grid.geometry, grid.samples_per_pi, grid.g_start - pad, grid.g_end + pad)


def synthesize(stack: ModeStack, t: float) -> tuple[np.ndarray, np.ndarray]:
    """
    u(t) = -2 sum u_m sin(m omega t) and its time derivative on the stack grid.

    Real modes u_m carry the Fourier coefficients i u_m (m > 0) and -i u_m
    (m < 0).
    """
    omega = stack.omega
    u = np.zeros(stack.grid.n_nodes)
    v = np.zeros(stack.grid.n_nodes)
    for m in odd_modes(stack.m_max):
        um = stack.u(m)
        u -= 2.0 * np.sin(m * omega * t) * um
        v -= 2.0 * m * omega * np.cos(m * omega * t) * um
    return u, v


def synthesize_initial(stack: ModeStack, pad_cells: int = PAD_CELLS, t: float = 0.0) -> SimState:
    """Time-domain state at t on the stack window widened by pad_cells of zeros"""
    grid = _padded_grid(stack.grid, pad_cells)
    u_core, v_core = synthesize(stack, t)
    offset = stack.grid.g_start - grid.g_start
    u = np.zeros(grid.n_nodes)
    v = np.zeros(grid.n_nodes)
    u[offset : offset + u_core.size] = u_core
    v[offset : offset + v_core.size] = v_core
    u[[0, -1]] = 0.0
    v[[0, -1]] = 0.0
    return SimState(grid, u, v, t, stack.k, stack.eps)


def acceleration(state: SimState, u: np.ndarray, nonlinear: bool = True) -> np.ndarray:
    a = state.grid.laplacian() @ u - state.mass * u
    if nonlinear:
        a += u * u * u
    return a


def _check_cfl(grid: GraphGrid, dt: float) -> None:
    if not 0.0 < dt <= CFL_LIMIT * grid.dx * (1.0 + 1e-12):
        raise SimulationError(f"dt={dt:.6g} violates the CFL bound dt <= {CFL_LIMIT} dx = {CFL_LIMIT * grid.dx:.6g}")


def _clamp(u: np.ndarray, v: np.ndarray) -> None:
    u[[0, -1]] = 0.0
    v[[0, -1]] = 0.0


def step(state: SimState, dt: float, nonlinear: bool = True) -> SimState:
    """One kick-drift-kick Stormer-Verlet step"""
    _check_cfl(state.grid, dt)
    v_half = state.v + 0.5 * dt * acceleration(state, state.u, nonlinear)
    u = state.u + dt * v_half
    v = v_half + 0.5 * dt * acceleration(state, u, nonlinear)
    _clamp(u, v)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise SimulationError(f"non-finite field at t={state.t + dt:.6g}")
    return replace(state, u=u, v=v, t=state.t + dt)


def energy(state: SimState, nonlinear: bool = True) -> float:
    """
    Discrete energy conserved (up to O(dt^2)) by the scheme:
    sum m_j dx (v^2/2 + (alpha+eps^2) u^2/2 - u^4/4) + sum_e w_e dx (du/dx)^2 / 2
    """
    grid = state.grid
    dx = grid.dx
    u, v = state.u, state.v
    potential = state.mass * u**2 / 2.0
    if nonlinear:
        potential -= u**4 / 4.0
    node_part = np.sum(grid.node_mass() * dx * (v**2 / 2.0 + potential))
    grad = np.diff(u) / dx
    edge_part = np.sum(grid.edge_weights() * dx * grad**2 / 2.0)
    return float(node_part + edge_part)


@dataclass
class SimRun:
    final: SimState
    times: np.ndarray
    sup_norms: np.ndarray
    snapshots: list[tuple[float, np.ndarray]]


def simulate(
    state: SimState,
    dt: float,
    n_steps: int,
    snapshot_every: int | None = None,
    nonlinear: bool = True,
) -> SimRun:
    """
    n_steps Verlet steps reusing the end-of-step acceleration.

    Snapshots (t, u) are taken at the start and every snapshot_every steps.
    """
    _check_cfl(state.grid, dt)
    lap = state.grid.laplacian()
    mass = state.mass
    u = state.u.copy()
    v = state.v.copy()
    t0 = state.t

    def accel(x: np.ndarray) -> np.ndarray:
        a = lap @ x - mass * x
        if nonlinear:
            a += x * x * x
        return a

    times = np.empty(n_steps + 1)
    sup = np.empty(n_steps + 1)
    times[0] = t0
    sup[0] = float(np.max(np.abs(u)))
    snapshots = [(t0, u.copy())] if snapshot_every else []
    a = accel(u)
    for n in range(1, n_steps + 1):
        v += 0.5 * dt * a
        u += dt * v
        a = accel(u)
        v += 0.5 * dt * a
        _clamp(u, v)
        sup[n] = float(np.max(np.abs(u)))
        times[n] = t0 + n * dt
        if not math.isfinite(sup[n]):
            raise SimulationError(f"non-finite field at t={times[n]:.6g}")
        if snapshot_every and n % snapshot_every == 0:
            snapshots.append((times[n], u.copy()))
    final = replace(state, u=u, v=v, t=t0 + n_steps * dt)
    return SimRun(final, times, sup, snapshots)


def return_error(state: SimState, reference: SimState) -> float:
    """max(|du|, |dv|/omega) / max(|u0|, |v0|/omega)"""
    scale = reference.phase_norm()
    if scale == 0.0:
        return 0.0
    du = float(np.max(np.abs(state.u - reference.u)))
    dv = float(np.max(np.abs(state.v - reference.v))) / state.omega
    return max(du, dv) / scale


def _tail_mask(grid: GraphGrid, x0: float) -> np.ndarray:
    x = grid.x
    half_width = min(x0 - x[0], x[-1] - x0)
    return np.abs(x - x0) > TAIL_FRACTION * half_width


def tail_amplitude(state: SimState, mask: np.ndarray) -> float:
    return max(float(np.max(np.abs(state.u[mask]))), float(np.max(np.abs(state.v[mask]))) / state.omega)


@dataclass
class BreatherDiagnostics:
    """Per-period return errors, energy drift and tail growth of one run"""

    period: float
    dt: float
    n_periods: int
    rho_per_period: list[float]
    energy_drift: float
    energies: list[float]  # every quarter period, starting at t = 0
    tail_amplitudes: list[float]
    times: np.ndarray
    sup_norms: np.ndarray
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    grid: GraphGrid | None = field(default=None, repr=False)

    @property
    def rho(self) -> float:
        """Return error after the first period"""
        return self.rho_per_period[0]

    @property
    def tail_growth(self) -> float:
        initial = self.tail_amplitudes[0]
        return max(self.tail_amplitudes) / initial if initial > 0.0 else float("inf")

    def to_dict(self) -> dict[str, Any]:
        return {
            "period": self.period,
            "dt": self.dt,
            "n_periods": self.n_periods,
            "rho": self.rho,
            "rho_per_period": list(self.rho_per_period),
            "energy_drift": self.energy_drift,
            "tail_amplitudes": list(self.tail_amplitudes),
            "tail_growth": self.tail_growth,
            "max_norm": float(np.max(self.sup_norms)),
            "warnings": list(self.warnings),
        }


def run_breather(
    stack: ModeStack,
    dt: float | None = None,
    n_periods: int = 1,
    nonlinear: bool = True,
    pad_cells: int = PAD_CELLS,
    snapshots: bool = False,
) -> BreatherDiagnostics:
    """
    Evolve the synthesized breather for n_periods of T = 4 pi / k.

    dt defaults to dx/4 and is shrunk so that T is an integer number of steps.
    Snapshots, when requested, are taken every quarter period.
    """
    state0 = synthesize_initial(stack, pad_cells)
    grid = state0.grid
    period = state0.period
    dt = DEFAULT_DT_FACTOR * grid.dx if dt is None else dt
    n_steps = max(1, math.ceil(period / dt - 1e-9))
    # a quarter period must also be a whole number of steps for the snapshots
    n_steps = 4 * math.ceil(n_steps / 4)
    dt = period / n_steps
    _check_cfl(grid, dt)

    x0 = grid.geometry.symmetry_point(stack.family or Family.LINK_CENTERED)
    mask = _tail_mask(grid, x0)
    e0 = energy(state0, nonlinear)
    warnings: list[str] = []

    rhos, energies = [], [e0]
    tails = [tail_amplitude(state0, mask)]
    times, norms, shots = [], [], []
    state = state0
    quarter = n_steps // 4
    for p in range(n_periods):
        # energy is sampled every quarter period
        for q in range(4):
            run = simulate(state, dt, quarter, quarter if snapshots else None, nonlinear)
            state = run.final
            energies.append(energy(state, nonlinear))
            start = 0 if p == q == 0 else 1
            times.append(run.times[start:])
            norms.append(run.sup_norms[start:])
            shots.extend(run.snapshots[start:])
        rhos.append(return_error(state, state0))
        tails.append(tail_amplitude(state, mask))
        logger.debug(f"period {p + 1}: rho={rhos[-1]:.3e}, tail={tails[-1]:.3e}")

        edge = max(abs(state.u[1]), abs(state.u[-2]), abs(state.v[1]) / state.omega, abs(state.v[-2]) / state.omega)
        if edge > CONTAMINATION_RATIO * state.phase_norm():
            message = f"reflection contamination: boundary amplitude {edge:.3e} after period {p + 1}"
            if not any(w.startswith("reflection contamination") for w in warnings):
                logger.warning(message)
            warnings.append(message)

    scale = abs(e0) if e0 != 0.0 else 1.0
    drift = max(abs(e - e0) for e in energies) / scale
    diagnostics = BreatherDiagnostics(
        period=period,
        dt=dt,
        n_periods=n_periods,
        rho_per_period=rhos,
        energy_drift=drift,
        energies=energies,
        tail_amplitudes=tails,
        times=np.concatenate(times),
        sup_norms=np.concatenate(norms),
        snapshots=shots,
        warnings=warnings,
        grid=grid,
    )
    logger.info(
        f"breather eps={stack.eps} M_max={stack.m_max}: rho={diagnostics.rho:.3e}, "
        f"energy drift={drift:.3e}, tail growth={diagnostics.tail_growth:.3g}"
    )
    return diagnostics


def ode_reference(
    u0: float,
    v0: float,
    mass: float,
    t_end: float,
    nonlinear: bool = True,
) -> tuple[float, float]:
    """High-accuracy solution of u'' = -mass u + u^3 (spatially constant fields)"""

    def rhs(_t: float, y: np.ndarray) -> list[float]:
        u, v = y
        return [v, -mass * u + (u**3 if nonlinear else 0.0)]

    sol = solve_ivp(rhs, (0.0, t_end), [u0, v0], method="DOP853", rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1]), float(sol.y[1, -1])
