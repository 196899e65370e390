"""
Necklace graph geometry in the semicircle-symmetric subspace.

A symmetric function on the necklace is determined by its values on the
horizontal links and on ONE semicircle, so the graph is identified with the real
line: cell n is the link [nP, nP+L] followed by the semicircle [nP+L, (n+1)P].
At every vertex the value is continuous and the flux balance reads
u'_link = 2 u'_semicircle (two identical semicircles meet one link).

Discrete profiles live on a uniform node lattice x_g = g*dx with dx = pi/N, so
every vertex is a node. Vertex nodes are shared by the two adjacent segments
and carry two one-sided derivatives.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import sparse

from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Mass / flux weight of a semicircle sample relative to a link sample.
SEMICIRCLE_WEIGHT = 2.0


class Segment(str, Enum):
    """Segment kinds of one period cell"""

    LINK = "link"
    SEMICIRCLE = "semicircle"


class Family(str, Enum):
    """Symmetry point of a bound state"""

    LINK_CENTERED = "link"
    CIRCLE_CENTERED = "circle"


class Location(NamedTuple):
    cell: int
    segment: Segment
    local: float


@dataclass(frozen=True)
class VertexJump:
    """Multiplier applied to u' when crossing a vertex in the increasing-x direction"""

    factor: float

    def matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [0.0, self.factor]])


LINK_TO_SEMICIRCLE = VertexJump(1.0 / SEMICIRCLE_WEIGHT)
SEMICIRCLE_TO_LINK = VertexJump(SEMICIRCLE_WEIGHT)


@dataclass(frozen=True)
class Geometry:
    """Unit cell of the necklace: link of length l*pi, semicircle of length pi."""

    l: float

    def __post_init__(self) -> None:
        if not self.l > 0:
            raise ConfigurationError(f"link multiplier l must be positive, got {self.l}")

    @property
    def L(self) -> float:
        return self.l * math.pi

    @property
    def P(self) -> float:
        return self.L + math.pi

    @property
    def is_integer(self) -> bool:
        return float(self.l).is_integer()

    @property
    def breather_admissible(self) -> bool:
        """Odd integer l, the configurations the breather construction accepts"""
        return self.is_integer and int(self.l) % 2 == 1

    def segment_length(self, segment: Segment) -> float:
        return self.L if segment is Segment.LINK else math.pi

    def symmetry_point(self, family: Family) -> float:
        if family is Family.LINK_CENTERED:
            return self.L / 2
        return self.L + math.pi / 2

    def locate(self, x: float) -> Location:
        return locate(x, self)

    def position(self, cell: int, segment: Segment, local: float) -> float:
        """Inverse of locate"""
        offset = 0.0 if segment is Segment.LINK else self.L
        return cell * self.P + offset + local

    @staticmethod
    def reflect(x: float, x0: float) -> float:
        return 2.0 * x0 - x


def locate(x: float, geometry: Geometry) -> Location:
    """Map a global coordinate to (cell, segment, local coordinate)."""
    P = geometry.P
    cell = math.floor(x / P)
    r = x - cell * P
    # floor of a rounded quotient can be off by one at cell boundaries
    if r >= P:
        cell += 1
        r -= P
    elif r < 0:
        cell -= 1
        r += P
    if r < geometry.L:
        return Location(cell, Segment.LINK, r)
    return Location(cell, Segment.SEMICIRCLE, r - geometry.L)


@dataclass(frozen=True)
class GraphGrid:
    """
    Uniform node lattice g_start..g_end (inclusive) with spacing dx = pi/samples_per_pi.

    Requires an integer link multiplier so that both segment lengths are
    integer multiples of dx.
    """

    geometry: Geometry
    samples_per_pi: int
    g_start: int
    g_end: int
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.geometry.is_integer:
            raise ConfigurationError(
                f"grids need an integer link multiplier, got l={self.geometry.l}"
            )
        if self.samples_per_pi < 2 or self.samples_per_pi % 2:
            raise ConfigurationError(
                f"samples per pi must be even and >= 2, got {self.samples_per_pi}"
            )
        if self.g_end <= self.g_start:
            raise ConfigurationError("grid needs at least two nodes")

    @classmethod
    def for_cells(cls, geometry: Geometry, n_min: int, n_max: int, samples_per_pi: int) -> GraphGrid:
        """Grid covering full cells n_min..n_max"""
        per_cell = (int(geometry.l) + 1) * samples_per_pi
        return cls(geometry, samples_per_pi, n_min * per_cell, (n_max + 1) * per_cell)

    @property
    def dx(self) -> float:
        return math.pi / self.samples_per_pi

    @property
    def link_edges(self) -> int:
        return int(self.geometry.l) * self.samples_per_pi

    @property
    def per_cell(self) -> int:
        return self.link_edges + self.samples_per_pi

    @property
    def n_nodes(self) -> int:
        return self.g_end - self.g_start + 1

    @property
    def g(self) -> np.ndarray:
        return np.arange(self.g_start, self.g_end + 1)

    @property
    def x(self) -> np.ndarray:
        return self.g * self.dx

    @property
    def window(self) -> tuple[int, int]:
        """Cells touched by the grid"""
        return self.g_start // self.per_cell, (self.g_end - 1) // self.per_cell

    def node_of(self, x: float) -> int:
        """Local index of the node at coordinate x (must lie on the lattice)"""
        g = round(x / self.dx)
        if abs(g * self.dx - x) > 1e-9 * max(1.0, abs(x)):
            raise ConfigurationError(f"x={x} is not a lattice point of dx={self.dx}")
        if not self.g_start <= g <= self.g_end:
            raise ConfigurationError(f"x={x} lies outside the grid")
        return g - self.g_start

    def symmetry_node(self, family: Family) -> int:
        return self.node_of(self.geometry.symmetry_point(family))

    def edge_is_link(self) -> np.ndarray:
        """Per edge g -> g+1: True on links"""
        if "edge_is_link" not in self._cache:
            g = np.arange(self.g_start, self.g_end)
            self._cache["edge_is_link"] = (g % self.per_cell) < self.link_edges
        return self._cache["edge_is_link"]

    def edge_weights(self) -> np.ndarray:
        return np.where(self.edge_is_link(), 1.0, SEMICIRCLE_WEIGHT)

    def is_vertex(self) -> np.ndarray:
        offset = self.g % self.per_cell
        return (offset == 0) | (offset == self.link_edges)

    def node_mass(self) -> np.ndarray:
        """Lumped mass per node in units of dx (vertex: mean of adjacent edge weights)"""
        w = self.edge_weights()
        mass = np.empty(self.n_nodes)
        mass[1:-1] = 0.5 * (w[:-1] + w[1:])
        mass[0] = w[0]
        mass[-1] = w[-1]
        return mass

    def node_segments(self) -> tuple[np.ndarray, np.ndarray]:
        """(cell, is_link) per node, using the segment to the right of the node (left at the end)"""
        g = self.g.copy()
        g[-1] -= 1
        return g // self.per_cell, (g % self.per_cell) < self.link_edges

    def laplacian(self) -> sparse.csr_matrix:
        """
        Flux-balance graph Laplacian with zero rows at both ends (clamped nodes).

        (Lu)_j = [w_j (u_{j+1}-u_j) - w_{j-1} (u_j-u_{j-1})] / (m_j dx^2)
        """
        if "laplacian" not in self._cache:
            w = self.edge_weights()
            m = self.node_mass()
            h2 = self.dx**2
            n = self.n_nodes
            lower = np.zeros(n - 1)
            upper = np.zeros(n - 1)
            diag = np.zeros(n)
            inner = np.arange(1, n - 1)
            upper[inner] = w[inner] / (m[inner] * h2)
            lower[inner - 1] = w[inner - 1] / (m[inner] * h2)
            diag[inner] = -(w[inner] + w[inner - 1]) / (m[inner] * h2)
            self._cache["laplacian"] = sparse.diags(
                [lower, diag, upper], offsets=[-1, 0, 1], format="csr"
            )
        return self._cache["laplacian"]

    def segment_slices(self) -> Iterator[slice]:
        """Node slices of the smooth pieces between consecutive vertices / grid ends"""
        breaks = np.flatnonzero(self.is_vertex()[1:-1]) + 1
        bounds = [0, *breaks.tolist(), self.n_nodes - 1]
        for a, b in zip(bounds[:-1], bounds[1:]):
            yield slice(a, b + 1)


class CellSamples(NamedTuple):
    link_u: np.ndarray
    link_du: np.ndarray
    semicircle_u: np.ndarray
    semicircle_du: np.ndarray


@dataclass(frozen=True)
class GraphProfile:
    """
    Piecewise-smooth real function on the symmetric-subspace line.

    u is stored once per node; du_left / du_right are the one-sided derivatives
    (they differ only at vertex nodes).
    """

    grid: GraphGrid
    u: np.ndarray
    du_left: np.ndarray
    du_right: np.ndarray

    @property
    def geometry(self) -> Geometry:
        return self.grid.geometry

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def dx(self) -> float:
        return self.grid.dx

    @property
    def window(self) -> tuple[int, int]:
        return self.grid.window

    @classmethod
    def zeros(cls, grid: GraphGrid) -> GraphProfile:
        z = np.zeros(grid.n_nodes)
        return cls(grid, z, z.copy(), z.copy())

    @classmethod
    def from_values(cls, grid: GraphGrid, u: np.ndarray) -> GraphProfile:
        """
        Build a profile from node values.

        Derivatives are second-order differences on each smooth piece; at vertex
        nodes the two one-sided estimates are replaced by the common flux
        q = (w_L u'_L + w_R u'_R)/2 so the jump condition holds exactly.
        """
        u = np.asarray(u, dtype=float)
        du_left = np.zeros_like(u)
        du_right = np.zeros_like(u)
        for sl in grid.segment_slices():
            piece = u[sl]
            if piece.size >= 3:
                d = np.gradient(piece, grid.dx, edge_order=2)
            elif piece.size == 2:
                d = np.gradient(piece, grid.dx, edge_order=1)
            else:
                d = np.zeros(1)
            du_right[sl.start] = d[0]
            du_left[sl.start + 1 : sl.stop] = d[1:]
            du_right[sl.start + 1 : sl.stop - 1] = d[1:-1]
        du_left[0] = du_right[0]
        du_right[-1] = du_left[-1]

        w = grid.edge_weights()
        for j in np.flatnonzero(grid.is_vertex()[1:-1]) + 1:
            w_l, w_r = w[j - 1], w[j]
            q = 0.5 * (w_l * du_left[j] + w_r * du_right[j])
            du_left[j] = q / w_l
            du_right[j] = q / w_r
        return cls(grid, u, du_left, du_right)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.u))) if self.u.size else 0.0

    def scaled(self, factor: float) -> GraphProfile:
        return GraphProfile(self.grid, factor * self.u, factor * self.du_left, factor * self.du_right)

    def value_at(self, x: float) -> float:
        return float(self.u[self.grid.node_of(x)])

    def restrict(self, grid: GraphGrid) -> GraphProfile:
        """Sub-window on the same lattice"""
        if grid.g_start < self.grid.g_start or grid.g_end > self.grid.g_end:
            raise ConfigurationError("restriction window exceeds the profile window")
        sl = slice(grid.g_start - self.grid.g_start, grid.g_end - self.grid.g_start + 1)
        return GraphProfile(grid, self.u[sl].copy(), self.du_left[sl].copy(), self.du_right[sl].copy())

    def embed(self, grid: GraphGrid) -> GraphProfile:
        """Zero-pad onto a larger window of the same lattice"""
        if grid.g_start > self.grid.g_start or grid.g_end < self.grid.g_end:
            raise ConfigurationError("embedding window must contain the profile window")
        out = GraphProfile.zeros(grid)
        sl = slice(self.grid.g_start - grid.g_start, self.grid.g_end - grid.g_start + 1)
        out.u[sl] = self.u
        out.du_left[sl] = self.du_left
        out.du_right[sl] = self.du_right
        return out

    def cell_samples(self, n: int) -> CellSamples:
        """Link and semicircle samples of cell n, endpoints included"""
        g0 = n * self.grid.per_cell - self.grid.g_start
        gl = g0 + self.grid.link_edges
        g1 = g0 + self.grid.per_cell
        if g0 < 0 or g1 >= self.grid.n_nodes:
            raise ConfigurationError(f"cell {n} is outside the profile window {self.window}")
        link_du = self.du_right[g0 : gl + 1].copy()
        link_du[-1] = self.du_left[gl]
        semi_du = self.du_right[gl : g1 + 1].copy()
        semi_du[-1] = self.du_left[g1]
        return CellSamples(self.u[g0 : gl + 1], link_du, self.u[gl : g1 + 1], semi_du)

    def csv_rows(self) -> Iterator[tuple[float, float, float, int, str]]:
        """Rows (x, u, u', cell, segment); vertex rows duplicated, left side first"""
        x = self.x
        cells, is_link = self.grid.node_segments()
        vertex = self.grid.is_vertex()
        per_cell = self.grid.per_cell
        for j in range(self.grid.n_nodes):
            if vertex[j] and 0 < j < self.grid.n_nodes - 1:
                gl = self.grid.g_start + j - 1
                left_cell = gl // per_cell
                left_seg = Segment.LINK if (gl % per_cell) < self.grid.link_edges else Segment.SEMICIRCLE
                yield (x[j], self.u[j], self.du_left[j], int(left_cell), left_seg.value)
            seg = Segment.LINK if is_link[j] else Segment.SEMICIRCLE
            du = self.du_left[j] if j == self.grid.n_nodes - 1 else self.du_right[j]
            yield (x[j], self.u[j], du, int(cells[j]), seg.value)


def kirchhoff_residual(profile: GraphProfile) -> float:
    """
    Max flux defect |u'_link - 2 u'_semicircle| over interior vertices.

    Value continuity holds structurally (vertex values are shared nodes), so its
    defect contributes zero.
    """
    grid = profile.grid
    vertices = np.flatnonzero(grid.is_vertex()[1:-1]) + 1
    if vertices.size == 0:
        return 0.0
    left_is_link = grid.edge_is_link()[vertices - 1]
    d_l = profile.du_left[vertices]
    d_r = profile.du_right[vertices]
    defect = np.where(
        left_is_link,
        np.abs(d_l - SEMICIRCLE_WEIGHT * d_r),
        np.abs(d_r - SEMICIRCLE_WEIGHT * d_l),
    )
    return float(np.max(defect))
