"""Node layouts and incoming neighborhoods for planar perceptron grids.

Two layouts are supported: a rectangular grid whose nodes read from an open
Euclidean ball around their own position, and a polar ring/wedge grid whose
rings shrink geometrically toward a central blind spot and whose neighborhood
radius grows with the square root of a sector's radial distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "GridPosition",
    "NeighborhoodSpec",
    "PolarGeometry",
    "Topology",
    "cartesian_neighborhood",
    "cartesian_topology",
    "polar_geometry",
    "polar_neighborhood",
    "polar_topology",
]


@dataclass(frozen=True, order=True)
class GridPosition:
    """Integer node coordinates: (row, col) on a grid, (ring, wedge) on a polar grid."""

    row: int
    col: int


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Incoming-neighborhood radius; ``dynamic`` scales it per ring on polar grids."""

    radius: float
    dynamic: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"neighborhood radius must be positive, got {self.radius}")


# Radii quoted to two decimals (1.41, 2.24, 2.83) stand for the exact lattice
# distances sqrt(2), sqrt(5), sqrt(8).  Snap anything within display-rounding
# tolerance back to the exact value so the open ball stays strictly below it.
_SNAP_TOL = 0.005


def _open_ball_radius_sq(radius: float) -> float:
    nearest = round(radius * radius)
    if nearest >= 1 and abs(radius - math.sqrt(nearest)) <= _SNAP_TOL:
        return float(nearest)
    return radius * radius


def cartesian_neighborhood(
    center: GridPosition, radius: float, height: int, width: int
) -> list[GridPosition]:
    """All in-bounds positions strictly inside the Euclidean ball around ``center``.

    Membership is strict (distance < radius) so that a node at exactly the
    radius is excluded; the center itself is always a member.  Results are in
    row-major order and truncated at the grid edges.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if not (0 <= center.row < height and 0 <= center.col < width):
        raise ValueError(f"center {center} outside {height}x{width} grid")
    r2 = _open_ball_radius_sq(radius)
    reach = int(math.ceil(radius))
    members = []
    for row in range(max(0, center.row - reach), min(height, center.row + reach + 1)):
        dr2 = (row - center.row) ** 2
        for col in range(max(0, center.col - reach), min(width, center.col + reach + 1)):
            if dr2 + (col - center.col) ** 2 < r2:
                members.append(GridPosition(row, col))
    return members


@dataclass(frozen=True)
class PolarGeometry:
    """Ring/wedge discretization of a square source image.

    ``boundaries`` holds rings+1 radii in pixels, strictly decreasing from
    source_size/2 down to the blind-spot radius.  Ring k (innermost = 0) spans
    radii [boundaries[rings-k], boundaries[rings-k-1]).
    """

    source_size: int
    rings: int
    wedges: int
    ratio: float
    boundaries: tuple[float, ...]

    @property
    def blind_spot(self) -> float:
        return self.boundaries[self.rings]

    def ring_inner(self, ring: int) -> float:
        return self.boundaries[self.rings - ring]

    def ring_outer(self, ring: int) -> float:
        return self.boundaries[self.rings - ring - 1]

    def mid_radius(self, ring: int) -> float:
        return 0.5 * (self.ring_inner(ring) + self.ring_outer(ring))

    @property
    def n_sectors(self) -> int:
        return self.rings * self.wedges


def polar_geometry(source_size: int, rings: int, wedges: int) -> PolarGeometry:
    """Build the polar-picture geometry for a square source image.

    The ring ratio comes from the square-sector condition: each sector's
    radial width equals its mid-radius arc length, giving
    ratio = (1 - pi/wedges) / (1 + pi/wedges).
    """
    if source_size < 4 or source_size % 2 != 0:
        raise ValueError(f"source_size must be even and >= 4, got {source_size}")
    if rings < 1:
        raise ValueError(f"rings must be >= 1, got {rings}")
    if wedges < 3:
        raise ValueError(f"wedges must be >= 3, got {wedges}")
    ratio = (1.0 - math.pi / wedges) / (1.0 + math.pi / wedges)
    outer = source_size / 2.0
    boundaries = tuple(outer * ratio**j for j in range(rings + 1))
    if boundaries[-1] < 0.5:
        raise ValueError(
            f"blind-spot radius {boundaries[-1]:.3f}px is below half a pixel; "
            f"use fewer rings or a larger source"
        )
    return PolarGeometry(source_size, rings, wedges, ratio, boundaries)


def dynamic_radius(geometry: PolarGeometry, ring: int, base_radius: float) -> float:
    """Neighborhood radius for a ring, scaled by sqrt of its mid-radius.

    The outermost ring gets exactly ``base_radius``; inner rings shrink with
    the square root of their radial distance so small sectors do not connect
    across disproportionate index distances.
    """
    outer_mid = geometry.mid_radius(geometry.rings - 1)
    return base_radius * math.sqrt(geometry.mid_radius(ring) / outer_mid)


def polar_neighborhood(
    sector: GridPosition, geometry: PolarGeometry, base_radius: float = 2.0
) -> list[GridPosition]:
    """All sectors strictly inside the per-ring ball around ``sector``.

    Distance is Euclidean in (ring, wedge) index units; the wedge difference
    wraps to the shortest angular offset, the ring difference never wraps.
    Results are ring-major ordered.
    """
    rings, wedges = geometry.rings, geometry.wedges
    if not (0 <= sector.row < rings and 0 <= sector.col < wedges):
        raise ValueError(f"sector {sector} outside {rings}x{wedges} polar grid")
    if base_radius <= 0:
        raise ValueError(f"base_radius must be positive, got {base_radius}")
    rho = dynamic_radius(geometry, sector.row, base_radius)
    rho2 = rho * rho
    members = []
    for ring in range(rings):
        dr2 = (ring - sector.row) ** 2
        if dr2 >= rho2:
            continue
        for wedge in range(wedges):
            dw = abs(wedge - sector.col) % wedges
            dw = min(dw, wedges - dw)
            if dr2 + dw * dw < rho2:
                members.append(GridPosition(ring, wedge))
    return members


@dataclass(frozen=True)
class Topology:
    """Node set of a planar network plus each node's ordered incoming neighborhood.

    Nodes are indexed row-major (ring-major for polar grids); the neighborhood
    tuple is aligned with that ordering.
    """

    kind: str  # "cartesian" | "polar"
    height: int
    width: int
    neighborhood_spec: NeighborhoodSpec
    neighborhoods: tuple[tuple[GridPosition, ...], ...]
    polar: Optional[PolarGeometry] = None

    @property
    def n_nodes(self) -> int:
        return self.height * self.width

    def node_index(self, pos: GridPosition) -> int:
        return pos.row * self.width + pos.col

    def position(self, index: int) -> GridPosition:
        return GridPosition(index // self.width, index % self.width)

    @property
    def total_edges(self) -> int:
        return sum(len(n) for n in self.neighborhoods)


def cartesian_topology(height: int, width: int, radius: float = 2.0) -> Topology:
    """Rectangular grid of nodes with open-ball incoming neighborhoods."""
    if height < 1 or width < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    spec = NeighborhoodSpec(radius, dynamic=False)
    hoods = tuple(
        tuple(cartesian_neighborhood(GridPosition(r, c), radius, height, width))
        for r in range(height)
        for c in range(width)
    )
    return Topology("cartesian", height, width, spec, hoods)


def polar_topology(geometry: PolarGeometry, base_radius: float = 2.0) -> Topology:
    """Ring/wedge grid of nodes with dynamic-radius incoming neighborhoods."""
    spec = NeighborhoodSpec(base_radius, dynamic=True)
    hoods = tuple(
        tuple(polar_neighborhood(GridPosition(k, w), geometry, base_radius))
        for k in range(geometry.rings)
        for w in range(geometry.wedges)
    )
    return Topology("polar", geometry.rings, geometry.wedges, spec, hoods, polar=geometry)
