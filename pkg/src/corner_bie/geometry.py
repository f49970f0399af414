"""Polygon boundaries parametrized by arclength.

Corners are indexed ``0..r-1``; corner ``j`` sits at vertex ``j`` and edge
``j`` runs from vertex ``j`` to vertex ``j+1`` (modulo ``r``).  Points close to
a corner lose all relative precision when written as plane coordinates, so
boundary points are also kept in corner-local form: an *anchor* corner, the
edge, and the distance ``rho`` from the anchor along that edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CollinearCorner, DegenerateEdge, GeometryError, InvalidPartition, SelfIntersection


@dataclass(frozen=True, eq=False)
class Polygon:
    """Counterclockwise simple polygon with derived arclength data.

    Attributes
    ----------
    vertices : ndarray, shape (r, 2)
    edge_lengths : ndarray, shape (r,)
    perimeter : float
    corner_arclengths : ndarray, shape (r,)
        Cumulative edge lengths, ``s_0 = 0``.
    interior_angles : ndarray, shape (r,)
    corner_params : ndarray, shape (r,)
        ``p_j = 1 - theta_j / pi``; equals the turning angle over ``pi``.
    tangents, normals : ndarray, shape (r, 2)
        Unit tangent of edge ``j`` and the outward normal (tangent turned by ``-pi/2``).
    """

    vertices: np.ndarray
    edge_lengths: np.ndarray
    perimeter: float
    corner_arclengths: np.ndarray
    interior_angles: np.ndarray
    corner_params: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray

    @property
    def r(self) -> int:
        return len(self.vertices)

    @property
    def alpha_star(self) -> np.ndarray:
        """Regularity thresholds ``1 / (1 + |p_j|)``."""
        return 1.0 / (1.0 + np.abs(self.corner_params))

    def to_json(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.vertices]


@dataclass(frozen=True)
class PartitionSpec:
    """Breakpoints ``gamma_j`` with ``s_j < gamma_j < s_{j+1}`` (on edge ``j``)."""

    gamma: tuple[float, ...]


@dataclass(frozen=True)
class BoundarySample:
    s: float
    point: np.ndarray
    edge_index: int
    outward_normal: np.ndarray
    tangent: np.ndarray
    at_corner: bool = False


@dataclass(frozen=True, eq=False)
class BoundaryPoints:
    """A batch of boundary points in corner-local form.

    Point ``k`` lies on edge ``edge[k]`` at distance ``rho[k]`` from corner
    ``anchor[k]``; ``side[k]`` is ``+1`` when the edge leaves the anchor
    (``edge == anchor``) and ``-1`` when it arrives there.
    """

    polygon: Polygon
    anchor: np.ndarray
    side: np.ndarray
    rho: np.ndarray
    edge: np.ndarray = field(init=False)
    s: np.ndarray = field(init=False)
    offset: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        poly = self.polygon
        r = poly.r
        anchor = np.asarray(self.anchor, dtype=np.int64)
        side = np.asarray(self.side, dtype=np.int64)
        rho = np.asarray(self.rho, dtype=float)
        edge = np.where(side > 0, anchor, (anchor - 1) % r)
        direction = np.where((side > 0)[:, None], poly.tangents[edge], -poly.tangents[edge])
        s = poly.corner_arclengths[anchor] + side * rho
        s = np.where(s < 0.0, s + poly.perimeter, s)
        s = np.where(s >= poly.perimeter, s - poly.perimeter, s)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "edge", edge)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "offset", rho[:, None] * direction)

    def __len__(self) -> int:
        return len(self.rho)

    @property
    def xy(self) -> np.ndarray:
        """Plane coordinates (precision limited near corners)."""
        return self.polygon.vertices[self.anchor] + self.offset

    @property
    def normals(self) -> np.ndarray:
        return self.polygon.normals[self.edge]

    def take(self, index) -> "BoundaryPoints":
        return BoundaryPoints(self.polygon, self.anchor[index], self.side[index], self.rho[index])

    @classmethod
    def from_arclength(cls, polygon: Polygon, s) -> "BoundaryPoints":
        """Locate arclengths; each point is anchored at the nearer end of its edge.

        An arclength exactly at a corner lands on the edge departing that corner
        at ``rho = 0``.
        """
        s = reduce_arclength(polygon, np.atleast_1d(np.asarray(s, dtype=float)))
        edge = np.searchsorted(polygon.corner_arclengths, s, side="right") - 1
        start = s - polygon.corner_arclengths[edge]
        end = polygon.edge_lengths[edge] - start
        forward = start <= end
        anchor = np.where(forward, edge, (edge + 1) % polygon.r)
        side = np.where(forward, 1, -1)
        rho = np.where(forward, start, np.maximum(end, 0.0))
        return cls(polygon, anchor, side, rho)

    @classmethod
    def concat(cls, parts: Sequence["BoundaryPoints"]) -> "BoundaryPoints":
        return cls(
            parts[0].polygon,
            np.concatenate([p.anchor for p in parts]),
            np.concatenate([p.side for p in parts]),
            np.concatenate([p.rho for p in parts]),
        )


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True

    def on_segment(a, b, c, d) -> bool:
        return d == 0 and min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return (
        on_segment(q1, q2, p1, d1)
        or on_segment(q1, q2, p2, d2)
        or on_segment(p1, p2, q1, d3)
        or on_segment(p1, p2, q2, d4)
    )


def signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def build_polygon(vertices) -> Polygon:
    """Validate a vertex loop and derive the arclength parametrization.

    Clockwise input is reversed so the stored loop is counterclockwise.

    Raises
    ------
    DegenerateEdge, SelfIntersection, CollinearCorner, GeometryError
    """
    v = np.array(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise GeometryError("a polygon needs at least 3 vertices given as [x, y] pairs")
    if not np.all(np.isfinite(v)):
        raise GeometryError("vertex coordinates must be finite")
    r = len(v)
    nxt = np.roll(v, -1, axis=0)
    lengths = np.hypot(*(nxt - v).T)
    if np.any(lengths == 0.0):
        k = int(np.argmin(lengths))
        raise DegenerateEdge(f"edge {k} has zero length")

    for i in range(r):
        for j in range(i + 1, r):
            if j == i + 1 or (i == 0 and j == r - 1):
                continue
            if _segments_intersect(v[i], v[(i + 1) % r], v[j], v[(j + 1) % r]):
                raise SelfIntersection(f"edges {i} and {j} intersect")

    area = signed_area(v)
    if area == 0.0:
        raise GeometryError("vertex loop encloses no area")
    if area < 0.0:
        v = np.roll(v[::-1], 1, axis=0)  # keep the first input vertex at s = 0
        nxt = np.roll(v, -1, axis=0)
        lengths = np.hypot(*(nxt - v).T)

    tangents = (nxt - v) / lengths[:, None]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    incoming = np.roll(tangents, 1, axis=0)
    turning = np.arctan2(
        incoming[:, 0] * tangents[:, 1] - incoming[:, 1] * tangents[:, 0],
        np.sum(incoming * tangents, axis=1),
    )
    for j, phi in enumerate(turning):
        if phi == 0.0:
            raise CollinearCorner(f"vertex {j} has interior angle pi; it is not a corner")
        if abs(phi) > math.pi - 1e-12:
            raise GeometryError(f"vertex {j} is a cusp (|p_j| must stay below 1)")
    angles = math.pi - turning
    corner_s = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    return Polygon(
        vertices=v,
        edge_lengths=lengths,
        perimeter=float(np.sum(lengths)),
        corner_arclengths=corner_s,
        interior_angles=angles,
        corner_params=1.0 - angles / math.pi,
        tangents=tangents,
        normals=normals,
    )


def reduce_arclength(polygon: Polygon, s):
    """Reduce ``s`` into ``[0, L)``, subtracting ``L`` once when possible."""
    L = polygon.perimeter
    s = np.asarray(s, dtype=float)
    out = np.where((s >= L) & (s < 2 * L), s - L, s)
    out = np.where((out < 0.0) & (out >= -L), out + L, out)
    bad = (out < 0.0) | (out >= L)
    if np.any(bad):
        out = np.where(bad, np.mod(out, L), out)
        out = np.where(out >= L, 0.0, out)
    return out


def point_at(polygon: Polygon, s: float) -> BoundarySample:
    """Boundary sample at arclength ``s`` (interpreted modulo the perimeter).

    At a corner arclength the sample on the departing edge is returned with
    ``at_corner`` set.
    """
    s = float(reduce_arclength(polygon, s))
    e = int(np.searchsorted(polygon.corner_arclengths, s, side="right") - 1)
    local = s - polygon.corner_arclengths[e]
    t = polygon.tangents[e]
    return BoundarySample(
        s=s,
        point=polygon.vertices[e] + local * t,
        edge_index=e,
        outward_normal=polygon.normals[e].copy(),
        tangent=t.copy(),
        at_corner=local == 0.0,
    )


def default_partition(polygon: Polygon) -> PartitionSpec:
    """Edge midpoints in arclength."""
    return PartitionSpec(tuple(float(x) for x in polygon.corner_arclengths + 0.5 * polygon.edge_lengths))


def make_partition(polygon: Polygon, gamma) -> PartitionSpec:
    """Validate user breakpoints: ``gamma_j`` strictly inside edge ``j``."""
    gamma = tuple(float(g) for g in gamma)
    if len(gamma) != polygon.r:
        raise InvalidPartition(f"expected {polygon.r} breakpoints, got {len(gamma)}")
    margin = 1e-9 * polygon.perimeter
    for j, g in enumerate(gamma):
        lo = polygon.corner_arclengths[j]
        hi = lo + polygon.edge_lengths[j]
        if not (lo + margin < g < hi - margin):
            raise InvalidPartition(f"gamma_{j} = {g} must lie strictly inside edge {j} ({lo}, {hi})")
    return PartitionSpec(gamma)


def half_lengths(polygon: Polygon, partition: PartitionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Lengths of ``[gamma_{j-1}, s_j]`` and ``[s_j, gamma_j]`` for every corner."""
    gamma = np.asarray(partition.gamma)
    plus = gamma - polygon.corner_arclengths
    end_prev = np.roll(polygon.corner_arclengths + polygon.edge_lengths, 1)
    minus = end_prev - np.roll(gamma, 1)
    return minus, plus


def winding_angle(polygon: Polygon, x) -> float:
    """Total signed angle subtended by the boundary at plane point ``x``."""
    x = np.asarray(x, dtype=float)
    v1 = polygon.vertices - x
    v2 = np.roll(polygon.vertices, -1, axis=0) - x
    return float(np.sum(np.arctan2(v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0], np.sum(v1 * v2, axis=1))))


def is_interior(polygon: Polygon, x) -> bool:
    return abs(winding_angle(polygon, x) - 2 * math.pi) < 1e-6
