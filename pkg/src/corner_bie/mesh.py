"""Corner-graded meshes built segment by segment.

Segment ``j`` is ``[gamma_{j-1}, gamma_j]`` around corner ``j``.  Each of its
two halves carries ``n_j`` panels whose breakpoints sit at distances
``(i / n_j) ** q_j * length`` from the corner.  Breakpoints are always
recomputed from that law; nothing here bisects existing panels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidSpec, SegmentOutOfRange, UnsupportedOrder
from .geometry import BoundaryPoints, PartitionSpec, Polygon, half_lengths


@dataclass(frozen=True)
class GradedMeshSpec:
    n: tuple[int, ...]
    q: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        if len(self.n) != len(self.q):
            raise InvalidSpec(f"n has {len(self.n)} entries but q has {len(self.q)}")
        if any(v < 1 for v in self.n):
            raise InvalidSpec("every n_j must be at least 1")
        if any(not np.isfinite(v) or v < 1.0 for v in self.q):
            raise InvalidSpec("grading exponents q_j must be real numbers >= 1")

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(1.0 / v for v in self.n)

    def doubled(self, j: int | None = None) -> "GradedMeshSpec":
        if j is None:
            return replace(self, n=tuple(2 * v for v in self.n))
        n = list(self.n)
        n[j] *= 2
        return replace(self, n=tuple(n))


@dataclass(frozen=True)
class Panel:
    t_lo: float
    t_hi: float
    width: float
    edge_index: int
    endpoints_plane: tuple[np.ndarray, np.ndarray]
    midpoint_arclength: float
    corner: int
    side: int
    rho_near: float
    rho_far: float


def graded_nodes(n: int, q: float, length: float) -> np.ndarray:
    """Distances ``(i/n)^q * length`` from the corner, ``i = 0..n``."""
    return (np.arange(n + 1) / n) ** q * length


@dataclass(frozen=True, eq=False)
class GradedMesh:
    """Panels in boundary order, segment by segment (minus half, then plus half).

    Per-panel arrays are indexed by panel number.  ``rho_near < rho_far`` are
    the distances of the panel ends from its corner.
    """

    polygon: Polygon
    partition: PartitionSpec
    spec: GradedMeshSpec
    corner: np.ndarray = field(repr=False)
    side: np.ndarray = field(repr=False)
    rho_near: np.ndarray = field(repr=False)
    rho_far: np.ndarray = field(repr=False)
    segment_nodes: tuple = field(repr=False)

    @property
    def n_panels(self) -> int:
        return len(self.corner)

    @property
    def h_max(self) -> float:
        return max(self.spec.h)

    @cached_property
    def edge(self) -> np.ndarray:
        r = self.polygon.r
        return np.where(self.side > 0, self.corner, (self.corner - 1) % r)

    @cached_property
    def width(self) -> np.ndarray:
        return self.rho_far - self.rho_near

    @cached_property
    def t_lo(self) -> np.ndarray:
        s = self.polygon.corner_arclengths[self.corner]
        t = np.where(self.side > 0, s + self.rho_near, s - self.rho_far)
        return np.where(t < 0.0, t + self.polygon.perimeter, t)

    @property
    def t_hi(self) -> np.ndarray:
        return self.t_lo + self.width

    @property
    def segment_of_panel(self) -> list[tuple[int, int]]:
        return list(zip(self.corner.tolist(), self.side.tolist()))

    def start_points(self) -> BoundaryPoints:
        """Panel start points in boundary orientation."""
        rho = np.where(self.side > 0, self.rho_near, self.rho_far)
        return BoundaryPoints(self.polygon, self.corner, self.side, rho)

    def end_points(self) -> BoundaryPoints:
        rho = np.where(self.side > 0, self.rho_far, self.rho_near)
        return BoundaryPoints(self.polygon, self.corner, self.side, rho)

    def panel(self, i: int) -> Panel:
        a = self.start_points().take(np.array([i]))
        b = self.end_points().take(np.array([i]))
        t_lo = float(self.t_lo[i])
        w = float(self.width[i])
        return Panel(
            t_lo=t_lo,
            t_hi=t_lo + w,
            width=w,
            edge_index=int(self.edge[i]),
            endpoints_plane=(a.xy[0], b.xy[0]),
            midpoint_arclength=t_lo + 0.5 * w,
            corner=int(self.corner[i]),
            side=int(self.side[i]),
            rho_near=float(self.rho_near[i]),
            rho_far=float(self.rho_far[i]),
        )

    @property
    def panels(self) -> list[Panel]:
        return [self.panel(i) for i in range(self.n_panels)]

    def panel_range(self, j: int, side: int) -> slice:
        """Panel indices of one half-segment."""
        offsets = np.concatenate([[0], np.cumsum(2 * np.asarray(self.spec.n))])
        start = int(offsets[j])
        nj = self.spec.n[j]
        return slice(start, start + nj) if side < 0 else slice(start + nj, start + 2 * nj)

    def to_segments(self, points: BoundaryPoints) -> BoundaryPoints:
        """Re-anchor points so each is measured from the corner of its segment."""
        poly = self.polygon
        minus, plus = half_lengths(poly, self.partition)
        anchor = points.anchor.copy()
        side = points.side.copy()
        rho = points.rho.copy()
        e = points.edge
        fwd = side > 0
        # forward-anchored points beyond gamma_e belong to the next corner
        move = fwd & (rho > plus[e])
        rho[move] = poly.edge_lengths[e[move]] - rho[move]
        anchor[move] = (e[move] + 1) % poly.r
        side[move] = -1
        back = ~fwd & (rho > minus[anchor])
        back_e = e[back]
        rho[back] = poly.edge_lengths[back_e] - rho[back]
        anchor[back] = back_e
        side[back] = 1
        return BoundaryPoints(poly, anchor, side, np.maximum(rho, 0.0))

    def locate(self, points: BoundaryPoints) -> np.ndarray:
        """Panel index of each point (a point on a breakpoint goes to the farther panel)."""
        pts = self.to_segments(points)
        out = np.empty(len(pts), dtype=np.int64)
        for k in range(len(pts)):
            j = int(pts.anchor[k])
            sd = int(pts.side[k])
            nodes = self.segment_nodes[j][0 if sd < 0 else 1]
            i = int(np.searchsorted(nodes, pts.rho[k], side="right")) - 1
            i = min(max(i, 0), len(nodes) - 2)
            rng = self.panel_range(j, sd)
            out[k] = rng.start + i if sd > 0 else rng.stop - 1 - i
        return out


def build_graded_mesh(polygon: Polygon, partition: PartitionSpec, spec: GradedMeshSpec) -> GradedMesh:
    r = polygon.r
    if len(spec.n) != r or len(partition.gamma) != r:
        raise InvalidSpec(f"mesh spec and partition need {r} entries, one per corner")
    minus, plus = half_lengths(polygon, partition)
    corner, side, near, far, seg_nodes = [], [], [], [], []
    for j in range(r):
        n, q = spec.n[j], spec.q[j]
        nodes_m = graded_nodes(n, q, minus[j])
        nodes_p = graded_nodes(n, q, plus[j])
        seg_nodes.append((nodes_m, nodes_p))
        # minus half in boundary order: farthest panel first
        corner += [j] * (2 * n)
        side += [-1] * n + [1] * n
        near += list(nodes_m[:-1][::-1]) + list(nodes_p[:-1])
        far += list(nodes_m[1:][::-1]) + list(nodes_p[1:])
    return GradedMesh(
        polygon=polygon,
        partition=partition,
        spec=spec,
        corner=np.array(corner, dtype=np.int64),
        side=np.array(side, dtype=np.int64),
        rho_near=np.array(near),
        rho_far=np.array(far),
        segment_nodes=tuple(seg_nodes),
    )


def segment_breakpoints(mesh: GradedMesh, j: int) -> np.ndarray:
    """Arclength nodes ``t_{j,0..2n_j}`` of segment ``j`` relative to ``s_j``."""
    nodes_m, nodes_p = mesh.segment_nodes[j]
    return np.concatenate([-nodes_m[::-1], nodes_p[1:]])


def recommend_grading(polygon: Polygon, expansion_order: int) -> list[float]:
    """Grading exponents ``order * (1 + |p_j|) + 1``.

    This clears the strict requirement ``q_j > order / alpha_j`` for some
    ``alpha_j`` below ``1 / (1 + |p_j|)``.
    """
    if expansion_order not in (2, 4):
        raise UnsupportedOrder(f"expansion order must be 2 or 4, got {expansion_order}")
    return [float(expansion_order * (1.0 + abs(p)) + 1.0) for p in polygon.corner_params]


def refine_segment(mesh: GradedMesh, j: int) -> GradedMesh:
    """Double ``n_j`` and rebuild that segment from the node law."""
    if not 0 <= j < mesh.polygon.r:
        raise SegmentOutOfRange(f"segment {j} out of range 0..{mesh.polygon.r - 1}")
    return build_graded_mesh(mesh.polygon, mesh.partition, mesh.spec.doubled(j))


def uniform_spec(polygon: Polygon, n: int | Sequence[int], q: float | Sequence[float]) -> GradedMeshSpec:
    r = polygon.r
    n = [int(n)] * r if np.isscalar(n) else list(n)
    q = [float(q)] * r if np.isscalar(q) else list(q)
    return GradedMeshSpec(tuple(n), tuple(q))
