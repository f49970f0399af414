"""The double-layer kernel and its exact integrals over straight panels.

With a counterclockwise boundary and outward normals,

    k(s, t) = n(t) . (x(t) - x(s)) / (pi |x(t) - x(s)|^2),

which near corner ``j`` reduces to
``sin(p_j pi) / pi * a / (a^2 + b^2 + 2 a b cos(p_j pi))``.  Integrated over a
straight panel against a unit density it is the subtended angle over ``pi``.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .errors import CoincidentPoints, CornerSource, InvalidCornerParam, ObservationOnPanel
from .geometry import BoundaryPoints, Polygon, point_at, reduce_arclength


def kernel_eval(polygon: Polygon, s: float, t: float) -> float:
    """``k(s, t)`` for two arclengths; exactly zero on a common edge."""
    L = polygon.perimeter
    s_r = float(reduce_arclength(polygon, s))
    t_r = float(reduce_arclength(polygon, t))
    gap = abs(s_r - t_r)
    if min(gap, L - gap) <= 1e-14 * L:
        raise CoincidentPoints(f"source and target coincide at s = {s_r}")
    if np.any(polygon.corner_arclengths == t_r):
        raise CornerSource(f"t = {t_r} is a corner; the normal is undefined there")
    x = BoundaryPoints.from_arclength(polygon, [s_r])
    y = BoundaryPoints.from_arclength(polygon, [t_r])
    return float(kernel_points(x, y)[0])


def kernel_points(x: BoundaryPoints, y: BoundaryPoints) -> np.ndarray:
    """Elementwise ``k(x_k, y_k)`` with corner-relative differences."""
    poly = x.polygon
    d = np.where(
        (x.anchor == y.anchor)[:, None],
        y.offset - x.offset,
        (poly.vertices[y.anchor] - poly.vertices[x.anchor]) + (y.offset - x.offset),
    )
    n = y.normals
    with np.errstate(invalid="ignore", divide="ignore"):  # coincident same-edge pairs are masked
        val = (n[:, 0] * d[:, 0] + n[:, 1] * d[:, 1]) / (d[:, 0] ** 2 + d[:, 1] ** 2) / math.pi
    return np.where(x.edge == y.edge, 0.0, val)


def kernel_free(x: np.ndarray, y: BoundaryPoints) -> np.ndarray:
    """``k(x, y)`` for plane points ``x`` (not on the boundary)."""
    d = y.xy - np.asarray(x, dtype=float)
    n = y.normals
    return (n[..., 0] * d[..., 0] + n[..., 1] * d[..., 1]) / (d[..., 0] ** 2 + d[..., 1] ** 2) / math.pi


def corner_kernel(p: float, a: float, b: float) -> float:
    """Closed form of the kernel across corner ``j`` (``a``, ``b`` distances to it)."""
    if not abs(p) < 1.0:
        raise InvalidCornerParam(f"corner parameter must satisfy |p| < 1, got {p}")
    c = math.cos(p * math.pi)
    return math.sin(p * math.pi) / math.pi * a / (a * a + b * b + 2.0 * a * b * c)


def subtended_angle(x_obs, start, end) -> float:
    """Signed angle from ``start - x_obs`` to ``end - x_obs``."""
    v1 = np.asarray(start, dtype=float) - np.asarray(x_obs, dtype=float)
    v2 = np.asarray(end, dtype=float) - np.asarray(x_obs, dtype=float)
    return math.atan2(v1[0] * v2[1] - v1[1] * v2[0], v1[0] * v2[0] + v1[1] * v2[1])


def panel_angle_integral(x_obs, panel) -> float:
    """``int_panel k(x_obs, t) dt`` for a straight panel, i.e. subtended angle / pi.

    ``panel`` may be a mesh ``Panel`` or a pair of plane endpoints in boundary
    orientation.
    """
    start, end = panel.endpoints_plane if hasattr(panel, "endpoints_plane") else panel
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    x = np.asarray(x_obs, dtype=float)
    v1, v2 = start - x, end - x
    cross = v1[0] * v2[1] - v1[1] * v2[0]
    dot = v1[0] * v2[0] + v1[1] * v2[1]
    if cross == 0.0 and dot <= 0.0:
        raise ObservationOnPanel(f"observation point {x.tolist()} lies on the panel")
    return math.atan2(cross, dot) / math.pi


def _bases(polygon: Polygon) -> np.ndarray:
    return np.vstack([polygon.vertices, np.zeros((1, 2))])


def targets_from(polygon: Polygon, x_obs):
    """Kernel-ready target arrays from boundary points, arclengths, or plane points.

    Returns ``(anchor, offset, edge)``; free plane points use anchor ``r`` and
    edge ``-1``.
    """
    if isinstance(x_obs, BoundaryPoints):
        return x_obs.anchor, x_obs.offset, x_obs.edge
    arr = np.asarray(x_obs, dtype=float)
    if arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] != 2):
        pts = BoundaryPoints.from_arclength(polygon, np.atleast_1d(arr))
        return pts.anchor, pts.offset, pts.edge
    xy = np.atleast_2d(arr)
    n = len(xy)
    return np.full(n, polygon.r, dtype=np.int64), xy.copy(), np.full(n, -1, dtype=np.int64)


def angle_matrix(polygon: Polygon, targets, starts: BoundaryPoints, ends: BoundaryPoints) -> np.ndarray:
    """``[i, j] = int_{panel j} k(target_i, t) dt`` for straight panels given by their ends.

    Starts and ends must share anchors (as mesh panels and sub-panels do).
    """
    ta, to, te = targets_from(polygon, targets)
    return _kernels.angle_matrix(
        _bases(polygon),
        np.ascontiguousarray(ta, dtype=np.int64),
        np.ascontiguousarray(to, dtype=float),
        np.ascontiguousarray(te, dtype=np.int64),
        np.ascontiguousarray(starts.anchor, dtype=np.int64),
        np.ascontiguousarray(starts.offset),
        np.ascontiguousarray(ends.offset),
        np.ascontiguousarray(starts.edge, dtype=np.int64),
    )


def apply_T_pc(mesh, coeffs, x_obs) -> np.ndarray | float:
    """Double layer of a piecewise-constant density, exact up to rounding.

    ``x_obs`` is an arclength, an array of arclengths, a plane point, an
    ``(m, 2)`` array of plane points, or ``BoundaryPoints``.
    """
    c = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=float)
    M = angle_matrix(mesh.polygon, x_obs, mesh.start_points(), mesh.end_points())
    out = M @ c
    scalar = np.ndim(x_obs) == 0 or (np.ndim(x_obs) == 1 and np.shape(x_obs)[0] == 2 and not isinstance(x_obs, BoundaryPoints))
    return float(out[0]) if scalar else out
