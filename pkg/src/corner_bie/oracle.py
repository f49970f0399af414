"""Brute-force double-layer integrals by adaptive quadrature.

Independent of the assembly path: no refined grid, no product integration.
Every edge is split at its midpoint and each half is integrated in the
distance from its own vertex, so integrands that concentrate at a corner stay
resolvable to full relative precision.
"""

from __future__ import annotations

import numpy as np

from .geometry import BoundaryPoints, Polygon
from .quadrature import adaptive_integrate_batch

ORACLE_TOL = 1e-12
_CHUNK = 128


def _halves(polygon: Polygon):
    """``(anchor, side, length)`` for the 2r edge halves."""
    r = polygon.r
    out = []
    for e in range(r):
        half = 0.5 * polygon.edge_lengths[e]
        out.append((e, 1, half))
        out.append(((e + 1) % r, -1, half))
    return out


def _presplit(length: np.ndarray, scale: np.ndarray):
    """Geometric cuts of ``[0, length]`` toward 0, finest piece below ``scale / 4``."""
    levels = np.ceil(np.log2(np.maximum(length / np.maximum(scale, 1e-300), 1.0))).astype(np.int64) + 2
    levels = np.minimum(levels, 200)
    owner = np.repeat(np.arange(len(length)), levels + 1)
    k = np.concatenate([np.arange(m + 1) for m in levels])
    top = np.repeat(length, levels + 1)
    last = np.repeat(levels, levels + 1)
    hi = top * 0.5 ** k
    lo = np.where(k == last, 0.0, hi * 0.5)
    return owner, lo, hi


def _density_scale(polygon: Polygon, density) -> float:
    """``max |u|`` over a fixed sample; sets the rounding floor of the integrands."""
    probe = np.linspace(0.0, 1.0, 65)[1:-1]
    r = polygon.r
    anchor = np.repeat(np.arange(r), len(probe))
    rho = np.tile(probe, r) * np.repeat(polygon.edge_lengths, len(probe))
    vals = np.asarray(density(BoundaryPoints(polygon, anchor, np.ones(len(rho), dtype=np.int64), rho)), dtype=float)
    return max(float(np.max(np.abs(vals))), np.finfo(float).tiny)


def double_layer(
    polygon: Polygon, density, targets, tol: float = ORACLE_TOL, order: int = 10, density_scale: float = np.inf
) -> np.ndarray:
    """``(T u)(x)`` for boundary targets (``BoundaryPoints``) or plane points.

    ``density`` is called with ``BoundaryPoints``.  Tolerance applies to each
    edge half separately, down to the rounding floor set by ``max |u|``.  Each half starts from a geometric split toward its
    vertex down to the target's distance from that vertex (and to
    ``density_scale``) so narrow corner peaks cannot slip between samples.
    """
    if isinstance(targets, BoundaryPoints) and len(targets) > _CHUNK:
        parts = [
            double_layer(polygon, density, targets.take(np.arange(k, min(k + _CHUNK, len(targets)))), tol, order, density_scale)
            for k in range(0, len(targets), _CHUNK)
        ]
        return np.concatenate(parts)
    on_boundary = isinstance(targets, BoundaryPoints)
    if on_boundary:
        t_anchor, t_off, t_edge = targets.anchor, targets.offset, targets.edge
        nt = len(targets)
    else:
        xy = np.atleast_2d(np.asarray(targets, dtype=float))
        nt = len(xy)
        t_anchor = np.full(nt, -1)
        t_off = xy
        t_edge = np.full(nt, -1)
    halves = _halves(polygon)
    h_anchor = np.array([h[0] for h in halves])
    h_side = np.array([h[1] for h in halves])
    h_len = np.array([h[2] for h in halves])
    h_edge = np.where(h_side > 0, h_anchor, (h_anchor - 1) % polygon.r)

    ti, hi = np.meshgrid(np.arange(nt), np.arange(len(halves)), indexing="ij")
    ti, hi = ti.ravel(), hi.ravel()
    keep = t_edge[ti] != h_edge[hi]
    ti, hi = ti[keep], hi[keep]
    verts = polygon.vertices
    u_scale = _density_scale(polygon, density)

    def integrand(idx, rho):
        t = ti[idx]
        h = hi[idx]
        pts = BoundaryPoints(polygon, h_anchor[h], h_side[h], rho)
        same = t_anchor[t] == h_anchor[h]
        base = np.where(
            same[:, None],
            0.0,
            verts[h_anchor[h]] - np.where((t_anchor[t] >= 0)[:, None], verts[np.maximum(t_anchor[t], 0)], 0.0),
        )
        d = base + pts.offset - t_off[t]
        n = pts.normals
        k = (n[:, 0] * d[:, 0] + n[:, 1] * d[:, 1]) / (d[:, 0] ** 2 + d[:, 1] ** 2) / np.pi
        return k * density(pts), np.abs(k) * u_scale

    base_t = np.where((t_anchor[ti] >= 0)[:, None], verts[np.maximum(t_anchor[ti], 0)], 0.0)
    rel = np.where((t_anchor[ti] == h_anchor[hi])[:, None], -t_off[ti], verts[h_anchor[hi]] - base_t - t_off[ti])
    scale = np.minimum(np.hypot(rel[:, 0], rel[:, 1]), density_scale)
    owner, lo, up = _presplit(h_len[hi], scale)
    vals = adaptive_integrate_batch(integrand, lo, up, tol=tol, order=order, owner=owner, n_out=len(ti), with_noise=True)
    out = np.zeros(nt)
    np.add.at(out, ti, vals)
    return out
