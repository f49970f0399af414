"""Hot loops: subtended-angle matrices and double-layer quadrature weights.

Two implementations with identical signatures live here, a numba one (loops)
and a numpy one (broadcasting).  ``CORNER_BIE_BACKEND=numpy`` forces the
latter; otherwise numba is used when it imports.

Point convention shared by every kernel: a point is ``bases[anchor] + off``
where ``bases`` holds the polygon vertices plus a final all-zero row for free
(interior) points.  Differences are formed as ``(base_a - base_b) + (off_a -
off_b)`` so two points near the same corner keep full relative precision.

The double layer uses ``k ds = Im(dz / (z - x)) / pi`` on a straight panel
``z = zc + hw * xi``, ``xi`` in ``[-1, 1]``.  Near the panel the polynomial
moments ``p_k = int xi^k / (xi - xi_x) dxi`` follow the forward recursion
``p_{k+1} = xi_x p_k + (1 - (-1)^(k+1)) / (k+1)`` from
``p_0 = log((1 - xi_x) / (-1 - xi_x))``; solving with the transposed
Vandermonde matrix of the Gauss nodes turns them into node weights.
"""

from __future__ import annotations

import math
import os

import numpy as np

_requested = os.environ.get("CORNER_BIE_BACKEND", "numba").strip().lower()

try:
    if _requested == "numpy":
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

INV_PI = 1.0 / math.pi


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def angle_matrix_numpy(bases, t_anchor, t_off, t_edge, p_anchor, p_start, p_end, p_edge):
    shift = bases[p_anchor][None, :, :] - bases[t_anchor][:, None, :] - t_off[:, None, :]
    v1 = shift + p_start[None, :, :]
    v2 = shift + p_end[None, :, :]
    cross = v1[..., 0] * v2[..., 1] - v1[..., 1] * v2[..., 0]
    dot = v1[..., 0] * v2[..., 0] + v1[..., 1] * v2[..., 1]
    out = np.arctan2(cross, dot) * INV_PI
    out[t_edge[:, None] == p_edge[None, :]] = 0.0
    return out


def layer_matrix_numpy(
    bases, t_anchor, t_off, t_edge, p_anchor, p_start, p_end, p_edge, p_normal, xi_nodes, weights01, vt_inv, radius
):
    nt, npan, g = len(t_anchor), len(p_anchor), len(xi_nodes)
    delta = p_end - p_start
    width = np.hypot(delta[:, 0], delta[:, 1])
    t01 = 0.5 * (xi_nodes + 1.0)
    node_off = p_start[:, None, :] + t01[None, :, None] * delta[:, None, :]  # (P, g, 2)
    shift = bases[p_anchor][None, :, :] - bases[t_anchor][:, None, :] - t_off[:, None, :]  # (T, P, 2)

    d = shift[:, :, None, :] + node_off[None, :, :, :]  # (T, P, g, 2)
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    ndot = d[..., 0] * p_normal[None, :, None, 0] + d[..., 1] * p_normal[None, :, None, 1]
    with np.errstate(invalid="ignore", divide="ignore"):  # same-edge pairs, zeroed below
        out = ndot / r2 * INV_PI * (width[:, None] * weights01[None, :])[None, :, :]

    zc = shift + 0.5 * (p_start + p_end)[None, :, :]
    hw = 0.5 * (delta[:, 0] + 1j * delta[:, 1])
    xi = -(zc[..., 0] + 1j * zc[..., 1]) / hw[None, :]
    near = np.abs(xi) < radius
    same = t_edge[:, None] == p_edge[None, :]
    near &= ~same
    ti, pi_ = np.nonzero(near)
    if len(ti):
        x = xi[ti, pi_]
        p = np.empty((len(x), g), dtype=complex)
        p[:, 0] = np.log((1.0 - x) / (-1.0 - x))
        for k in range(g - 1):
            p[:, k + 1] = x * p[:, k] + (1.0 - (-1.0) ** (k + 1)) / (k + 1)
        q = p.imag * INV_PI
        out[ti, pi_, :] = q @ vt_inv.T
    out[same] = 0.0
    return out.reshape(nt, npan * g)


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def angle_matrix_numba(bases, t_anchor, t_off, t_edge, p_anchor, p_start, p_end, p_edge):
        nt = t_anchor.shape[0]
        npan = p_anchor.shape[0]
        out = np.zeros((nt, npan))
        for i in range(nt):
            ta = t_anchor[i]
            for j in range(npan):
                if t_edge[i] == p_edge[j]:
                    continue
                if p_anchor[j] == ta:
                    sx = -t_off[i, 0]
                    sy = -t_off[i, 1]
                else:
                    sx = (bases[p_anchor[j], 0] - bases[ta, 0]) - t_off[i, 0]
                    sy = (bases[p_anchor[j], 1] - bases[ta, 1]) - t_off[i, 1]
                v1x = sx + p_start[j, 0]
                v1y = sy + p_start[j, 1]
                v2x = sx + p_end[j, 0]
                v2y = sy + p_end[j, 1]
                out[i, j] = math.atan2(v1x * v2y - v1y * v2x, v1x * v2x + v1y * v2y) * INV_PI
        return out

    @numba.njit(cache=True, nogil=True)
    def layer_matrix_numba(
        bases, t_anchor, t_off, t_edge, p_anchor, p_start, p_end, p_edge, p_normal, xi_nodes, weights01, vt_inv, radius
    ):
        nt = t_anchor.shape[0]
        npan = p_anchor.shape[0]
        g = xi_nodes.shape[0]
        out = np.zeros((nt, npan * g))
        p = np.empty(g, dtype=np.complex128)
        q = np.empty(g)
        for i in range(nt):
            ta = t_anchor[i]
            for j in range(npan):
                if t_edge[i] == p_edge[j]:
                    continue
                if p_anchor[j] == ta:
                    sx = -t_off[i, 0]
                    sy = -t_off[i, 1]
                else:
                    sx = (bases[p_anchor[j], 0] - bases[ta, 0]) - t_off[i, 0]
                    sy = (bases[p_anchor[j], 1] - bases[ta, 1]) - t_off[i, 1]
                dx = p_end[j, 0] - p_start[j, 0]
                dy = p_end[j, 1] - p_start[j, 1]
                zx = sx + 0.5 * (p_start[j, 0] + p_end[j, 0])
                zy = sy + 0.5 * (p_start[j, 1] + p_end[j, 1])
                hw = complex(0.5 * dx, 0.5 * dy)
                xi = -complex(zx, zy) / hw
                base = j * g
                if abs(xi) < radius:
                    p[0] = np.log((1.0 - xi) / (-1.0 - xi))
                    for k in range(g - 1):
                        odd = 2.0 / (k + 1) if (k % 2) == 0 else 0.0
                        p[k + 1] = xi * p[k] + odd
                    for k in range(g):
                        q[k] = p[k].imag * INV_PI
                    for m in range(g):
                        acc = 0.0
                        for k in range(g):
                            acc += vt_inv[m, k] * q[k]
                        out[i, base + m] = acc
                else:
                    width = math.sqrt(dx * dx + dy * dy)
                    nx = p_normal[j, 0]
                    ny = p_normal[j, 1]
                    for m in range(g):
                        t01 = 0.5 * (xi_nodes[m] + 1.0)
                        ex = sx + p_start[j, 0] + t01 * dx
                        ey = sy + p_start[j, 1] + t01 * dy
                        out[i, base + m] = (nx * ex + ny * ey) / (ex * ex + ey * ey) * INV_PI * width * weights01[m]
        return out

    angle_matrix = angle_matrix_numba
    layer_matrix = layer_matrix_numba
else:
    angle_matrix_numba = None
    layer_matrix_numba = None
    angle_matrix = angle_matrix_numpy
    layer_matrix = layer_matrix_numpy


def vandermonde_t_inverse(xi_nodes: np.ndarray) -> np.ndarray:
    """Inverse of ``V^T`` with ``V[m, k] = xi_m ** k``."""
    V = np.vander(xi_nodes, increasing=True)
    return np.linalg.inv(V.T)
