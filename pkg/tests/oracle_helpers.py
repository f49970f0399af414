"""Brute-force references for assembled operator entries.

Both integrals of every entry go through adaptive quadrature; the only shared
ingredient with the assembly path is the pointwise kernel.
"""

import numpy as np

from corner_bie import oracle
from corner_bie.geometry import BoundaryPoints
from corner_bie.kernel import angle_matrix, kernel_points
from corner_bie.quadrature import adaptive_integrate, adaptive_integrate_batch


def panel_points(mesh, j, rho):
    rho = np.asarray(rho, dtype=float)
    return BoundaryPoints(mesh.polygon, np.full(len(rho), mesh.corner[j]), np.full(len(rho), mesh.side[j]), rho)


def inner_panel(mesh, targets, j, tol):
    """int over panel j of k(target, t) dt, adaptively, for each target."""
    nt = len(targets)

    def f(idx, rho):
        return kernel_points(targets.take(idx), panel_points(mesh, j, rho))

    return adaptive_integrate_batch(f, np.full(nt, mesh.rho_near[j]), np.full(nt, mesh.rho_far[j]), tol=tol)


def A_entry(mesh, i, j, tol=1e-12):
    def outer(rho):
        return inner_panel(mesh, panel_points(mesh, i, rho), j, tol)

    res = adaptive_integrate(outer, (mesh.rho_near[i], mesh.rho_far[i]), tol=tol * mesh.width[i])
    return res.value / mesh.width[i]


def C_entry(mesh, i, j, tol=1e-10):
    """Panel average over i of T(T chi_j); T chi_j by angles, the outer T adaptively."""
    sj = mesh.start_points().take(np.array([j]))
    ej = mesh.end_points().take(np.array([j]))

    def g(pts):
        return angle_matrix(mesh.polygon, pts, sj, ej)[:, 0]

    def outer(rho):
        return oracle.double_layer(mesh.polygon, g, panel_points(mesh, i, rho), tol=tol)

    res = adaptive_integrate(outer, (mesh.rho_near[i], mesh.rho_far[i]), tol=tol * mesh.width[i])
    return res.value / mesh.width[i]
