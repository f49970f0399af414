import numpy as np
import pytest

from corner_bie import BoundaryPoints, make_manufactured
from corner_bie.harness import SmoothProfile
from corner_bie.oracle import double_layer
from corner_bie.operators import ConstantFunction


def edge_points(poly, m=41):
    t = np.linspace(0.02, 0.98, m)
    r = poly.r
    anchor = np.repeat(np.arange(r), m)
    rho = np.tile(t, r) * np.repeat(poly.edge_lengths, m)
    return BoundaryPoints(poly, anchor, np.ones(len(rho), dtype=np.int64), rho)


@pytest.mark.parametrize("name", ["square", "triangle", "lshape"])
def test_unit_density_gives_one_on_edges(name, request):
    poly = request.getfixturevalue(name)
    vals = double_layer(poly, ConstantFunction(1.0), edge_points(poly))
    np.testing.assert_allclose(vals, 1.0, atol=1e-11)


def test_unit_density_in_the_plane(lshape):
    vals = double_layer(lshape, ConstantFunction(1.0), np.array([[0.5, 0.5], [-0.5, -0.5], [0.5, -0.5], [3.0, 0.0]]))
    np.testing.assert_allclose(vals, [2.0, 2.0, 0.0, 0.0], atol=1e-11)


def test_unit_density_near_a_corner(square):
    pts = BoundaryPoints(square, np.array([1, 1, 2]), np.array([1, -1, 1]), np.array([1e-6, 1e-9, 1e-7]))
    np.testing.assert_allclose(double_layer(square, ConstantFunction(1.0), pts), 1.0, atol=1e-11)


def test_tolerance_consistency(square):
    u = SmoothProfile(square)
    pts = edge_points(square, 13)
    loose = double_layer(square, u, pts, tol=1e-10)
    tight = double_layer(square, u, pts, tol=1e-12)
    np.testing.assert_allclose(loose, tight, atol=1e-9)


def test_manufactured_f_is_u_plus_Tu(square):
    prob = make_manufactured(square, "smooth")
    pts = edge_points(square, 7)
    want = prob.u_exact(pts) + double_layer(square, prob.u_exact, pts)
    np.testing.assert_allclose(prob.f(pts), want, atol=1e-12)
