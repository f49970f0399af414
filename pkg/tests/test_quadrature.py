import math

import numpy as np
import pytest

from corner_bie import (
    MaxDepthExceeded,
    NonFiniteIntegrand,
    UnsupportedOrder,
    adaptive_integrate,
    build_polygon,
    composite_integrate,
    gauss_rule,
    kernel_eval,
    panel_angle_integral,
)
from corner_bie.mesh import graded_nodes
from corner_bie.quadrature import adaptive_integrate_batch


def test_low_order_rules():
    r1 = gauss_rule(1)
    assert r1.nodes[0] == pytest.approx(0.5) and r1.weights[0] == pytest.approx(1.0)
    r2 = gauss_rule(2)
    np.testing.assert_allclose(r2.nodes, [0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r2.weights, [0.5, 0.5], atol=1e-15)


@pytest.mark.parametrize("g", [1, 2, 5, 10, 20, 40, 64])
def test_rule_invariants(g):
    r = gauss_rule(g)
    assert abs(r.weights.sum() - 1) <= 1e-14
    assert np.all(np.diff(r.nodes) > 0) and np.all(r.weights > 0)
    assert 0 < r.nodes[0] and r.nodes[-1] < 1
    k = 2 * g - 1
    assert np.dot(r.weights, r.nodes**k) == pytest.approx(1 / (k + 1), rel=1e-14)


@pytest.mark.parametrize("g", [0, 65])
def test_rule_order_range(g):
    with pytest.raises(UnsupportedOrder):
        gauss_rule(g)


def test_composite_constants_and_polynomials():
    sq = build_polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    edges = [(sq.corner_arclengths[j], sq.corner_arclengths[j] + sq.edge_lengths[j]) for j in range(4)]
    assert composite_integrate(lambda t: np.full_like(t, 2.5), edges, gauss_rule(3)) == pytest.approx(10.0, abs=1e-13)
    cuts = np.array([0, 0.1, 0.35, 0.36, 0.8, 1.0])
    panels = list(zip(cuts[:-1], cuts[1:]))
    assert composite_integrate(lambda t: t**2, panels, gauss_rule(2)) == pytest.approx(1 / 3, abs=1e-14)


def test_composite_piecewise_polynomials():
    cuts = np.array([0, 0.3, 0.7, 1.0])
    panels = list(zip(cuts[:-1], cuts[1:]))

    def f(t):
        return np.where(t < 0.3, t**5, np.where(t < 0.7, 1 - t**3, 2.0))

    exact = 0.3**6 / 6 + (0.4 - (0.7**4 - 0.3**4) / 4) + 0.6
    assert composite_integrate(f, panels, gauss_rule(3)) == pytest.approx(exact, abs=1e-13)


def test_composite_on_graded_mesh():
    nodes = graded_nodes(32, 7.0, 1.0)
    cuts = np.concatenate([-nodes[::-1], nodes[1:]])
    panels = list(zip(cuts[:-1], cuts[1:]))
    val = composite_integrate(lambda t: np.abs(t) ** 0.6, panels, gauss_rule(10))
    ref = 2 * adaptive_integrate(lambda t: t**0.6, (0, 1), tol=1e-13).value
    assert val == pytest.approx(ref, abs=1e-8)
    assert ref == pytest.approx(2 / 1.6, abs=1e-12)


def test_composite_reports_bad_node():
    with pytest.raises(NonFiniteIntegrand) as err, np.errstate(divide="ignore"):
        composite_integrate(lambda t: 1 / (t - t[3]), [(0, 1)], gauss_rule(5))
    assert err.value.node == pytest.approx(gauss_rule(5).nodes[3])


def test_adaptive_examples():
    res = adaptive_integrate(lambda t: t**2, (0, 1), tol=1e-12)
    assert res.value == pytest.approx(1 / 3, abs=1e-12)
    assert res.error_estimate <= 1e-12
    res = adaptive_integrate(lambda t: t**-0.5, (0, 1), tol=1e-10)
    assert res.value == pytest.approx(2.0, abs=1e-9)
    assert res.subdivisions > 0


def test_adaptive_scalar_mode():
    res = adaptive_integrate(math.sin, (0, math.pi), tol=1e-12, vectorized=False)
    assert res.value == pytest.approx(2.0, abs=1e-12)


def test_adaptive_kernel_matches_angle():
    sq = build_polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    s = 4 - 1e-2  # on the left edge, 1e-2 above the corner at the origin
    f = np.vectorize(lambda t: kernel_eval(sq, s, t))
    val = adaptive_integrate(f, (1e-300, 1.0), tol=1e-12).value
    ref = panel_angle_integral((0, 1e-2), ((0, 0), (1, 0)))
    assert val == pytest.approx(ref, abs=1e-11)


def test_adaptive_max_depth():
    with pytest.raises(MaxDepthExceeded):
        adaptive_integrate(lambda t: 1 / t, (0, 1), tol=1e-12)


def test_adaptive_non_finite():
    with pytest.raises(NonFiniteIntegrand):
        adaptive_integrate(lambda t: np.where(t > 0.5, np.nan, t), (0, 1))


def test_adaptive_is_deterministic():
    f = lambda t: np.exp(-200 * (t - 0.3) ** 2) + np.sqrt(t)  # noqa: E731
    a = adaptive_integrate(f, (0, 1), tol=1e-13)
    b = adaptive_integrate(f, (0, 1), tol=1e-13)
    assert a.value == b.value and a.subdivisions == b.subdivisions


def test_batch_matches_scalar():
    lo = np.array([0.0, 0.0, 1.0])
    hi = np.array([1.0, 2.0, 3.0])
    powers = np.array([0.5, 2.0, -0.3])

    def f(idx, t):
        return t ** powers[idx]

    out = adaptive_integrate_batch(f, lo, hi, tol=1e-12)
    exact = (hi ** (powers + 1) - lo ** (powers + 1)) / (powers + 1)
    np.testing.assert_allclose(out, exact, rtol=0, atol=1e-11)


def test_batch_owners_sum():
    out = adaptive_integrate_batch(
        lambda idx, t: np.cos(t), np.array([0.0, 1.0, 0.0]), np.array([1.0, 2.0, 0.5]), owner=np.array([0, 0, 1]), n_out=2
    )
    np.testing.assert_allclose(out, [math.sin(2.0), math.sin(0.5)], atol=1e-13)
