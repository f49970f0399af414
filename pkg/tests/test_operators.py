import numpy as np
import pytest

from corner_bie import (
    BoundaryPoints,
    CompositeDensity,
    EvaluationAtBreakpoint,
    PiecewiseConstant,
    PointNotInterior,
    SingularSystem,
    apply_T,
    assemble_A,
    assemble_C,
    build_graded_mesh,
    default_partition,
    evaluate_density,
    interior_potential,
    iterate,
    project,
    solve_galerkin,
    solve_modified,
)
from corner_bie.mesh import uniform_spec
from corner_bie.operators import Assembly, build_quad_grid
from oracle_helpers import A_entry, C_entry


def mesh_of(poly, n, q):
    return build_graded_mesh(poly, default_partition(poly), uniform_spec(poly, n, q))


@pytest.fixture(scope="module")
def sq8(square):
    return mesh_of(square, 8, 7)


def test_project_constants_and_idempotence(square):
    m = mesh_of(square, 4, 3)
    np.testing.assert_allclose(project(m, 3.0).coeffs, 3.0, rtol=1e-15)
    steps = np.arange(m.n_panels, dtype=float)
    grid = build_quad_grid(m)
    again = grid.average(steps[grid.node_parent])
    np.testing.assert_allclose(again, steps, rtol=1e-14, atol=1e-14)


def test_projection_is_a_sup_norm_contraction(square, rng):
    m = mesh_of(square, 4, 3)
    L = square.perimeter
    for _ in range(100):
        c = rng.normal(size=4)
        k = rng.integers(1, 6, size=4)

        def f(s):
            return sum(ci * np.cos(2 * np.pi * ki * s / L + ci) for ci, ki in zip(c, k))

        s = np.linspace(0, L, 4001)
        assert project(m, f).sup_norm <= np.max(np.abs(f(s))) + 1e-12


@pytest.mark.parametrize("n, q", [(4, 1), (8, 7), (32, 7)])
def test_row_sums(square, n, q):
    m = mesh_of(square, n, q)
    asm = Assembly(m)
    np.testing.assert_allclose(asm.A.sum(axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(asm.C.sum(axis=1), 1.0, atol=1e-8)


def test_same_edge_entries_vanish(sq8):
    A = assemble_A(sq8).A
    edge = sq8.edge
    assert np.all(A[edge[:, None] == edge[None, :]] == 0.0)


def test_entries_against_oracle(square, rng):
    m = mesh_of(square, 4, 1)
    A = assemble_A(m).A
    C = assemble_C(m).C
    N = m.n_panels
    for i, j in rng.integers(0, N, size=(6, 2)):
        assert A[i, j] == pytest.approx(A_entry(m, i, j), abs=1e-8)
    for i, j in rng.integers(0, N, size=(3, 2)):
        assert C[i, j] == pytest.approx(C_entry(m, i, j), abs=1e-6)


def test_graded_corner_entries_against_oracle(sq8):
    A = assemble_A(sq8).A
    C = assemble_C(sq8).C
    # panels touching corner 1 from both sides, down to widths of 1e-7
    rm, rp = sq8.panel_range(1, -1), sq8.panel_range(1, 1)
    for i, j in [(rm.stop - 1, rp.start), (rp.start, rm.stop - 1), (rm.stop - 2, rp.start + 1), (rp.start, 3)]:
        assert A[i, j] == pytest.approx(A_entry(sq8, i, j), abs=1e-10)
        assert C[i, j] == pytest.approx(C_entry(sq8, i, j), abs=1e-9)


def test_C_is_not_A_squared(square):
    m = mesh_of(square, 2, 1)
    asm = Assembly(m)
    assert np.max(np.abs(asm.C - asm.A @ asm.A)) > 1e-3


def test_contraction_surrogate(square, rng):
    m = mesh_of(square, 8, 7)
    A = assemble_A(m).A
    for _ in range(100):
        v = rng.uniform(-1, 1, size=m.n_panels)
        v /= np.max(np.abs(v))
        assert np.max(np.abs(A @ v)) <= 1 + 1e-8
    pmax = np.max(np.abs(square.corner_params))
    for j in range(square.r):
        rm, rp = m.panel_range(j, -1), m.panel_range(j, 1)
        block = A[rm, rp]
        assert np.max(np.abs(block).sum(axis=1)) <= pmax + 0.05
        block = A[rp, rm]
        assert np.max(np.abs(block).sum(axis=1)) <= pmax + 0.05


def _two(pts):
    return np.full(len(pts), 2.0)


@pytest.mark.parametrize("name", ["square", "lshape"])
def test_constant_density_exactness(name, request):
    poly = request.getfixturevalue(name)
    m = mesh_of(poly, 4, 1 if name == "square" else 3)
    A = assemble_A(m)
    g = solve_galerkin(A, project(m, 2.0))
    np.testing.assert_allclose(g.coeffs, 1.0, atol=1e-10)
    d = solve_modified(A, assemble_C(m), m, 2.0)
    np.testing.assert_allclose(d.y.coeffs, 1.0, atol=1e-9)
    np.testing.assert_allclose(d.z_nodes, 0.0, atol=1e-9)
    s = np.linspace(0.0107, poly.perimeter - 0.0107, 52)
    np.testing.assert_allclose(evaluate_density(d, s), 1.0, atol=1e-9)
    np.testing.assert_allclose(iterate(g, 2.0, s), 1.0, atol=1e-9)
    np.testing.assert_allclose(iterate(d, 2.0, s), 1.0, atol=1e-9)


def test_zero_data(square):
    m = mesh_of(square, 4, 2)
    g = solve_galerkin(assemble_A(m), project(m, 0.0))
    assert np.all(g.coeffs == 0.0)
    assert interior_potential(g, (0.5, 0.5))[0] == 0.0


def test_piecewise_constant_data_reduces(square):
    m = mesh_of(square, 4, 2)
    asm = Assembly(m)
    c = np.linspace(-1, 1, m.n_panels)
    f_nodes = c[asm.grid.node_parent]
    _, ptf = asm.C_and_PTf(f_nodes)
    np.testing.assert_allclose(ptf, asm.A @ c, atol=1e-12)


def test_z_has_zero_panel_averages(sq8):
    L = sq8.polygon.perimeter
    d = solve_modified(assemble_A(sq8), None, sq8, lambda s: np.cos(2 * np.pi * s / L) + s / L)
    grid = d.assembly.grid
    assert np.max(np.abs(grid.average(d.z_nodes))) <= 1e-12
    # the lazy formula and the cached node values agree
    np.testing.assert_allclose(d.z(grid.nodes), d.z_nodes, atol=1e-14)


def test_block_equation_residual(sq8):
    """u + PTu + TPu - PTPu = f for the composite solution (checked panelwise and pointwise)."""
    L = sq8.polygon.perimeter

    def f(s):
        return np.exp(np.sin(2 * np.pi * s / L))

    asm = Assembly(sq8)
    from corner_bie import GalerkinMatrix

    d = solve_modified(GalerkinMatrix(asm.A, asm), None, sq8, f)
    grid = asm.grid
    ptz = grid.average(asm.apply_layer(grid.nodes, d.z_nodes))
    y = d.y.coeffs
    # first block equation, y + PTy + PTz = Pf
    np.testing.assert_allclose(y + asm.A @ y + ptz, d.pf.coeffs, atol=1e-12)
    # full residual at 5 points per panel
    t = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    rho = sq8.rho_near[:, None] + t[None, :] * sq8.width[:, None]
    pts = BoundaryPoints(sq8.polygon, np.repeat(sq8.corner, 5), np.repeat(sq8.side, 5), rho.ravel())
    panels = np.repeat(np.arange(sq8.n_panels), 5)
    u = evaluate_density(d, pts)
    PTu = (asm.A @ y + ptz)[panels]
    TPu = asm.pc_matrix(pts) @ y
    PTPu = (asm.A @ y)[panels]
    res = u + PTu + TPu - PTPu - f(pts.s)
    assert np.max(np.abs(res)) <= 1e-7 * np.max(np.abs(f(pts.s)))


def test_evaluate_density(sq8):
    c = np.arange(sq8.n_panels, dtype=float)
    pc = PiecewiseConstant(sq8, c)
    mids = (sq8.t_lo + 0.5 * sq8.width) % sq8.polygon.perimeter
    np.testing.assert_array_equal(evaluate_density(pc, mids), c)
    with pytest.raises(EvaluationAtBreakpoint):
        evaluate_density(pc, 0.5, strict=True)
    with pytest.raises(EvaluationAtBreakpoint):
        # first graded breakpoint past corner 1
        evaluate_density(pc, 1.0 + 0.5 * (1 / 8) ** 7, strict=True)


def test_interior_potential(square):
    m = mesh_of(square, 4, 2)
    ones = PiecewiseConstant(m, np.ones(m.n_panels))
    assert interior_potential(ones, (0.25, 0.75))[0] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(PointNotInterior):
        interior_potential(ones, (1.5, 0.5))
    with pytest.raises(PointNotInterior):
        interior_potential(ones, (0.5, 0.0))


def test_apply_T_composite_matches_pieces(sq8):
    L = sq8.polygon.perimeter
    d = solve_modified(assemble_A(sq8), None, sq8, lambda s: np.cos(2 * np.pi * s / L))
    assert isinstance(d, CompositeDensity)
    x = np.array([[0.3, 0.4], [0.9, 0.9]])
    asm = d.assembly
    want = asm.pc_matrix(x) @ d.y.coeffs + asm.apply_layer(x, d.z_nodes)
    np.testing.assert_allclose(apply_T(d, x), want)


def test_singular_system(square):
    m = mesh_of(square, 1, 1)
    A = -np.eye(m.n_panels)
    with pytest.raises(SingularSystem):
        solve_galerkin(A, project(m, 1.0))
