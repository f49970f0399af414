"""Test problems, error measurement, convergence ladders and extrapolation."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import oracle
from .errors import NonPositiveError, PointPlacement
from .geometry import BoundaryPoints, PartitionSpec, Polygon, default_partition, half_lengths, winding_angle
from .mesh import GradedMesh, GradedMeshSpec, build_graded_mesh, refine_segment
from .operators import (
    Assembly,
    BoundaryFunction,
    CompositeDensity,
    GalerkinMatrix,
    PiecewiseConstant,
    evaluate_density,
    solve_galerkin,
    solve_modified,
)
from .quadrature import QuadratureRule, gauss_rule

METHODS = ("galerkin", "iterated_galerkin", "modified", "iterated_modified")
PROFILES = ("smooth", "corner_singular", "piecewise_constant")
ITERATED = ("iterated_galerkin", "iterated_modified")
GRID_POINTS = 33
GRID_GRADING = 7.0
GRID_MARGIN = 1e-6


# ---------------------------------------------------------------------------
# problems
# ---------------------------------------------------------------------------


class SmoothProfile(BoundaryFunction):
    """``cos(2 pi s / L)``."""

    def __init__(self, polygon: Polygon):
        self.L = polygon.perimeter

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:
        return np.cos(2.0 * math.pi * pts.s / self.L)


class CornerSingularProfile(BoundaryFunction):
    """Smooth profile plus ``d_j^(alpha_j* + 0.05)`` bumps at every corner.

    ``d_j`` is the arclength distance to corner ``j``; each bump is cut off by
    ``(1 - (d_j / l)^2)^5`` where ``l`` is the half-segment length on that side.
    """

    def __init__(self, polygon: Polygon, partition: PartitionSpec):
        self.polygon = polygon
        self.smooth = SmoothProfile(polygon)
        self.exponent = polygon.alpha_star + 0.05
        self.minus, self.plus = half_lengths(polygon, partition)

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:
        poly = self.polygon
        out = self.smooth(pts)
        L = poly.perimeter
        for j in range(poly.r):
            sj = poly.corner_arclengths[j]
            fwd = np.mod(pts.s - sj, L)
            bwd = np.mod(sj - pts.s, L)
            mine = pts.anchor == j
            ahead = np.where(mine, pts.side > 0, fwd <= bwd)
            d = np.where(mine, pts.rho, np.minimum(fwd, bwd))
            ell = np.where(ahead, self.plus[j], self.minus[j])
            x = np.minimum(d / ell, 1.0)
            out = out + d ** self.exponent[j] * (1.0 - x * x) ** 5
        return out


class StepProfile(BoundaryFunction):
    """Constant on each half-segment: ``1 + 0.1 k`` on half-segment ``k``.

    Aligned with every graded mesh on the same partition, so ``(I - P) u = 0``.
    """

    def __init__(self, polygon: Polygon, partition: PartitionSpec):
        self.polygon = polygon
        self.minus, self.plus = half_lengths(polygon, partition)
        self.gamma = np.asarray(partition.gamma, dtype=float)

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:
        poly = self.polygon
        r = poly.r
        own = np.where(pts.side > 0, self.plus[pts.anchor], self.minus[pts.anchor])
        inside = pts.rho < own
        # fallback by arclength: segment j covers [gamma_{j-1}, gamma_j)
        seg = np.searchsorted(self.gamma, pts.s, side="right") % r
        ahead = np.mod(pts.s - poly.corner_arclengths[seg], poly.perimeter) < self.plus[seg]
        k = np.where(inside, 2 * pts.anchor + (pts.side > 0), 2 * seg + ahead)
        return 1.0 + 0.1 * k


class _Memo(BoundaryFunction):
    """Caches values per exact point batch."""

    def __init__(self, fn: Callable[[BoundaryPoints], np.ndarray]):
        self.fn = fn
        self._cache: dict = {}

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:
        key = (pts.anchor.tobytes(), pts.side.tobytes(), pts.rho.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            hit = np.asarray(self.fn(pts), dtype=float)
            hit.setflags(write=False)
            self._cache[key] = hit
        return hit


class ManufacturedRHS(_Memo):
    """``f = u + T u`` with ``T u`` from the adaptive oracle."""

    def __init__(self, polygon: Polygon, u: BoundaryFunction, tol: float):
        self.polygon = polygon
        self.u = u
        self.tol = tol
        super().__init__(self._evaluate)

    def Tu(self, pts: BoundaryPoints) -> np.ndarray:
        return self(pts) - self.u(pts)

    def _evaluate(self, pts: BoundaryPoints) -> np.ndarray:
        return self.u(pts) + oracle.double_layer(self.polygon, self.u, pts, tol=self.tol)


class HarmonicRHS(BoundaryFunction):
    def __init__(self, g: Callable[[np.ndarray], np.ndarray]):
        self.g = g

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:
        return self.g(pts.xy)


@dataclass(eq=False)
class Problem:
    """Either a manufactured density (``u_exact`` known) or harmonic Dirichlet data."""

    polygon: Polygon
    kind: str
    f: BoundaryFunction
    u_exact: BoundaryFunction | None = None
    g: Callable[[np.ndarray], np.ndarray] | None = None
    interior_checkpoints: np.ndarray | None = None
    partition: PartitionSpec | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.partition is None:
            self.partition = default_partition(self.polygon)

    @property
    def manufactured(self) -> bool:
        return self.kind == "manufactured"


def make_manufactured(
    polygon: Polygon,
    profile: str | BoundaryFunction = "smooth",
    partition: PartitionSpec | None = None,
    tol: float = oracle.ORACLE_TOL,
) -> Problem:
    """Problem whose exact density is known; ``f`` is computed on demand by the oracle."""
    partition = partition or default_partition(polygon)
    if isinstance(profile, BoundaryFunction):
        u, label = profile, type(profile).__name__
    elif profile == "smooth":
        u, label = SmoothProfile(polygon), "smooth"
    elif profile == "corner_singular":
        u, label = CornerSingularProfile(polygon, partition), "corner_singular"
    elif profile == "piecewise_constant":
        u, label = StepProfile(polygon, partition), "piecewise_constant"
    else:
        raise ValueError(f"unknown profile {profile!r}; expected 'smooth', 'corner_singular' or 'piecewise_constant'")
    return Problem(polygon, "manufactured", ManufacturedRHS(polygon, u, tol), u_exact=u, partition=partition, label=label)


def make_harmonic(polygon: Polygon, x_ext, checkpoints, partition: PartitionSpec | None = None) -> Problem:
    """Dirichlet data ``g = ln|x - x_ext|``; the interior potential must reproduce ``g``."""
    x_ext = np.asarray(x_ext, dtype=float)
    if abs(winding_angle(polygon, x_ext)) > 1e-6:
        raise PointPlacement(f"x_ext {x_ext.tolist()} must lie strictly outside the polygon")
    cps = np.atleast_2d(np.asarray(checkpoints, dtype=float))
    for c in cps:
        if abs(winding_angle(polygon, c) - 2 * math.pi) > 1e-6:
            raise PointPlacement(f"checkpoint {c.tolist()} must lie strictly inside the polygon")

    def g(x):
        x = np.asarray(x, dtype=float)
        return np.log(np.hypot(x[..., 0] - x_ext[0], x[..., 1] - x_ext[1]))

    return Problem(
        polygon, "harmonic", HarmonicRHS(g), g=g, interior_checkpoints=cps, partition=partition, label="harmonic"
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluation_grid(polygon: Polygon, partition: PartitionSpec | None = None) -> BoundaryPoints:
    """Mesh-independent sample points, 33 per half-segment, graded toward corners.

    Distances from corner ``j`` are ``eps + (l - 2 eps) (i/34)^7`` for
    ``i = 1..33`` with ``eps = 1e-6 L``; nothing lands within ``eps`` of a
    corner or a ``gamma_j``.
    """
    partition = partition or default_partition(polygon)
    minus, plus = half_lengths(polygon, partition)
    eps = GRID_MARGIN * polygon.perimeter
    frac = (np.arange(1, GRID_POINTS + 1) / (GRID_POINTS + 1)) ** GRID_GRADING
    anchor, side, rho = [], [], []
    for j in range(polygon.r):
        for sd, ell in ((-1, minus[j]), (1, plus[j])):
            d = eps + (ell - 2 * eps) * frac
            if sd < 0:
                d = d[::-1]
            anchor.append(np.full(GRID_POINTS, j))
            side.append(np.full(GRID_POINTS, sd))
            rho.append(d)
    return BoundaryPoints(polygon, np.concatenate(anchor), np.concatenate(side), np.concatenate(rho))


@dataclass(eq=False)
class MethodRun:
    spec: GradedMeshSpec
    method: str
    density: object
    sup_error: float
    wall_time: float
    values: np.ndarray = field(repr=False)
    reference: np.ndarray = field(repr=False)
    panels: int = 0


class Solver:
    """Caches the per-mesh solves shared by all methods on one problem."""

    def __init__(self, problem: Problem, mesh: GradedMesh, rule: QuadratureRule | None = None):
        self.problem = problem
        self.mesh = mesh
        self.rule = rule or gauss_rule(10)
        self.assembly = Assembly(mesh, self.rule)
        self._galerkin: PiecewiseConstant | None = None
        self._modified: CompositeDensity | None = None

    @property
    def f_nodes(self) -> np.ndarray:
        return self.problem.f(self.assembly.grid.nodes)

    def galerkin(self) -> PiecewiseConstant:
        if self._galerkin is None:
            pf = PiecewiseConstant(self.mesh, self.assembly.grid.average(self.f_nodes))
            self._galerkin = solve_galerkin(self.assembly.A, pf)
        return self._galerkin

    def modified(self) -> CompositeDensity:
        if self._modified is None:
            asm = self.assembly
            self._modified = solve_modified(GalerkinMatrix(asm.A, asm), None, self.mesh, self.problem.f)
        return self._modified

    def density(self, method: str):
        return self.galerkin() if method in ("galerkin", "iterated_galerkin") else self.modified()

    def T(self, density, targets) -> np.ndarray:
        asm = self.assembly
        if isinstance(density, PiecewiseConstant):
            return asm.pc_matrix(targets) @ density.coeffs
        return asm.pc_matrix(targets) @ density.y.coeffs + asm.apply_layer(targets, density.z_nodes)

    def boundary_values(self, method: str, pts: BoundaryPoints) -> np.ndarray:
        d = self.density(method)
        if method in ITERATED:
            return self.problem.f(pts) - self.T(d, pts)
        return evaluate_density(d, pts)

    def interior_values(self, method: str, x: np.ndarray) -> np.ndarray:
        """Double-layer potential at plane points of the chosen density."""
        d = self.density(method)
        if method not in ITERATED:
            return self.T(d, x)
        nodes = self.assembly.grid.nodes
        iterated_nodes = self.f_nodes - self.T(d, nodes)
        return self.assembly.apply_layer(x, iterated_nodes)


def _measure(solver: Solver, method: str, grid: BoundaryPoints) -> tuple[np.ndarray, np.ndarray]:
    prob = solver.problem
    if prob.manufactured:
        return solver.boundary_values(method, grid), prob.u_exact(grid)
    x = prob.interior_checkpoints
    return solver.interior_values(method, x), prob.g(x)


def run_method(
    problem: Problem,
    mesh: GradedMesh,
    method: str,
    solver: Solver | None = None,
    grid: BoundaryPoints | None = None,
) -> MethodRun:
    """Solve with one method and record the sup error.

    Manufactured problems are measured on the evaluation grid against
    ``u_exact``; harmonic problems at the interior checkpoints against ``g``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    t0 = time.perf_counter()
    solver = solver or Solver(problem, mesh)
    grid = grid if grid is not None else evaluation_grid(problem.polygon, mesh.partition)
    values, ref = _measure(solver, method, grid)
    err = float(np.max(np.abs(values - ref)))
    return MethodRun(mesh.spec, method, solver.density(method), err, time.perf_counter() - t0, values, ref, mesh.n_panels)


# ---------------------------------------------------------------------------
# convergence bookkeeping
# ---------------------------------------------------------------------------


def eoc(errors: Sequence[float]) -> list[float]:
    """``log2(e_k / e_{k+1})`` for consecutive levels."""
    e = [float(x) for x in errors]
    if len(e) < 2:
        raise ValueError("need at least two levels")
    if any(not x > 0.0 for x in e):
        raise NonPositiveError("errors must be positive to estimate an order")
    return [math.log2(a / b) for a, b in zip(e[:-1], e[1:])]


@dataclass
class ReportRow:
    level: int
    n: tuple[int, ...]
    h_max: float
    panels: int
    method: str
    sup_error: float
    eoc: float | None = None


@dataclass
class ConvergenceReport:
    rows: list[ReportRow]
    metadata: dict

    def errors(self, method: str) -> list[float]:
        return [r.sup_error for r in self.rows if r.method == method]

    def eocs(self, method: str) -> list[float]:
        return [r.eoc for r in self.rows if r.method == method and r.eoc is not None]


def _fill_eoc(rows: list[ReportRow]) -> None:
    by_method: dict[str, list[ReportRow]] = {}
    for r in rows:
        by_method.setdefault(r.method, []).append(r)
    for series in by_method.values():
        series.sort(key=lambda r: r.level)
        for prev, cur in zip(series[:-1], series[1:]):
            if prev.sup_error > 0 and cur.sup_error > 0:
                cur.eoc = math.log2(prev.sup_error / cur.sup_error)


def _map(fn, items, parallelism: int):
    if parallelism <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def convergence_ladder(
    problem: Problem,
    base: GradedMeshSpec,
    levels: int,
    methods: Sequence[str] = METHODS,
    rule: QuadratureRule | None = None,
    parallelism: int = 1,
) -> ConvergenceReport:
    """Run every method on ``levels`` meshes, doubling all ``n_j`` each time."""
    specs = [base]
    for _ in range(levels - 1):
        specs.append(specs[-1].doubled())
    grid = evaluation_grid(problem.polygon, problem.partition)

    def one(spec: GradedMeshSpec):
        mesh = build_graded_mesh(problem.polygon, problem.partition, spec)
        solver = Solver(problem, mesh, rule)
        return [run_method(problem, mesh, m, solver, grid) for m in methods]

    results = _map(one, specs, parallelism)
    rows = []
    for level, (spec, runs) in enumerate(zip(specs, results)):
        for run in runs:
            rows.append(ReportRow(level, spec.n, max(spec.h), run.panels, run.method, run.sup_error))
    _fill_eoc(rows)
    return ConvergenceReport(rows, {"problem": problem.label, "q": list(base.q)})


# ---------------------------------------------------------------------------
# extrapolation
# ---------------------------------------------------------------------------


def extrapolation_coefficients(r: int, p: int) -> tuple[Fraction, Fraction]:
    """``(c_fine, c_base)`` with ``c_fine = 2^p / (2^p - 1)`` and ``c_base = 1 - r c_fine``."""
    fine = Fraction(2**p, 2**p - 1)
    return fine, 1 - r * fine


@dataclass(eq=False)
class ExtrapolationRun:
    """Base run, the ``r`` single-segment refinements and their combination."""

    base: MethodRun
    refined: list[MethodRun]
    p: int
    coefficients: tuple[Fraction, Fraction]
    sup_error: float
    values: np.ndarray = field(repr=False)


def extrapolation_runs(
    problem: Problem,
    base: GradedMeshSpec,
    method: str = "iterated_modified",
    rule: QuadratureRule | None = None,
    parallelism: int = 1,
    grid: BoundaryPoints | None = None,
) -> list[MethodRun]:
    """The ``r + 1`` independent solves: base mesh, then segment ``j`` halved for each ``j``."""
    if method not in ITERATED:
        raise ValueError("extrapolation is defined for iterated_galerkin and iterated_modified")
    poly = problem.polygon
    grid = grid if grid is not None else evaluation_grid(poly, problem.partition)
    base_mesh = build_graded_mesh(poly, problem.partition, base)
    meshes = [base_mesh] + [refine_segment(base_mesh, j) for j in range(poly.r)]

    def one(mesh: GradedMesh) -> MethodRun:
        return run_method(problem, mesh, method, Solver(problem, mesh, rule), grid)

    return _map(one, meshes, parallelism)


def combine(runs: Sequence[MethodRun], p: int) -> ExtrapolationRun:
    """Fold ``c_base * u_0 + c_fine * sum_j u_j`` in run order."""
    if p not in (2, 4):
        raise ValueError("p must be 2 or 4")
    fine, coarse = extrapolation_coefficients(len(runs) - 1, p)
    combo = float(coarse) * runs[0].values
    for run in runs[1:]:
        combo = combo + float(fine) * run.values
    err = float(np.max(np.abs(combo - runs[0].reference)))
    return ExtrapolationRun(runs[0], list(runs[1:]), p, (fine, coarse), err, combo)


def extrapolate(
    problem: Problem,
    base: GradedMeshSpec,
    method: str = "iterated_modified",
    p: int = 2,
    rule: QuadratureRule | None = None,
    parallelism: int = 1,
    grid: BoundaryPoints | None = None,
) -> ExtrapolationRun:
    """Multi-parameter Richardson extrapolation over ``r + 1`` solves.

    The solves may run concurrently; the combination is folded in run order
    so the result does not depend on scheduling.
    """
    if p not in (2, 4):
        raise ValueError("p must be 2 or 4")
    return combine(extrapolation_runs(problem, base, method, rule, parallelism, grid), p)


# ---------------------------------------------------------------------------
# operator diagnostics
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticRow:
    level: int
    n: tuple[int, ...]
    h_max: float
    panels: int
    first: float
    second: float
    eoc_first: float | None = None
    eoc_second: float | None = None


def operator_diagnostics(
    problem: Problem, specs: Sequence[GradedMeshSpec], rule: QuadratureRule | None = None, parallelism: int = 1
) -> list[DiagnosticRow]:
    """Sup norms of ``T(I-P)u`` and ``T(I-P)T(I-P)u`` over the evaluation grid.

    ``T u`` comes from the adaptive oracle; ``T`` of piecewise constants is
    exact; the outer ``T`` in the second quantity uses the refined grid.
    """
    if not problem.manufactured:
        raise ValueError("diagnostics require manufactured u_exact")
    grid = evaluation_grid(problem.polygon, problem.partition)
    f = problem.f
    u = problem.u_exact
    Tu_grid = f(grid) - u(grid)

    def one(spec: GradedMeshSpec):
        mesh = build_graded_mesh(problem.polygon, problem.partition, spec)
        asm = Assembly(mesh, rule or gauss_rule(10))
        nodes = asm.grid.nodes
        u_nodes = u(nodes)
        pu = asm.grid.average(u_nodes)
        first = Tu_grid - asm.pc_matrix(grid) @ pu
        w = (f(nodes) - u_nodes) - asm.G @ pu
        w_perp = w - asm.grid.average(w)[asm.grid.node_parent]
        second = asm.apply_layer(grid, w_perp)
        return mesh, float(np.max(np.abs(first))), float(np.max(np.abs(second)))

    out = []
    for level, (spec, (mesh, a, b)) in enumerate(zip(specs, _map(one, list(specs), parallelism))):
        out.append(DiagnosticRow(level, spec.n, max(spec.h), mesh.n_panels, a, b))
    for prev, cur in zip(out[:-1], out[1:]):
        if prev.first > 0 and cur.first > 0:
            cur.eoc_first = math.log2(prev.first / cur.first)
        if prev.second > 0 and cur.second > 0:
            cur.eoc_second = math.log2(prev.second / cur.second)
    return out
