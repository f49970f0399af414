"""Projection, operator assembly and the four solution methods.

Notation: ``P`` averages over panels, ``T`` is the double layer, ``N`` the
panel count.  ``A = P T`` restricted to piecewise constants and
``C = P T T`` on the same space.

The modified operator ``PT + TP - PTP`` is handled by block elimination.
Writing ``u = y + z`` with ``y = Pu`` and ``z = (I - P)u``, the equation
``(I + PT + TP - PTP) u = f`` splits into

    y + PTy + PTz = Pf          (apply P)
    z = (I - P)(f - Ty)         (apply I - P)

and substituting the second into the first leaves the N x N system

    (I + A - C + A^2) y = Pf - PTf + A Pf.

Integrals of smooth-but-corner-singular functions use a refined grid: each
panel is cut geometrically toward its corner until every piece is no wider
than ``ratio`` times its distance from the corner.  Double-layer integrals
over a piece use Gauss weights when the target is far and product
integration (exact for polynomial densities) when it is near.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import EvaluationAtBreakpoint, PointNotInterior, SingularSystem
from .geometry import BoundaryPoints, winding_angle
from .kernel import _bases, angle_matrix, targets_from
from .mesh import GradedMesh
from .quadrature import QuadratureRule, gauss_rule

DEFAULT_ORDER = 10
DEFAULT_RATIO = 1.0
DEFAULT_FLOOR = 1e-7
NEAR_RADIUS = 2.5
_BLOCK_BYTES = 48 * 2**20


# ---------------------------------------------------------------------------
# boundary functions
# ---------------------------------------------------------------------------


class BoundaryFunction:
    """A function on the boundary, called with :class:`BoundaryPoints`."""

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class ArclengthFunction(BoundaryFunction):
    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.fn(pts.s), dtype=float), pts.s.shape).copy()


class ConstantFunction(BoundaryFunction):
    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, pts: BoundaryPoints) -> np.ndarray:
        return np.full(len(pts), self.value)


def as_boundary_function(f) -> BoundaryFunction:
    """Accept a ``BoundaryFunction``, a number, or a vectorized function of arclength."""
    if isinstance(f, BoundaryFunction):
        return f
    if np.isscalar(f):
        return ConstantFunction(f)
    return ArclengthFunction(f)


# ---------------------------------------------------------------------------
# refined quadrature grid
# ---------------------------------------------------------------------------


def _cuts(near: float, far: float, ratio: float, floor: float) -> list[float]:
    """Breakpoints from ``far`` down to ``near`` with geometric spacing."""
    if far - near <= ratio * near:
        return [far, near]
    cuts = [far]
    grow = 1.0 + ratio
    stop = floor * far if near == 0.0 else near
    c = far / grow
    while c > stop:
        cuts.append(c)
        c /= grow
    cuts.append(near)
    return cuts


@dataclass(frozen=True, eq=False)
class QuadGrid:
    """Sub-panels and Gauss nodes covering a mesh, refined toward corners."""

    mesh: GradedMesh
    rule: QuadratureRule
    parent: np.ndarray  # sub-panel -> mesh panel
    starts: BoundaryPoints  # sub-panel starts (boundary orientation)
    ends: BoundaryPoints
    nodes: BoundaryPoints  # sub-panel-major, g per sub-panel
    weights: np.ndarray
    node_parent: np.ndarray

    @property
    def n_sub(self) -> int:
        return len(self.parent)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    @cached_property
    def _reduce_index(self) -> np.ndarray:
        return np.flatnonzero(np.r_[True, np.diff(self.node_parent) != 0])

    @cached_property
    def panel_weight_sums(self) -> np.ndarray:
        return np.add.reduceat(self.weights, self._reduce_index)

    def average(self, values: np.ndarray) -> np.ndarray:
        """Panel averages of node values (rows are nodes)."""
        v = np.asarray(values, dtype=float)
        w = self.weights if v.ndim == 1 else self.weights[:, None]
        sums = np.add.reduceat(w * v, self._reduce_index, axis=0)
        norm = self.panel_weight_sums if v.ndim == 1 else self.panel_weight_sums[:, None]
        return sums / norm


def build_quad_grid(
    mesh: GradedMesh, rule: QuadratureRule | None = None, ratio: float = DEFAULT_RATIO, floor: float = DEFAULT_FLOOR
) -> QuadGrid:
    rule = rule or gauss_rule(DEFAULT_ORDER)
    poly = mesh.polygon
    parent, anchor, side, r_start, r_end = [], [], [], [], []
    for i in range(mesh.n_panels):
        cuts = _cuts(float(mesh.rho_near[i]), float(mesh.rho_far[i]), ratio, floor)
        sd = int(mesh.side[i])
        if sd > 0:
            cuts = cuts[::-1]  # boundary orientation runs away from the corner
        for a, b in zip(cuts[:-1], cuts[1:]):
            parent.append(i)
            anchor.append(int(mesh.corner[i]))
            side.append(sd)
            r_start.append(a)
            r_end.append(b)
    parent = np.array(parent, dtype=np.int64)
    anchor = np.array(anchor, dtype=np.int64)
    side = np.array(side, dtype=np.int64)
    r_start = np.array(r_start)
    r_end = np.array(r_end)
    g = rule.order
    rho = r_start[:, None] + rule.nodes[None, :] * (r_end - r_start)[:, None]
    width = np.abs(r_end - r_start)
    return QuadGrid(
        mesh=mesh,
        rule=rule,
        parent=parent,
        starts=BoundaryPoints(poly, anchor, side, r_start),
        ends=BoundaryPoints(poly, anchor, side, r_end),
        nodes=BoundaryPoints(poly, np.repeat(anchor, g), np.repeat(side, g), rho.ravel()),
        weights=(width[:, None] * rule.weights[None, :]).ravel(),
        node_parent=np.repeat(parent, g),
    )


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


class Assembly:
    """Per-mesh operator data shared by every method run on that mesh."""

    def __init__(self, mesh: GradedMesh, rule: QuadratureRule | None = None, ratio: float = DEFAULT_RATIO):
        self.mesh = mesh
        self.rule = rule or gauss_rule(DEFAULT_ORDER)
        self.grid = build_quad_grid(mesh, self.rule, ratio)
        self._C: np.ndarray | None = None
        self._vt_inv = _kernels.vandermonde_t_inverse(self.rule.symmetric_nodes)

    @property
    def n(self) -> int:
        return self.mesh.n_panels

    def pc_matrix(self, targets) -> np.ndarray:
        """Exact double layer of each panel's indicator at the targets."""
        return angle_matrix(self.mesh.polygon, targets, self.mesh.start_points(), self.mesh.end_points())

    @cached_property
    def G(self) -> np.ndarray:
        """``pc_matrix`` at the grid nodes."""
        return self.pc_matrix(self.grid.nodes)

    @cached_property
    def A(self) -> np.ndarray:
        return self.grid.average(self.G)

    def layer_matrix(self, targets) -> np.ndarray:
        """Weights ``W`` with ``(T v)(target) ~= W @ v(grid nodes)``."""
        ta, to, te = targets_from(self.mesh.polygon, targets)
        return self._layer_matrix(ta, to, te)

    def apply_layer(self, targets, values: np.ndarray) -> np.ndarray:
        """``T`` of node-sampled functions (columns of ``values``) at the targets."""
        poly = self.mesh.polygon
        ta, to, te = targets_from(poly, targets)
        m = self.grid.n_nodes
        block = max(1, _BLOCK_BYTES // (8 * m))
        out = []
        for k in range(0, len(ta), block):
            sl = slice(k, k + block)
            W = self._layer_matrix(ta[sl], to[sl], te[sl])
            out.append(W @ values)
        return np.concatenate(out, axis=0)

    def _layer_matrix(self, ta, to, te) -> np.ndarray:
        poly = self.mesh.polygon
        grid = self.grid
        return _kernels.layer_matrix(
            _bases(poly),
            np.ascontiguousarray(ta, dtype=np.int64),
            np.ascontiguousarray(to, dtype=float),
            np.ascontiguousarray(te, dtype=np.int64),
            np.ascontiguousarray(grid.starts.anchor),
            np.ascontiguousarray(grid.starts.offset),
            np.ascontiguousarray(grid.ends.offset),
            np.ascontiguousarray(grid.starts.edge),
            np.ascontiguousarray(poly.normals[grid.starts.edge]),
            np.ascontiguousarray(self.rule.symmetric_nodes),
            np.ascontiguousarray(self.rule.weights),
            self._vt_inv,
            NEAR_RADIUS,
        )

    @property
    def C(self) -> np.ndarray:
        if self._C is None:
            self._C = self.grid.average(self.apply_layer(self.grid.nodes, self.G))
        return self._C

    def C_and_PTf(self, f_nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``C`` and the panel averages of ``T f`` in one sweep when ``C`` is not cached."""
        if self._C is not None:
            return self._C, self.grid.average(self.apply_layer(self.grid.nodes, f_nodes))
        both = self.grid.average(self.apply_layer(self.grid.nodes, np.column_stack([self.G, f_nodes])))
        self._C = both[:, :-1]
        return self._C, both[:, -1]


_ASSEMBLIES: dict = {}


def get_assembly(mesh: GradedMesh, rule: QuadratureRule | None = None) -> Assembly:
    """Assembly cached per (mesh object, rule order)."""
    rule = rule or gauss_rule(DEFAULT_ORDER)
    key = (id(mesh), rule.order)
    hit = _ASSEMBLIES.get(key)
    if hit is not None and hit.mesh is mesh:
        return hit
    if len(_ASSEMBLIES) > 16:
        _ASSEMBLIES.clear()
    asm = Assembly(mesh, rule)
    _ASSEMBLIES[key] = asm
    return asm


# ---------------------------------------------------------------------------
# public data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    mesh: GradedMesh
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.mesh.n_panels,):
            raise ValueError(f"expected {self.mesh.n_panels} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


@dataclass(frozen=True, eq=False)
class GalerkinMatrix:
    A: np.ndarray
    assembly: Assembly = field(repr=False)


@dataclass(frozen=True, eq=False)
class IteratedKernelMatrix:
    C: np.ndarray
    assembly: Assembly = field(repr=False)


@dataclass(frozen=True, eq=False)
class CompositeDensity:
    """Modified-projection density ``y + z`` with ``z`` evaluated lazily."""

    mesh: GradedMesh
    y: PiecewiseConstant
    pf: PiecewiseConstant
    ay: PiecewiseConstant
    f_eval: BoundaryFunction
    assembly: Assembly = field(repr=False)

    def z(self, pts: BoundaryPoints, panels: np.ndarray | None = None) -> np.ndarray:
        if panels is None:
            panels = self.mesh.locate(pts)
        ty = self.assembly.pc_matrix(pts) @ self.y.coeffs
        return (self.f_eval(pts) - self.pf.coeffs[panels]) - (ty - self.ay.coeffs[panels])

    @cached_property
    def z_nodes(self) -> np.ndarray:
        grid = self.assembly.grid
        f = self.f_eval(grid.nodes)
        ty = self.assembly.G @ self.y.coeffs
        p = grid.node_parent
        return (f - self.pf.coeffs[p]) - (ty - self.ay.coeffs[p])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def project(mesh: GradedMesh, f, rule: QuadratureRule | None = None) -> PiecewiseConstant:
    """Panel averages of ``f`` by composite Gauss on the refined grid."""
    asm = get_assembly(mesh, rule)
    f = as_boundary_function(f)
    return PiecewiseConstant(mesh, asm.grid.average(f(asm.grid.nodes)))


def assemble_A(mesh: GradedMesh, rule: QuadratureRule | None = None) -> GalerkinMatrix:
    asm = get_assembly(mesh, rule)
    return GalerkinMatrix(asm.A, asm)


def assemble_C(mesh: GradedMesh, rule: QuadratureRule | None = None) -> IteratedKernelMatrix:
    asm = get_assembly(mesh, rule)
    return IteratedKernelMatrix(asm.C, asm)


def _lu_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    scale = np.linalg.norm(M, ord=np.inf)
    if np.min(np.abs(np.diag(lu))) <= 1e-13 * scale:
        raise SingularSystem("system matrix is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), rhs)


def solve_galerkin(A, pf) -> PiecewiseConstant:
    """Solve ``(I + A) c = Pf``."""
    mat = A.A if isinstance(A, GalerkinMatrix) else np.asarray(A)
    mesh = pf.mesh
    c = _lu_solve(np.eye(len(mat)) + mat, pf.coeffs)
    return PiecewiseConstant(mesh, c)


def solve_modified(A, C, mesh: GradedMesh, f, rule: QuadratureRule | None = None) -> CompositeDensity:
    """Modified projection solution via the reduced system in the module notes."""
    asm = A.assembly if isinstance(A, GalerkinMatrix) else get_assembly(mesh, rule)
    a = A.A if isinstance(A, GalerkinMatrix) else np.asarray(A)
    f = as_boundary_function(f)
    f_nodes = f(asm.grid.nodes)
    pf = asm.grid.average(f_nodes)
    if C is None:
        c, ptf = asm.C_and_PTf(f_nodes)
    else:
        c = C.C if isinstance(C, IteratedKernelMatrix) else np.asarray(C)
        ptf = asm.grid.average(asm.apply_layer(asm.grid.nodes, f_nodes))
    n = len(a)
    system = np.eye(n) + a - c + a @ a
    y = _lu_solve(system, pf - ptf + a @ pf)
    return CompositeDensity(
        mesh=mesh,
        y=PiecewiseConstant(mesh, y),
        pf=PiecewiseConstant(mesh, pf),
        ay=PiecewiseConstant(mesh, a @ y),
        f_eval=f,
        assembly=asm,
    )


def _as_points(mesh: GradedMesh, s) -> BoundaryPoints:
    if isinstance(s, BoundaryPoints):
        return s
    return mesh.to_segments(BoundaryPoints.from_arclength(mesh.polygon, np.atleast_1d(s)))


def evaluate_density(d, s, strict: bool = False) -> np.ndarray:
    """Pointwise values of a piecewise-constant or composite density.

    With ``strict`` an arclength on a mesh breakpoint raises
    ``EvaluationAtBreakpoint``; otherwise the panel beyond it is used.
    """
    mesh = d.mesh
    pts = _as_points(mesh, s)
    if strict:
        _check_breakpoints(mesh, pts)
    panels = mesh.locate(pts)
    if isinstance(d, PiecewiseConstant):
        return d.coeffs[panels]
    return d.y.coeffs[panels] + d.z(pts, panels)


def _check_breakpoints(mesh: GradedMesh, pts: BoundaryPoints) -> None:
    seg = mesh.to_segments(pts)
    for j, sd, rho in zip(seg.anchor, seg.side, seg.rho):
        nodes = mesh.segment_nodes[j][0 if sd < 0 else 1]
        if np.any(nodes == rho):
            raise EvaluationAtBreakpoint(f"rho = {rho} from corner {j} is a mesh breakpoint")


def apply_T(d, targets) -> np.ndarray:
    """``T d`` at boundary or plane targets: exact on ``S^h`` parts, quadrature on ``z``."""
    if isinstance(d, PiecewiseConstant):
        m = d.mesh
        return angle_matrix(m.polygon, targets, m.start_points(), m.end_points()) @ d.coeffs
    asm = d.assembly
    return asm.pc_matrix(targets) @ d.y.coeffs + asm.apply_layer(targets, d.z_nodes)


def iterate(d, f, s, rule: QuadratureRule | None = None) -> np.ndarray:
    """Iterated (Sloan-type) values ``f - T d`` at boundary points."""
    pts = _as_points(d.mesh, s)
    f = as_boundary_function(f)
    return f(pts) - apply_T(d, pts)


def interior_potential(d, x, rule: QuadratureRule | None = None) -> np.ndarray:
    """Double-layer potential of ``d`` at interior plane points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    poly = d.mesh.polygon
    for p in x:
        if abs(winding_angle(poly, p) - 2 * math.pi) > 1e-6:
            raise PointNotInterior(f"point {p.tolist()} is not strictly inside the polygon")
    return apply_T(d, x)
