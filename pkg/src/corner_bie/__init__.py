"""Second-kind double-layer boundary integral equations on polygons.

Graded meshes, piecewise-constant Galerkin, modified projection, iterated
post-processing and multi-parameter Richardson extrapolation.
"""

from .errors import *  # noqa: F401,F403
from .geometry import (
    BoundaryPoints,
    BoundarySample,
    PartitionSpec,
    Polygon,
    build_polygon,
    default_partition,
    is_interior,
    make_partition,
    point_at,
    winding_angle,
)
from .harness import (
    ConvergenceReport,
    ExtrapolationRun,
    MethodRun,
    Problem,
    Solver,
    convergence_ladder,
    eoc,
    evaluation_grid,
    extrapolate,
    extrapolation_coefficients,
    make_harmonic,
    make_manufactured,
    operator_diagnostics,
    run_method,
)
from .kernel import apply_T_pc, corner_kernel, kernel_eval, panel_angle_integral
from .mesh import GradedMesh, GradedMeshSpec, Panel, build_graded_mesh, recommend_grading, refine_segment
from .operators import (
    CompositeDensity,
    GalerkinMatrix,
    IteratedKernelMatrix,
    PiecewiseConstant,
    apply_T,
    assemble_A,
    assemble_C,
    evaluate_density,
    interior_potential,
    iterate,
    project,
    solve_galerkin,
    solve_modified,
)
from .quadrature import AdaptiveResult, QuadratureRule, adaptive_integrate, composite_integrate, gauss_rule

__version__ = "0.1.0"
