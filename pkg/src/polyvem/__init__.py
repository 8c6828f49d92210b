"""Conforming virtual element method for eigenvalue problems with
potential terms on general 2D polygonal meshes."""

from ._kernels import active_backend, available_backends
from .eigsolve import (
    ClusterReport,
    EigenSolution,
    cluster_match,
    solve_dense,
    solve_shift_invert,
)
from .forms import LocalForms, ProblemCoefficients, build_local_forms
from .mesh import (
    FAMILIES,
    PolygonalMesh,
    RegularityReport,
    check_regularity,
    generate_family,
    load_mesh,
    mesh_diameter,
    save_mesh,
)
from .polyquad import MonomialBasis, Quadrature, edge_quadrature, polygon_quadrature
from .projectors import (
    DofLayout,
    ProjectorSet,
    build_projectors,
    dof_layout,
    interpolate_dofs,
)
from .studies import (
    ConvergenceReport,
    StudySpec,
    emit_report,
    fit_rates,
    get_problem,
    run_dauge,
    run_laplace_square,
    run_qho,
    run_study,
)
from .system import GlobalSystem, apply_dirichlet, assemble, deflate_constants

__version__ = "0.1.0"

__all__ = [
    "ClusterReport",
    "ConvergenceReport",
    "DofLayout",
    "EigenSolution",
    "FAMILIES",
    "GlobalSystem",
    "LocalForms",
    "MonomialBasis",
    "PolygonalMesh",
    "ProblemCoefficients",
    "ProjectorSet",
    "Quadrature",
    "RegularityReport",
    "StudySpec",
    "active_backend",
    "apply_dirichlet",
    "assemble",
    "available_backends",
    "build_local_forms",
    "build_projectors",
    "check_regularity",
    "cluster_match",
    "deflate_constants",
    "dof_layout",
    "edge_quadrature",
    "emit_report",
    "fit_rates",
    "generate_family",
    "get_problem",
    "interpolate_dofs",
    "load_mesh",
    "mesh_diameter",
    "polygon_quadrature",
    "run_dauge",
    "run_laplace_square",
    "run_qho",
    "run_study",
    "save_mesh",
    "solve_dense",
    "solve_shift_invert",
    "__version__",
]
