"""Linear DG discretization of the 2D Helmholtz problem with polynomial
preserving gradient recovery, Richardson extrapolation, and a recovery-based
a posteriori error estimator."""

from .bessel import bessel_j
from .dg import (CGFunction, ComplexSparseSystem, DGFunction, assemble_penalty,
                 assemble_rhs, assemble_system, interpolate_p1, j0_form,
                 solve_helmholtz)
from .errors import ErrorRecord, compute_errors, elliptic_projection
from .exact import LinearSolution, WaveParams, exact_f, exact_g, exact_grad_u, exact_u
from .linsolve import SolveReport, solve_sparse_complex
from .mesh import (MeshConditionReport, TriMesh, build_mesh, estimate_alpha,
                   measure_mesh_condition, read_mesh_text,
                   verify_fundamental_identity, write_mesh_text)
from .quadrature import QuadratureSettings, edge_rule, triangle_rule
from .recovery import (RecoveredGradient, RecoveryOperator, build_recovery_operator,
                       dg_to_cg, error_estimator, recover_gradient,
                       richardson_extrapolate)
from .study import StudyConfig, StudyRecord, compute_rates, run_study

__version__ = "0.1.0"
