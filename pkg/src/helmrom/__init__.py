"""Adaptive finite elements and rational surrogates for Helmholtz sweeps.

The package computes frequency responses of parametric Helmholtz
boundary-value problems.  Snapshots are piecewise-linear finite element
solutions, each on its own adaptively refined mesh; rational surrogates
interpolate scalar outputs directly or whole solution families through
cross-mesh Gramians assembled on pairwise mesh overlays.
"""

from .geometry import (Curve, Geometry, Segment, InvalidGeometryError,
                       triangle_geometry, plate_geometry, cavity_geometry,
                       square_geometry, polygon_geometry)
from .mesh import (Mesh, create_initial_mesh, refine, element_lineage,
                   save_mesh, load_mesh)
from .fem import (BoundaryCondition, WaveProblem, Snapshot, AssembledSystem,
                  SingularSystemError, assemble_system, solve,
                  evaluate_solution, BoundaryFunctional,
                  apply_linear_functional, apply_quadratic_functional,
                  save_snapshot, load_snapshot)
from .estimator import (IndicatorField, local_indicators, doerfler_mark,
                        write_convergence_csv)
from .adaptive import (AdaptiveConfig, adaptive_solve, snapshot_with_retry,
                       sample_sweep, InsufficientSnapshotsError,
                       resolution_budget)
from .problems import Benchmark, get_benchmark, BENCHMARKS
from .traces import Trace, extract_trace, integrate_product, integrate_against
from .overlay import (InnerProductSpec, MeshOverlay, overlay_pair,
                      cross_inner_product, assemble_gramian,
                      assemble_gramians, assemble_qoi_gramian,
                      trace_common_grid, save_gramian, load_gramian)
from .svd import jacobi_svd
from .rational import (BarycentricRational, QuadraticSurrogate,
                       OrthonormalizedSnapshots, TooFewSamplesError,
                       PoleEvaluationError, min_right_singular_vector,
                       orthonormalize, build_sri, build_vsri,
                       build_vsri_general, build_mri, evaluate, poles,
                       extract_functional_surrogate,
                       build_quadratic_surrogate, evaluate_quadratic,
                       save_surrogate, load_surrogate)
from .cli import (ExperimentConfig, ConfigError, run_experiment,
                  validate_surrogate)

__version__ = "0.1.0"
