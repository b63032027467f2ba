"""High-order tensor-product mesh optimization with matrix-free partial
assembly, verified against a full-assembly reference, plus the Kershaw
mesh benchmark CLI."""

from .fe import (Basis1D, EvalMatrices, OpCounter, QuadRule1D,
                 build_eval_matrices, gauss_legendre_1d, gauss_lobatto_points)
from .mesh import (Mesh, MeshConfigError, MeshSpec, apply_kershaw, build_box,
                   build_cartesian, kershaw_left, kershaw_right, kershaw_step,
                   kershaw_transform)
from .metrics import (MetricEval, MetricId, TargetKind, TargetSpec,
                      build_targets, evaluate, metric_first_derivative,
                      metric_second_derivative, metric_value)
from .operator import (HessQData, InvalidMeshError, LimitingConfig,
                       ObjectiveConfig, TmopProblem, fa_csr_bytes, fa_csr_nnz)
from .solvers import (LineSearchError, MinresBreakdownError, MinresConfig,
                      NewtonConfig, NewtonResult, SolveTrace,
                      jacobi_preconditioner, line_search, minres, newton_solve)
from .bench import (BenchConfig, RunReport, run_benchmark, timing_breakdown,
                    write_csv, write_vtk)

__version__ = "0.1.0"
