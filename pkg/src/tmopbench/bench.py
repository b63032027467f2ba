"""Kershaw benchmark driver: mesh generation, optimization run, per-kernel
timing, CSV reporting, and legacy VTK output."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, MeshConfigError, MeshSpec, apply_kershaw, build_cartesian
from .metrics import MetricId, TargetKind, TargetSpec, metric_dim
from .operator import InvalidMeshError, LimitingConfig, ObjectiveConfig, TmopProblem
from .solvers import (LineSearchError, MinresBreakdownError, MinresConfig,
                      NewtonConfig, SolveTrace, newton_solve)

__all__ = [
    "BenchConfig",
    "RunReport",
    "KernelTimer",
    "run_benchmark",
    "write_csv",
    "read_csv_row",
    "write_vtk",
    "timing_breakdown",
    "CSV_COLUMNS",
]

KERNELS = ("objective", "gradient", "hessian_setup", "hessian_apply", "linesearch")

CSV_COLUMNS = (
    "nx", "ny", "nz", "order", "nq", "epsy", "epsz", "metric", "precond",
    "dofs", "quad_points", "newton_iters", "minres_iters_total",
    "t_total_s", "t_grad_s", "t_hess_setup_s", "t_hess_apply_s", "t_linesearch_s",
    "F_initial", "F_final", "relgrad_final",
    "min_detA_initial", "min_detA_final", "max_dev_uniform", "status",
)


@dataclass
class BenchConfig:
    nx: int = 12
    ny: int = 12
    nz: int = 12
    order: int = 2
    n_quad: int = 6
    epsy: float = 0.3
    epsz: float = 0.3
    metric: MetricId = MetricId.MU_303
    target_kind: TargetKind = TargetKind.IDEAL_UNIT
    preconditioned: bool = True
    newton_max: int = 100
    newton_rtol: float = 1e-10
    minres_max: int = 50
    minres_rtol: float = 1e-8
    limit_delta: float | None = None
    threads: int = 0
    seed: int = 0
    csv_path: str | None = None
    vtk_prefix: str | None = None

    def mesh_spec(self) -> MeshSpec:
        return MeshSpec(dim=3, nx=self.nx, ny=self.ny, nz=self.nz, order=self.order)

    def validate(self) -> None:
        self.mesh_spec().validate()
        if self.n_quad < self.order + 1:
            raise ValueError(
                f"n_quad = {self.n_quad} under-integrates order {self.order}; "
                f"need n_quad >= order + 1")
        if metric_dim(self.metric) == 2:
            raise ValueError("the benchmark is 3D; metric 2 requires a 2D mesh")
        if self.limit_delta is not None and self.limit_delta <= 0:
            raise ValueError(f"limiting delta must be positive, got {self.limit_delta}")


@dataclass
class RunReport:
    nx: int
    ny: int
    nz: int
    order: int
    n_quad: int
    epsy: float
    epsz: float
    metric: int
    preconditioned: bool
    dofs_per_component: int
    dofs_total: int
    quad_points: int
    newton_iterations: int
    minres_iterations: int
    times: dict[str, float]
    f_initial: float
    f_final: float
    relgrad_final: float
    min_det_initial: float
    min_det_final: float
    max_dev_uniform: float
    status: str
    success: bool
    message: str = ""
    trace: SolveTrace | None = None

    def csv_row(self) -> list[str]:
        vals = {
            "nx": self.nx, "ny": self.ny, "nz": self.nz, "order": self.order,
            "nq": self.n_quad, "epsy": self.epsy, "epsz": self.epsz,
            "metric": self.metric,
            "precond": "on" if self.preconditioned else "off",
            "dofs": self.dofs_total, "quad_points": self.quad_points,
            "newton_iters": self.newton_iterations,
            "minres_iters_total": self.minres_iterations,
            "t_total_s": self.times["total"],
            "t_grad_s": self.times["gradient"],
            "t_hess_setup_s": self.times["hessian_setup"],
            "t_hess_apply_s": self.times["hessian_apply"],
            "t_linesearch_s": self.times["linesearch"],
            "F_initial": self.f_initial, "F_final": self.f_final,
            "relgrad_final": self.relgrad_final,
            "min_detA_initial": self.min_det_initial,
            "min_detA_final": self.min_det_final,
            "max_dev_uniform": self.max_dev_uniform,
            "status": self.status,
        }
        out = []
        for col in CSV_COLUMNS:
            v = vals[col]
            out.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        return out


class KernelTimer:
    """Proxy that accumulates wall time per operator kernel.

    The line-search bucket counts the step-feasibility scans
    (min det evaluations); objective/gradient evaluations during the line
    search accrue to their own buckets, keeping all buckets disjoint.
    """

    def __init__(self, problem: TmopProblem):
        self.problem = problem
        self.seconds = {k: 0.0 for k in KERNELS}

    def _timed(self, bucket: str, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        finally:
            self.seconds[bucket] += time.perf_counter() - t0

    def objective(self, x):
        return self._timed("objective", self.problem.objective, x)

    def gradient(self, x):
        return self._timed("gradient", self.problem.gradient, x)

    def hessian_setup(self, x):
        return self._timed("hessian_setup", self.problem.hessian_setup, x)

    def hessian_diagonal(self, qdata):
        return self._timed("hessian_setup", self.problem.hessian_diagonal, qdata)

    def hessian_apply(self, qdata, v):
        return self._timed("hessian_apply", self.problem.hessian_apply, qdata, v)

    def min_det_jacobian(self, x):
        return self._timed("linesearch", self.problem.min_det_jacobian, x)


def run_benchmark(cfg: BenchConfig) -> RunReport:
    """Build the Cartesian mesh, deform it, optimize back toward uniform,
    and report counters, timings, and quality measures."""
    cfg.validate()
    t_start = time.perf_counter()

    mesh0 = build_cartesian(cfg.mesh_spec())
    uniform = mesh0.dof_vector()
    mesh = apply_kershaw(mesh0, cfg.epsy, cfg.epsz)
    x0 = mesh.dof_vector()

    limiting = None
    if cfg.limit_delta is not None:
        limiting = LimitingConfig(reference=x0.copy(), delta=cfg.limit_delta)
    obj_cfg = ObjectiveConfig(metric=cfg.metric, target=TargetSpec(cfg.target_kind),
                              limiting=limiting)
    problem = TmopProblem(mesh, obj_cfg, cfg.n_quad)
    timed = KernelTimer(problem)

    status, message, success = "ok", "", True
    x_final = x0
    trace = SolveTrace()
    relgrad = 0.0
    f_initial = f_final = float("nan")
    min_det_initial = timed.min_det_jacobian(x0)
    try:
        f_initial = timed.objective(x0)
        result = newton_solve(
            x0, timed,
            NewtonConfig(rel_grad_tolerance=cfg.newton_rtol,
                         max_iterations=cfg.newton_max),
            MinresConfig(max_iterations=cfg.minres_max,
                         rel_tolerance=cfg.minres_rtol,
                         preconditioned=cfg.preconditioned))
        x_final = result.x
        trace = result.trace
        relgrad = result.rel_grad
        success = result.success
        message = result.message
        if not success:
            status = "failed"
        f_final = timed.objective(x_final)
    except (InvalidMeshError, LineSearchError, MinresBreakdownError) as err:
        status, message, success = "failed", str(err), False
        if np.isnan(f_final) and min_det_initial > 0:
            f_final = f_initial
    min_det_final = timed.min_det_jacobian(x_final)

    times = dict(timed.seconds)
    times["total"] = time.perf_counter() - t_start
    report = RunReport(
        nx=cfg.nx, ny=cfg.ny, nz=cfg.nz, order=cfg.order, n_quad=cfg.n_quad,
        epsy=cfg.epsy, epsz=cfg.epsz, metric=int(cfg.metric),
        preconditioned=cfg.preconditioned,
        dofs_per_component=mesh.n_nodes, dofs_total=mesh.n_dofs,
        quad_points=mesh.n_elements * cfg.n_quad ** 3,
        newton_iterations=trace.newton_iterations,
        minres_iterations=trace.minres_total,
        times=times, f_initial=f_initial, f_final=f_final,
        relgrad_final=relgrad, min_det_initial=min_det_initial,
        min_det_final=min_det_final,
        max_dev_uniform=float(np.max(np.abs(x_final - uniform))),
        status=status, success=success, message=message, trace=trace)

    if cfg.csv_path is not None:
        write_csv(report, cfg.csv_path)
    if cfg.vtk_prefix is not None:
        write_vtk(mesh, f"{cfg.vtk_prefix}_initial.vtk", title="kershaw initial mesh")
        write_vtk(mesh.with_coords(x_final.reshape(3, -1)),
                  f"{cfg.vtk_prefix}_final.vtk", title="optimized mesh")
    return report


def write_csv(report: RunReport, path: str) -> None:
    """One header row plus one data row; floats carry 17 significant digits."""
    if not path:
        raise ValueError("CSV path must not be empty")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        fh.write(",".join(report.csv_row()) + "\n")


def read_csv_row(path: str) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        row = fh.readline().strip().split(",")
    if len(header) != len(row):
        raise ValueError(f"malformed CSV {path}: {len(header)} columns, {len(row)} fields")
    return dict(zip(header, row))


def _vtk_point_index(i: int, j: int, k: int, p: int) -> int:
    """Standard VTK Lagrange-hexahedron point ordering for lattice (i, j, k):
    8 corners, 12 edges, 6 faces (x-, x+, y-, y+, z-, z+), then interior."""
    ibdy = i in (0, p)
    jbdy = j in (0, p)
    kbdy = k in (0, p)
    nbdy = ibdy + jbdy + kbdy
    if nbdy == 3:
        return ((2 if j else 1) if i else (3 if j else 0)) + (4 if k else 0)
    offset = 8
    if nbdy == 2:
        if not ibdy:
            return (i - 1) + (2 * p - 2 if j else 0) + (2 * (2 * p - 2) if k else 0) + offset
        if not jbdy:
            return ((j - 1) + ((p - 1) if i else 3 * (p - 1))
                    + (2 * (2 * p - 2) if k else 0) + offset)
        offset += 8 * (p - 1)
        return (k - 1) + (p - 1) * ((3 if j else 1) if i else (2 if j else 0)) + offset
    offset += 12 * (p - 1)
    if nbdy == 1:
        if ibdy:
            return (j - 1) + (p - 1) * (k - 1) + ((p - 1) ** 2 if i else 0) + offset
        offset += 2 * (p - 1) ** 2
        if jbdy:
            return (i - 1) + (p - 1) * (k - 1) + ((p - 1) ** 2 if j else 0) + offset
        offset += 2 * (p - 1) ** 2
        return (i - 1) + (p - 1) * (j - 1) + ((p - 1) ** 2 if k else 0) + offset
    offset += 6 * (p - 1) ** 2
    return (i - 1) + (p - 1) * ((j - 1) + (p - 1) * (k - 1)) + offset


def vtk_lagrange_hex_permutation(order: int) -> np.ndarray:
    """perm[vtk_position] = lexicographic local index (i fastest)."""
    p = order
    n = p + 1
    perm = np.empty(n ** 3, dtype=np.int64)
    for k in range(n):
        for j in range(n):
            for i in range(n):
                lex = i + n * (j + n * k)
                perm[_vtk_point_index(i, j, k, p)] = lex
    return perm


def write_vtk(mesh: Mesh, path: str, title: str = "tmopbench mesh") -> None:
    """Legacy ASCII VTK unstructured grid with Lagrange hexahedra (type 72)."""
    if mesh.dim != 3:
        raise ValueError("VTK output supports 3D meshes only")
    perm = vtk_lagrange_hex_permutation(mesh.order)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(title[:255] + "\n")
            fh.write("ASCII\n")
            fh.write("DATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {mesh.n_nodes} double\n")
            for g in range(mesh.n_nodes):
                x, y, z = mesh.coords[:, g]
                fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
            n_p = perm.size
            fh.write(f"CELLS {mesh.n_elements} {mesh.n_elements * (1 + n_p)}\n")
            for e in range(mesh.n_elements):
                conn = mesh.restriction[e][perm]
                fh.write(str(n_p) + " " + " ".join(map(str, conn)) + "\n")
            fh.write(f"CELL_TYPES {mesh.n_elements}\n")
            for _ in range(mesh.n_elements):
                fh.write("72\n")
    except OSError as err:
        raise OSError(f"failed to write VTK file {path!r}: {err}") from err


def timing_breakdown(report: RunReport) -> str:
    """Per-kernel seconds and share of total; an 'other' bucket absorbs the
    residue so that percentages sum to 100."""
    total = report.times["total"]
    parts = [(k, report.times[k]) for k in KERNELS]
    other = max(0.0, total - sum(t for _, t in parts))
    parts.append(("other", other))
    lines = [f"{'kernel':<14} {'seconds':>12} {'% of total':>11}"]
    for name, secs in parts:
        pct = 100.0 * secs / total if total > 0 else 0.0
        lines.append(f"{name:<14} {secs:>12.4f} {pct:>10.2f}%")
    lines.append(f"{'total':<14} {total:>12.4f} {100.0:>10.2f}%")
    text = "\n".join(lines)
    print(text)
    return text
