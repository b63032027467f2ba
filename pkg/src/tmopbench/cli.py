"""Command-line driver for the Kershaw mesh-optimization benchmark.

Heavy imports happen inside main() so the --threads flag can pin the BLAS
thread count through environment variables before numpy loads.
"""

from __future__ import annotations

import argparse
import os
import sys


def _parse_limit(text: str) -> float | None:
    if text == "off":
        return None
    if text.startswith("delta="):
        try:
            return float(text[len("delta="):])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(
        f"--limit expects 'off' or 'delta=<value>', got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tmop-bench",
        description="Optimize a Kershaw-deformed hex mesh back toward the "
                    "uniform lattice and report solver counters and timings.")
    p.add_argument("--nx", type=int, default=12, help="elements in x (multiple of 6)")
    p.add_argument("--ny", type=int, default=12, help="elements in y (multiple of 2)")
    p.add_argument("--nz", type=int, default=12, help="elements in z (multiple of 2)")
    p.add_argument("--order", type=int, default=2, help="polynomial order of the mesh")
    p.add_argument("--nq", type=int, default=6,
                   help="quadrature points per direction (>= order + 1)")
    p.add_argument("--epsy", type=float, default=0.3, help="y anisotropy in (0, 1]")
    p.add_argument("--epsz", type=float, default=0.3, help="z anisotropy in (0, 1]")
    p.add_argument("--metric", type=int, choices=(2, 55, 303), default=303,
                   help="quality metric id")
    p.add_argument("--target", choices=("unit", "size"), default="unit",
                   help="ideal target: unit cube or equal-size scaling")
    p.add_argument("--precond", choices=("on", "off"), default="on",
                   help="Jacobi preconditioning for MINRES")
    p.add_argument("--newton-max", type=int, default=100)
    p.add_argument("--newton-rtol", type=float, default=1e-10)
    p.add_argument("--minres-max", type=int, default=50)
    p.add_argument("--minres-rtol", type=float, default=1e-8)
    p.add_argument("--limit", type=_parse_limit, default=None, metavar="off|delta=<v>",
                   help="displacement limiting (default off)")
    p.add_argument("--threads", type=int, default=0,
                   help="BLAS thread count (0 = library default)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for test fixtures")
    p.add_argument("--csv", type=str, default=None, metavar="PATH",
                   help="write the run report as a one-row CSV")
    p.add_argument("--vtk-prefix", type=str, default=None, metavar="PATH",
                   help="write <prefix>_initial.vtk and <prefix>_final.vtk")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .bench import BenchConfig, run_benchmark, timing_breakdown
    from .mesh import MeshConfigError
    from .metrics import MetricId, TargetKind

    cfg = BenchConfig(
        nx=args.nx, ny=args.ny, nz=args.nz, order=args.order, n_quad=args.nq,
        epsy=args.epsy, epsz=args.epsz, metric=MetricId(args.metric),
        target_kind=(TargetKind.IDEAL_UNIT if args.target == "unit"
                     else TargetKind.IDEAL_EQUAL_SIZE),
        preconditioned=args.precond == "on",
        newton_max=args.newton_max, newton_rtol=args.newton_rtol,
        minres_max=args.minres_max, minres_rtol=args.minres_rtol,
        limit_delta=args.limit, threads=args.threads, seed=args.seed,
        csv_path=args.csv, vtk_prefix=args.vtk_prefix)
    try:
        cfg.validate()
    except (MeshConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    report = run_benchmark(cfg)
    print(f"mesh {cfg.nx}x{cfg.ny}x{cfg.nz}, order {cfg.order}, "
          f"{report.dofs_total} dofs, {report.quad_points} quadrature points")
    print(f"status: {report.status}"
          + (f" ({report.message})" if report.message and not report.success else ""))
    print(f"newton iterations: {report.newton_iterations}, "
          f"MINRES iterations: {report.minres_iterations}")
    print(f"F: {report.f_initial:.6e} -> {report.f_final:.6e}, "
          f"relative gradient: {report.relgrad_final:.3e}")
    print(f"min det A: {report.min_det_initial:.6e} -> {report.min_det_final:.6e}, "
          f"max deviation from uniform: {report.max_dev_uniform:.3e}")
    timing_breakdown(report)
    return 0 if report.success else 1


if __name__ == "__main__":
    raise SystemExit(main())
