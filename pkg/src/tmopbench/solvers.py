"""MINRES with optional Jacobi preconditioning, the backtracking line
search, and the outer Newton loop.

The Newton update is x <- x - alpha * dx with dx from a MINRES solve of
the Hessian system; a step is accepted once the objective and gradient
norm grow by less than a factor 1.2 (strict) and every quadrature-point
Jacobian determinant stays positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

__all__ = [
    "MinresConfig",
    "NewtonConfig",
    "MinresResult",
    "MinresBreakdownError",
    "LineSearchError",
    "LineSearchResult",
    "NewtonIterationRecord",
    "SolveTrace",
    "NewtonResult",
    "jacobi_preconditioner",
    "minres",
    "line_search",
    "newton_solve",
]

JACOBI_FLOOR = 1e-12
GROWTH_FACTOR = 1.2


@dataclass
class MinresConfig:
    max_iterations: int = 50
    rel_tolerance: float = 1e-8
    preconditioned: bool = True

    def validate(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("MINRES needs at least one iteration")
        if self.rel_tolerance <= 0:
            raise ValueError("MINRES tolerance must be positive")


@dataclass
class NewtonConfig:
    rel_grad_tolerance: float = 1e-10
    max_iterations: int = 100
    max_line_search_halvings: int = 30
    # Gradients below this absolute norm count as converged; needed so an
    # already-optimal input (zero gradient up to roundoff) returns directly.
    abs_grad_tolerance: float = 1e-12

    def validate(self) -> None:
        if self.rel_grad_tolerance <= 0:
            raise ValueError("Newton gradient tolerance must be positive")


class MinresBreakdownError(RuntimeError):
    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"MINRES breakdown (beta = 0) at iteration {iteration}")


class LineSearchError(RuntimeError):
    pass


@dataclass
class MinresResult:
    x: np.ndarray
    iterations: int
    rel_residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)


def jacobi_preconditioner(diag: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """z = r / max(|diag|, floor); absolute values keep the preconditioner
    positive definite for indefinite operators, the floor guards zeros."""
    diag = np.asarray(diag, dtype=float)
    if not np.all(np.isfinite(diag)):
        raise ValueError("preconditioner diagonal contains non-finite entries")
    inv = 1.0 / np.maximum(np.abs(diag), JACOBI_FLOOR)
    return lambda r: inv * r


def minres(apply_op: Callable[[np.ndarray], np.ndarray], b: np.ndarray,
           cfg: MinresConfig,
           precond: Callable[[np.ndarray], np.ndarray] | None = None) -> MinresResult:
    """Preconditioned MINRES from a zero initial guess.

    ``apply_op`` must be symmetric (indefinite is fine); ``precond`` must be
    symmetric positive definite.  Stops when the preconditioned residual
    norm drops below ``rel_tolerance`` relative to its initial value.
    """
    cfg.validate()
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    msolve = precond if precond is not None else (lambda r: r)

    r1 = b.copy()
    y = msolve(r1)
    beta1 = float(r1 @ y)
    if beta1 < 0:
        raise ValueError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    if beta1 == 0.0:
        return MinresResult(x=x, iterations=0, rel_residual=0.0, converged=True,
                            residual_history=[0.0])

    oldb = 0.0
    beta = beta1
    dbar = epsln = sn = 0.0
    cs = -1.0
    phibar = beta1
    w = np.zeros_like(b)
    w2 = np.zeros_like(b)
    r2 = r1.copy()
    history = [1.0]

    converged = False
    itn = 0
    while itn < cfg.max_iterations:
        itn += 1
        v = y / beta
        y = apply_op(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = msolve(r2)
        oldb = beta
        beta2 = float(r2 @ y)
        if beta2 < 0:
            raise ValueError("preconditioner is not positive definite")
        beta = np.sqrt(beta2)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        if beta == 0.0:
            # Krylov space exhausted: the recurrence estimate is unreliable
            # here, so decide on an explicit residual.
            r = b - apply_op(x)
            z = msolve(r)
            explicit = np.sqrt(max(float(r @ z), 0.0)) / beta1
            history.append(explicit)
            if explicit <= cfg.rel_tolerance:
                converged = True
                break
            raise MinresBreakdownError(itn)
        relres = phibar / beta1
        history.append(relres)
        if relres <= cfg.rel_tolerance:
            converged = True
            break

    return MinresResult(x=x, iterations=itn, rel_residual=history[-1],
                        converged=converged, residual_history=history)


class ProblemLike(Protocol):
    def objective(self, x: np.ndarray) -> float: ...
    def gradient(self, x: np.ndarray) -> np.ndarray: ...
    def hessian_setup(self, x: np.ndarray): ...
    def hessian_apply(self, qdata, v: np.ndarray) -> np.ndarray: ...
    def hessian_diagonal(self, qdata) -> np.ndarray: ...
    def min_det_jacobian(self, x: np.ndarray) -> float: ...


@dataclass
class LineSearchResult:
    alpha: float
    x: np.ndarray
    objective: float
    grad_norm: float
    min_det: float
    gradient: np.ndarray


def line_search(x: np.ndarray, dx: np.ndarray, problem: ProblemLike,
                f0: float, grad_norm0: float,
                max_halvings: int = 30) -> LineSearchResult:
    """Halve alpha from 1 until F and |grad F| grow by less than 1.2x
    (strict) and min det(A) stays positive; the update is x - alpha * dx."""
    if not np.all(np.isfinite(dx)):
        raise LineSearchError("step direction contains non-finite entries")
    alpha = 1.0
    for _ in range(max_halvings + 1):
        xt = x - alpha * dx
        md = problem.min_det_jacobian(xt)
        if md > 0.0:
            ft = problem.objective(xt)
            if ft < GROWTH_FACTOR * f0:
                gt = problem.gradient(xt)
                ngt = float(np.linalg.norm(gt))
                if ngt < GROWTH_FACTOR * grad_norm0:
                    return LineSearchResult(alpha=alpha, x=xt, objective=ft,
                                            grad_norm=ngt, min_det=md, gradient=gt)
        alpha *= 0.5
    raise LineSearchError(
        f"no acceptable step after {max_halvings} halvings "
        f"(F0 = {f0:.6e}, |grad F0| = {grad_norm0:.6e})")


@dataclass
class NewtonIterationRecord:
    alpha: float
    objective: float
    grad_norm: float
    minres_iterations: int
    minres_rel_residual: float
    min_det: float


@dataclass
class SolveTrace:
    records: list[NewtonIterationRecord] = field(default_factory=list)

    def append(self, record: NewtonIterationRecord) -> None:
        self.records.append(record)

    @property
    def newton_iterations(self) -> int:
        return len(self.records)

    @property
    def minres_total(self) -> int:
        return sum(r.minres_iterations for r in self.records)


@dataclass
class NewtonResult:
    x: np.ndarray
    trace: SolveTrace
    success: bool
    rel_grad: float
    initial_grad_norm: float
    message: str = "converged"


def newton_solve(x0: np.ndarray, problem: ProblemLike,
                 newton_cfg: NewtonConfig | None = None,
                 minres_cfg: MinresConfig | None = None) -> NewtonResult:
    """Newton iteration with MINRES inner solves and the backtracking line
    search; the Hessian quadrature data is rebuilt at every accepted iterate
    and frozen during the linear solve."""
    newton_cfg = newton_cfg or NewtonConfig()
    minres_cfg = minres_cfg or MinresConfig()
    newton_cfg.validate()
    minres_cfg.validate()

    x0 = np.asarray(x0, dtype=float)
    md0 = problem.min_det_jacobian(x0)
    if md0 <= 0.0:
        raise LineSearchError(f"initial mesh is inverted (min det A = {md0:.3e})")

    trace = SolveTrace()
    g = problem.gradient(x0)
    ng0 = float(np.linalg.norm(g))
    if ng0 <= newton_cfg.abs_grad_tolerance:
        return NewtonResult(x=x0.copy(), trace=trace, success=True, rel_grad=0.0,
                            initial_grad_norm=ng0, message="initial gradient is zero")

    x = x0.copy()
    f = problem.objective(x)
    ng = ng0
    qdata = None
    for _ in range(newton_cfg.max_iterations):
        qdata = None  # release before rebuilding: qdata can be large
        qdata = problem.hessian_setup(x)
        precond = None
        if minres_cfg.preconditioned:
            precond = jacobi_preconditioner(problem.hessian_diagonal(qdata))
        try:
            mr = minres(lambda v: problem.hessian_apply(qdata, v), g,
                        minres_cfg, precond)
        except MinresBreakdownError as err:
            return NewtonResult(x=x, trace=trace, success=False,
                                rel_grad=ng / ng0, initial_grad_norm=ng0,
                                message=str(err))
        try:
            ls = line_search(x, mr.x, problem, f0=f, grad_norm0=ng,
                             max_halvings=newton_cfg.max_line_search_halvings)
        except LineSearchError as err:
            return NewtonResult(x=x, trace=trace, success=False,
                                rel_grad=ng / ng0, initial_grad_norm=ng0,
                                message=str(err))
        x, f, ng = ls.x, ls.objective, ls.grad_norm
        g = ls.gradient
        trace.append(NewtonIterationRecord(
            alpha=ls.alpha, objective=f, grad_norm=ng,
            minres_iterations=mr.iterations, minres_rel_residual=mr.rel_residual,
            min_det=ls.min_det))
        if ng / ng0 <= newton_cfg.rel_grad_tolerance:
            return NewtonResult(x=x, trace=trace, success=True, rel_grad=ng / ng0,
                                initial_grad_norm=ng0)
    return NewtonResult(x=x, trace=trace, success=False, rel_grad=ng / ng0,
                        initial_grad_norm=ng0,
                        message=f"no convergence in {newton_cfg.max_iterations} iterations")
