"""1D bases and quadrature, evaluation tables, element gather/scatter, and
sum-factorized tensor contractions.

Conventions used throughout the package:

* Degree-of-freedom tensors are laid out component-outermost, then element,
  then lexicographic ``(i_d, ..., i_2, i_1)`` with ``i_1`` fastest, so a
  numpy array of shape ``(n_elements, n, ..., n)`` in C order has the
  direction-1 index on its last axis.
* Quadrature-point tensors follow the same layout with ``q_1`` fastest;
  flattened quadrature indices are C-order ravels of ``(q_d, ..., q_1)``.
* ``mats[k]`` in a contraction is the 1D matrix for reference direction
  ``k + 1``, applied along axis ``-(k + 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Basis1D",
    "QuadRule1D",
    "EvalMatrices",
    "OpCounter",
    "gauss_lobatto_points",
    "gauss_legendre_1d",
    "build_eval_matrices",
    "e_gather",
    "e_scatter_add",
    "dof_tensor",
    "flatten_dof_tensor",
    "contract_dofs_to_quad",
    "contract_quad_to_dofs",
    "jacobians_at_quad",
]

_COINCIDENT_TOL = 1e-13


def gauss_lobatto_points(n: int) -> np.ndarray:
    """Return ``n >= 2`` Gauss-Lobatto points on [0, 1], endpoints included."""
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if n == 2:
        return np.array([0.0, 1.0])
    # Interior points are the roots of P'_{n-1}.
    coeff = np.zeros(n)
    coeff[-1] = 1.0
    interior = np.polynomial.legendre.Legendre(coeff).deriv().roots()
    pts = np.concatenate(([-1.0], np.sort(interior.real), [1.0]))
    return (pts + 1.0) / 2.0


@dataclass(frozen=True)
class Basis1D:
    """Lagrange basis of degree ``order`` on strictly increasing ``nodes`` in [0, 1]."""

    order: int
    nodes: np.ndarray

    @classmethod
    def gauss_lobatto(cls, order: int) -> "Basis1D":
        return cls(order=order, nodes=gauss_lobatto_points(order + 1))

    @property
    def n_nodes(self) -> int:
        return self.order + 1

    def _bary_weights(self) -> np.ndarray:
        diff = self.nodes[:, None] - self.nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        return 1.0 / np.prod(diff, axis=1)

    def eval_values(self, x: np.ndarray) -> np.ndarray:
        """Values l_i(x_q) as an (n_points, n_nodes) table, barycentric form."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = self._bary_weights()
        diff = x[:, None] - self.nodes[None, :]
        hit = np.abs(diff) < _COINCIDENT_TOL
        safe = np.where(hit, 1.0, diff)
        terms = w[None, :] / safe
        vals = terms / terms.sum(axis=1, keepdims=True)
        rows = np.nonzero(hit.any(axis=1))[0]
        for r in rows:
            vals[r] = 0.0
            vals[r, np.argmax(hit[r])] = 1.0
        return vals

    def eval_derivs(self, x: np.ndarray) -> np.ndarray:
        """Derivatives l_i'(x_q) as an (n_points, n_nodes) table."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = self._bary_weights()
        diff = x[:, None] - self.nodes[None, :]
        hit = np.abs(diff) < _COINCIDENT_TOL
        safe = np.where(hit, 1.0, diff)
        inv = 1.0 / safe
        terms = w[None, :] * inv
        vals = terms / terms.sum(axis=1, keepdims=True)
        total = inv.sum(axis=1, keepdims=True)
        out = vals * (total - inv)
        for r in np.nonzero(hit.any(axis=1))[0]:
            k = int(np.argmax(hit[r]))
            gaps = self.nodes[k] - self.nodes
            gaps[k] = 1.0
            row = (w / w[k]) / gaps
            row[k] = 0.0
            row[k] = -row.sum()
            out[r] = row
        return out


@dataclass(frozen=True)
class QuadRule1D:
    """Points in (0, 1) with positive weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.points)


def gauss_legendre_1d(n_q: int) -> QuadRule1D:
    """Gauss-Legendre rule with ``n_q`` points mapped from [-1, 1] to [0, 1]."""
    if not 1 <= n_q <= 32:
        raise ValueError(f"n_q must be in [1, 32], got {n_q}")
    pts, wts = np.polynomial.legendre.leggauss(n_q)
    return QuadRule1D(points=(pts + 1.0) / 2.0, weights=wts / 2.0)


def tensor_weights(rule: QuadRule1D, dim: int) -> np.ndarray:
    """Tensor-product weights flattened with the direction-1 index fastest."""
    w = rule.weights
    out = w
    for _ in range(dim - 1):
        out = np.multiply.outer(w, out)
    return out.ravel()


@dataclass(frozen=True)
class EvalMatrices:
    """B[q, i] = l_i(chi_q) and G[q, i] = l_i'(chi_q), both (n_q, n_i)."""

    b: np.ndarray
    g: np.ndarray

    @property
    def n_quad(self) -> int:
        return self.b.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.b.shape[1]


def build_eval_matrices(basis: Basis1D, rule: QuadRule1D) -> EvalMatrices:
    return EvalMatrices(b=basis.eval_values(rule.points), g=basis.eval_derivs(rule.points))


@dataclass
class OpCounter:
    """Accumulates multiply-add counts of contraction and quadrature kernels.

    Counts are derived from array shapes at each kernel call, so they are
    deterministic and independent of wall time or threading.
    """

    madds: int = 0

    def add(self, n: int) -> None:
        self.madds += int(n)

    def reset(self) -> None:
        self.madds = 0


def e_gather(restriction: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Gather global values to element-local copies.

    ``values`` has node count on its last axis; leading axes (e.g. the
    component axis) broadcast through.  Output shape is
    ``values.shape[:-1] + restriction.shape``.
    """
    return values[..., restriction]

def e_scatter_add(restriction: np.ndarray, evalues: np.ndarray, n_nodes: int) -> np.ndarray:
    """Additive transpose of :func:`e_gather`.

    Contributions are accumulated in ascending element order per node
    (np.add.at applies updates in index order), which keeps results
    bitwise-reproducible.
    """
    lead = evalues.shape[: evalues.ndim - restriction.ndim]
    out = np.zeros(lead + (n_nodes,))
    flat_idx = restriction.ravel()
    if lead:
        for pos in np.ndindex(*lead):
            np.add.at(out[pos], flat_idx, evalues[pos].ravel())
    else:
        np.add.at(out, flat_idx, evalues.ravel())
    return out


def dof_tensor(evalues: np.ndarray, dim: int, order: int) -> np.ndarray:
    """Reshape (..., n_elements, (p+1)^d) E-values to per-axis tensor form."""
    n = order + 1
    return evalues.reshape(evalues.shape[:-1] + (n,) * dim)


def flatten_dof_tensor(tensor: np.ndarray, dim: int) -> np.ndarray:
    shape = tensor.shape
    return tensor.reshape(shape[: len(shape) - dim] + (-1,))


def _apply_axis(mat: np.ndarray, tensor: np.ndarray, axis: int,
                counter: OpCounter | None) -> np.ndarray:
    """out[..., q, ...] = sum_i mat[q, i] * tensor[..., i, ...] along ``axis``."""
    moved = np.moveaxis(tensor, axis, -1)
    if counter is not None:
        counter.add(mat.shape[0] * mat.shape[1] * (moved.size // moved.shape[-1]))
    return np.moveaxis(moved @ mat.T, -1, axis)


def contract_dofs_to_quad(tensor: np.ndarray, mats: list[np.ndarray],
                          counter: OpCounter | None = None) -> np.ndarray:
    """Interpolate a dof tensor to quadrature points by d successive 1D
    contractions, applied direction d first (innermost sum) down to 1."""
    dim = len(mats)
    for axis_from_end in range(dim, 0, -1):
        mat = mats[axis_from_end - 1]
        if mat.shape[1] != tensor.shape[-axis_from_end]:
            raise ValueError(
                f"matrix for direction {axis_from_end} has {mat.shape[1]} columns, "
                f"tensor axis has extent {tensor.shape[-axis_from_end]}")
        tensor = _apply_axis(mat, tensor, -axis_from_end, counter)
    return tensor


def contract_quad_to_dofs(tensor: np.ndarray, mats: list[np.ndarray],
                          counter: OpCounter | None = None) -> np.ndarray:
    """Adjoint of :func:`contract_dofs_to_quad`: applies each matrix transposed."""
    dim = len(mats)
    for axis_from_end in range(1, dim + 1):
        mat = mats[axis_from_end - 1]
        if mat.shape[0] != tensor.shape[-axis_from_end]:
            raise ValueError(
                f"matrix for direction {axis_from_end} has {mat.shape[0]} rows, "
                f"tensor axis has extent {tensor.shape[-axis_from_end]}")
        tensor = _apply_axis(mat.T, tensor, -axis_from_end, counter)
    return tensor


def gradient_mats(em: EvalMatrices, dim: int, direction: int) -> list[np.ndarray]:
    """Per-direction matrices with G in ``direction`` (0-based) and B elsewhere."""
    mats = [em.b] * dim
    mats[direction] = em.g
    return mats


def jacobians_at_quad(coords: np.ndarray, restriction: np.ndarray, em: EvalMatrices,
                      dim: int, order: int,
                      counter: OpCounter | None = None) -> np.ndarray:
    """Jacobian A[e, q, a, b] = d x_a / d xbar_b at every quadrature point.

    ``coords`` is (dim, n_nodes); ``restriction`` may be a row subset for
    batched evaluation.  The flattened quadrature index q has q_1 fastest.
    All components are contracted together (one call per direction).
    """
    etens = dof_tensor(e_gather(restriction, coords), dim, order)
    n_elems = restriction.shape[0]
    n_q_total = em.n_quad ** dim
    out = np.empty((n_elems, n_q_total, dim, dim))
    for b in range(dim):
        q = contract_dofs_to_quad(etens, gradient_mats(em, dim, b), counter)
        out[:, :, :, b] = np.moveaxis(q.reshape(dim, n_elems, n_q_total), 0, -1)
    return out


def jacobians_planar(coords: np.ndarray, restriction: np.ndarray, em: EvalMatrices,
                     dim: int, order: int,
                     counter: OpCounter | None = None) -> np.ndarray:
    """Jacobians in planar layout (a, b, element, point): every [a, b] slice
    is contiguous, which the batched operator kernels rely on."""
    etens = dof_tensor(e_gather(restriction, coords), dim, order)
    n_elems = restriction.shape[0]
    n_q_total = em.n_quad ** dim
    out = np.empty((dim, dim, n_elems, n_q_total))
    for b in range(dim):
        q = contract_dofs_to_quad(etens, gradient_mats(em, dim, b), counter)
        out[:, b] = q.reshape(dim, n_elems, n_q_total)
    return out
