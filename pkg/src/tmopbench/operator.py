"""Mesh-quality objective, gradient, and Hessian operators.

Two evaluation routes are provided and kept intentionally independent:

* the partial-assembly (PA) route stores only per-quadrature-point data and
  applies the Hessian through sum-factorized 1D contractions;
* the full-assembly (FA) reference route tabulates dense per-point basis
  gradients and builds a global sparse matrix with nested loops.

Vectors ("T-vectors") are flat float64 arrays of length dim * n_nodes,
component-major.  Boundary conditions fix single components (nodes on a
face with normal along axis a have component a fixed), which permits
tangential sliding along the box faces.

Hot per-point loops work on the planar (d, d, points) layout where every
matrix-entry slice is contiguous; see the planar kernels in metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels, fe
from .fe import Basis1D, EvalMatrices, OpCounter, build_eval_matrices, gauss_legendre_1d
from .mesh import Mesh
from .metrics import (MetricId, TargetData, TargetSpec, build_targets,
                      check_metric_dim, metric_second_derivative)

__all__ = [
    "InvalidMeshError",
    "LimitingConfig",
    "ObjectiveConfig",
    "HessQData",
    "TmopProblem",
    "fa_csr_nnz",
    "fa_csr_bytes",
]

FA_NNZ_GUARD = 1_000_000


class InvalidMeshError(RuntimeError):
    """Nonpositive Jacobian determinant at a quadrature point."""

    def __init__(self, element: int, point: int, value: float):
        self.element = element
        self.point = point
        self.value = value
        super().__init__(
            f"nonpositive det(A) = {value:.3e} in element {element}, "
            f"quadrature point {point}")


@dataclass
class LimitingConfig:
    """Penalty |x - x0|^2 / delta^2 on node displacements.

    ``delta`` is a positive scalar or a per-node array; nodal values are
    interpolated to quadrature points.  ``weight`` scales the whole term.
    """

    reference: np.ndarray
    delta: float | np.ndarray = 1.0
    weight: float = 1.0

    def validate(self, n_dofs: int) -> None:
        if self.reference.shape != (n_dofs,):
            raise ValueError(
                f"limiting reference has shape {self.reference.shape}, expected ({n_dofs},)")
        if np.any(np.asarray(self.delta) <= 0):
            raise ValueError("limiting delta must be positive everywhere")
        if self.weight <= 0:
            raise ValueError(f"limiting weight must be positive, got {self.weight}")


@dataclass
class ObjectiveConfig:
    metric: MetricId
    target: TargetSpec
    spatial_weight: float = 1.0
    limiting: LimitingConfig | None = None

    def validate(self) -> None:
        if self.spatial_weight <= 0:
            raise ValueError(f"spatial weight must be positive, got {self.spatial_weight}")


@dataclass
class HessQData:
    """Per-element, per-point Hessian blocks in structured factored form.

    With constant isotropic targets, the (d^2 x d^2) block at a quadrature
    point is exactly

        c_id I + c_ts (S (x) T + T (x) S) + c_ss S (x) S + c_x S_mp S_on

    with S the inverse transpose of T, so storing the four scaled
    coefficients plus S and T (4 + 2 d^2 floats) represents the block
    without loss; ``block`` reconstructs the full matrix on demand.  The
    blocks are pair-swap symmetric by construction.

    Arrays are planar: coeffs (4, n_points_total), s/t (d, d, n_points_total)
    with points ordered element-major.
    """

    coeffs: np.ndarray
    s_mat: np.ndarray
    t_mat: np.ndarray
    dim: int
    n_quad_total: int

    @property
    def nbytes(self) -> int:
        return self.coeffs.nbytes + self.s_mat.nbytes + self.t_mat.nbytes

    @property
    def n_elements(self) -> int:
        return self.coeffs.shape[1] // self.n_quad_total

    @property
    def bytes_per_element(self) -> int:
        return self.nbytes // self.n_elements

    def block(self, element: int, point: int) -> np.ndarray:
        d = self.dim
        k = element * self.n_quad_total + point
        c_id, c_ts, c_ss, c_x = self.coeffs[:, k]
        sv = self.s_mat[:, :, k].ravel()
        tv = self.t_mat[:, :, k].ravel()
        full = c_id * np.eye(d * d)
        full += c_ts * (np.outer(sv, tv) + np.outer(tv, sv))
        full += c_ss * np.outer(sv, sv)
        s = self.s_mat[:, :, k]
        full += c_x * np.einsum("mp,on->mnop", s, s).reshape(d * d, d * d)
        return full


def reference_tables(em: EvalMatrices, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense basis tables at quadrature points for the naive (FA) route.

    Returns (values (Q, Np), gradients (Q, Np, dim)); flat quadrature and
    dof indices both have direction 1 fastest.
    """
    n_q, n_i = em.b.shape
    q_tot, np_tot = n_q ** dim, n_i ** dim

    def table(direction: int | None) -> np.ndarray:
        mats = [em.g if direction == d_ else em.b for d_ in range(dim)]
        if dim == 2:
            full = np.einsum("ai,bj->abij", mats[1], mats[0])
        else:
            full = np.einsum("ai,bj,ck->abcijk", mats[2], mats[1], mats[0])
        return full.reshape(q_tot, np_tot)

    vals = table(None)
    grads = np.stack([table(d_) for d_ in range(dim)], axis=-1)
    return vals, grads


def _neighbor_ranges(n_elements: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Per lattice index: count of 1D neighbor nodes and how many of them
    are endpoint (constrained-candidate) nodes."""
    n_nodes = n_elements * order + 1
    idx = np.arange(n_nodes)
    e_lo = np.maximum(0, (idx - 1) // order)
    e_hi = np.minimum(n_elements - 1, idx // order)
    lo = e_lo * order
    hi = e_hi * order + order
    counts = hi - lo + 1
    endpoints = (lo == 0).astype(np.int64) + (hi == n_nodes - 1).astype(np.int64)
    return counts, endpoints


def fa_csr_nnz(mesh: Mesh) -> int:
    """Exact stored-entry count of the FA matrix, without assembling it.

    Matches :meth:`TmopProblem.fa_assemble`: entries exist for every pair of
    dofs sharing an element with both sides unconstrained, plus one unit
    diagonal entry per constrained dof.
    """
    d = mesh.dim
    axis_counts, axis_fixed = [], []
    for a in range(d):
        c, f = _neighbor_ranges(mesh.element_counts[a], mesh.order)
        axis_counts.append(c.astype(float))
        axis_fixed.append(f.astype(float))

    # total neighbor-node count per lattice node, as a dim-D grid
    total = axis_counts[0]
    for a in range(1, d):
        total = np.multiply.outer(total, axis_counts[a])
    # per column-component b: how many neighbors are constrained for b
    row_cols = d * total.copy()
    for b in range(d):
        fb = [axis_fixed[b] if a == b else axis_counts[a] for a in range(d)]
        grid = fb[0]
        for a in range(1, d):
            grid = np.multiply.outer(grid, fb[a])
        row_cols -= grid

    nnz = 0
    for a in range(d):
        interior = [slice(None)] * d
        interior[a] = slice(1, -1)
        n_fixed = mesh.n_nodes - np.prod(
            [mesh.nodes_per_axis[m] - (2 if m == a else 0) for m in range(d)])
        nnz += int(round(row_cols[tuple(interior)].sum())) + int(n_fixed)
    return nnz


def fa_csr_bytes(mesh: Mesh) -> int:
    """Bytes of the FA CSR matrix (float64 data, int32 indices/indptr)."""
    nnz = fa_csr_nnz(mesh)
    return nnz * (8 + 4) + (mesh.n_dofs + 1) * 4


class TmopProblem:
    """Bundles a mesh, an objective configuration, and a quadrature rule,
    and evaluates F, its gradient, and its Hessian in PA or FA form.

    ``counter``, when given, accumulates multiply-add counts of the tensor
    contraction and quadrature-block kernels.  Element loops are processed
    in batches of roughly ``batch_quad_points`` quadrature points to bound
    temporary memory; results do not depend on the batch size.
    """

    def __init__(self, mesh: Mesh, config: ObjectiveConfig, n_quad: int,
                 counter: OpCounter | None = None,
                 batch_quad_points: int = 2_000_000):
        config.validate()
        check_metric_dim(config.metric, mesh.dim)
        self.mesh = mesh
        self.config = config
        self.basis = Basis1D.gauss_lobatto(mesh.order)
        self.rule = gauss_legendre_1d(n_quad)
        self.em = build_eval_matrices(self.basis, self.rule)
        self.wq = fe.tensor_weights(self.rule, mesh.dim)
        self.targets: TargetData = build_targets(mesh, config.target, self.rule)
        self.counter = counter

        d = mesh.dim
        self.n_quad_total = n_quad ** d
        self._qshape = (n_quad,) * d
        self.batch_elements = max(1, batch_quad_points // self.n_quad_total)

        if config.limiting is not None:
            config.limiting.validate(mesh.n_dofs)

    # -- helpers -----------------------------------------------------------

    def _batches(self):
        ne = self.mesh.n_elements
        for lo in range(0, ne, self.batch_elements):
            yield lo, min(lo + self.batch_elements, ne)

    def _x2(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float).reshape(self.mesh.dim, self.mesh.n_nodes)

    def _jacobians(self, x2: np.ndarray, lo: int, hi: int) -> np.ndarray:
        """Planar Jacobians (d, d, ne, Q) for the element batch."""
        return fe.jacobians_planar(x2, self.mesh.restriction[lo:hi], self.em,
                                   self.mesh.dim, self.mesh.order, self.counter)

    def _check_dets(self, dets: np.ndarray, lo: int) -> None:
        """``dets`` is the flat (ne * Q,) batch of det(A) values."""
        worst = int(np.argmin(dets))
        if dets[worst] <= 0.0:
            e_loc, q = divmod(worst, self.n_quad_total)
            raise InvalidMeshError(lo + e_loc, q, float(dets[worst]))

    def _grad_mats(self, direction: int) -> list[np.ndarray]:
        return fe.gradient_mats(self.em, self.mesh.dim, direction)

    def _scatter(self, out_comp: np.ndarray, lo: int, hi: int, econtrib: np.ndarray) -> None:
        np.add.at(out_comp, self.mesh.restriction[lo:hi].ravel(), econtrib.ravel())

    def _pull_back(self, yq: np.ndarray, out: np.ndarray, lo: int, hi: int) -> None:
        """Transpose-contract planar per-point matrices yq (d, d, ne, Q) to
        element dofs and scatter-add into ``out`` (d, n_nodes); all components
        are contracted together, one call per reference direction."""
        d = self.mesh.dim
        ne = hi - lo
        acc = None
        for n_dir in range(d):
            zn = yq[:, n_dir].reshape((d, ne) + self._qshape)
            part = fe.contract_quad_to_dofs(zn, self._grad_mats(n_dir), self.counter)
            acc = part if acc is None else acc + part
        for a in range(d):
            self._scatter(out[a], lo, hi, acc[a])

    # -- objective and gradient --------------------------------------------

    def min_det_jacobian(self, x: np.ndarray) -> float:
        x2 = self._x2(x)
        best = np.inf
        for lo, hi in self._batches():
            jac = self._jacobians_flat(x2, lo, hi)
            dets = np.empty(jac.shape[2])
            _kernels.dets_kernel(jac, dets)
            best = min(best, float(dets.min()))
        return best

    def _jacobians_flat(self, x2: np.ndarray, lo: int, hi: int) -> np.ndarray:
        jac = self._jacobians(x2, lo, hi)
        d = self.mesh.dim
        return jac.reshape(d, d, (hi - lo) * self.n_quad_total)

    def objective(self, x: np.ndarray) -> float:
        """F(x); raises InvalidMeshError at the first nonpositive det(A)."""
        x2 = self._x2(x)
        coef = self.config.spatial_weight * self.targets.det_w
        total = 0.0
        for lo, hi in self._batches():
            jac = self._jacobians_flat(x2, lo, hi)
            mu = np.empty(jac.shape[2])
            dets = np.empty(jac.shape[2])
            _kernels.value_kernel(int(self.config.metric), jac,
                                  self.targets.inv_scale, mu, dets)
            self._check_dets(dets, lo)
            total += coef * float(np.einsum("eq,q->", mu.reshape(hi - lo, -1), self.wq))
        if self.config.limiting is not None:
            total += self.limiting_value(x)
        return total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x2 = self._x2(x)
        coef = self.config.spatial_weight * self.targets.det_w * self.targets.inv_scale
        out = np.zeros_like(x2)
        d = self.mesh.dim
        for lo, hi in self._batches():
            jac = self._jacobians_flat(x2, lo, hi)
            yq = np.empty_like(jac)
            dets = np.empty(jac.shape[2])
            _kernels.first_derivative_kernel(int(self.config.metric), jac,
                                             self.targets.inv_scale, coef,
                                             self.wq, yq, dets)
            self._check_dets(dets, lo)
            self._pull_back(yq.reshape(d, d, hi - lo, self.n_quad_total),
                            out, lo, hi)
        if self.config.limiting is not None:
            out += self._limiting_gradient_2d(x2)
        out[self.mesh.fixed_mask] = 0.0
        return out.ravel()

    # -- partially assembled Hessian ----------------------------------------

    def hessian_setup(self, x: np.ndarray) -> HessQData:
        """Precompute the factored quadrature blocks for the current positions."""
        x2 = self._x2(x)
        d = self.mesh.dim
        n_pts = self.mesh.n_elements * self.n_quad_total
        coeffs = np.empty((4, n_pts))
        s_mat = np.empty((d, d, n_pts))
        t_mat = np.empty((d, d, n_pts))
        coef = (self.config.spatial_weight * self.targets.det_w
                * self.targets.inv_scale ** 2)
        q_tot = self.n_quad_total
        for lo, hi in self._batches():
            jac = self._jacobians_flat(x2, lo, hi)
            sl = slice(lo * q_tot, hi * q_tot)
            dets = np.empty(jac.shape[2])
            _kernels.second_coeffs_kernel(int(self.config.metric), jac,
                                          self.targets.inv_scale, coef, self.wq,
                                          coeffs[:, sl], s_mat[:, :, sl],
                                          t_mat[:, :, sl], dets)
            self._check_dets(dets, lo)
        return HessQData(coeffs=coeffs, s_mat=s_mat, t_mat=t_mat, dim=d,
                         n_quad_total=q_tot)

    def _forward_gradients(self, vin2: np.ndarray, lo: int, hi: int) -> np.ndarray:
        """Planar quad-point derivative matrices of v: (d_comp, d_dir, ne, Q)."""
        d = self.mesh.dim
        ne = hi - lo
        etens = fe.dof_tensor(fe.e_gather(self.mesh.restriction[lo:hi], vin2),
                              d, self.mesh.order)
        g = np.empty((d, d, ne, self.n_quad_total))
        for p in range(d):
            q = fe.contract_dofs_to_quad(etens, self._grad_mats(p), self.counter)
            g[:, p] = q.reshape(d, ne, self.n_quad_total)
        return g

    def _block_multiply(self, qdata: HessQData, g: np.ndarray,
                        lo: int, hi: int) -> np.ndarray:
        """z[(a,n)] = sum_(b,p) H[(a,n),(b,p)] g[(b,p)] from the factored form."""
        d = self.mesh.dim
        ne = g.shape[2]
        q_tot = self.n_quad_total
        sl = slice(lo * q_tot, hi * q_tot)
        gp = g.reshape(d, d, ne * q_tot)
        z = np.empty_like(gp)
        _kernels.block_multiply_kernel(qdata.coeffs[:, sl], qdata.s_mat[:, :, sl],
                                       qdata.t_mat[:, :, sl], gp, z)
        if self.counter is not None:
            k = d * d
            self.counter.add(ne * q_tot * (6 * k + 2 * d * k))
        return z.reshape(d, d, ne, q_tot)

    def hessian_apply(self, qdata: HessQData, v: np.ndarray) -> np.ndarray:
        """Action of the Hessian frozen at the setup positions.

        Constrained input components are treated as zero; constrained output
        components return v's value (identity on the constrained subspace).
        Safe for concurrent calls with distinct vectors: qdata is read-only.
        """
        v2 = self._x2(v)
        vin = np.where(self.mesh.fixed_mask, 0.0, v2)
        out = np.zeros_like(v2)
        for lo, hi in self._batches():
            g = self._forward_gradients(vin, lo, hi)
            z = self._block_multiply(qdata, g, lo, hi)
            self._pull_back(z, out, lo, hi)
        if self.config.limiting is not None:
            out += self._limiting_hessian_apply_2d(vin)
        out[self.mesh.fixed_mask] = v2[self.mesh.fixed_mask]
        return out.ravel()

    def hessian_diagonal(self, qdata: HessQData) -> np.ndarray:
        """Exact diagonal of the PA operator, including unit entries for
        constrained dofs."""
        d = self.mesh.dim
        em = self.em
        q_tot = self.n_quad_total
        out = np.zeros((d, self.mesh.n_nodes))
        for lo, hi in self._batches():
            ne = hi - lo
            sl = slice(lo * q_tot, hi * q_tot)
            c = qdata.coeffs[:, sl]
            s = qdata.s_mat[:, :, sl]
            t = qdata.t_mat[:, :, sl]
            acc = None
            for n_dir in range(d):
                for p_dir in range(d):
                    # H[(a,n),(a,p)] from the factored form, all components a
                    sn, sp_ = s[:, n_dir], s[:, p_dir]
                    tn, tp = t[:, n_dir], t[:, p_dir]
                    hvals = c[1] * (sn * tp + tn * sp_) + (c[2] + c[3]) * sn * sp_
                    if n_dir == p_dir:
                        hvals = hvals + c[0]
                    mats = []
                    for m in range(d):
                        m1 = em.g if m == n_dir else em.b
                        m2 = em.g if m == p_dir else em.b
                        mats.append(m1 * m2)
                    hv = hvals.reshape((d, ne) + self._qshape)
                    part = fe.contract_quad_to_dofs(hv, mats, self.counter)
                    acc = part if acc is None else acc + part
            for a in range(d):
                self._scatter(out[a], lo, hi, acc[a])
            if self.config.limiting is not None:
                cq = self._limiting_point_scale(lo, hi)
                part = fe.contract_quad_to_dofs(cq.reshape((ne,) + self._qshape),
                                                [em.b * em.b] * d, self.counter)
                for a in range(d):
                    self._scatter(out[a], lo, hi, part)
        out[self.mesh.fixed_mask] = 1.0
        return out.ravel()

    # -- displacement limiting ----------------------------------------------

    def _limiting_delta_q(self, lo: int, hi: int) -> np.ndarray | float:
        lim = self.config.limiting
        if np.ndim(lim.delta) == 0:
            return float(lim.delta)
        nodal = np.asarray(lim.delta, dtype=float)
        etens = fe.dof_tensor(fe.e_gather(self.mesh.restriction[lo:hi], nodal),
                              self.mesh.dim, self.mesh.order)
        dq = fe.contract_dofs_to_quad(etens, [self.em.b] * self.mesh.dim, self.counter)
        return dq.reshape(hi - lo, self.n_quad_total)

    def _limiting_point_scale(self, lo: int, hi: int) -> np.ndarray:
        """c_q = 2 * weight * w_q * det(W) / delta_q^2, shape (ne, Q)."""
        lim = self.config.limiting
        delta_q = self._limiting_delta_q(lo, hi)
        base = 2.0 * lim.weight * self.targets.det_w * self.wq[None, :]
        return base / np.square(delta_q) * np.ones((hi - lo, 1))

    def _limiting_disp_q(self, x2: np.ndarray, lo: int, hi: int) -> np.ndarray:
        lim = self.config.limiting
        disp = x2 - lim.reference.reshape(x2.shape)
        etens = fe.dof_tensor(fe.e_gather(self.mesh.restriction[lo:hi], disp),
                              self.mesh.dim, self.mesh.order)
        q = fe.contract_dofs_to_quad(etens, [self.em.b] * self.mesh.dim, self.counter)
        return q.reshape(self.mesh.dim, hi - lo, self.n_quad_total)

    def limiting_value(self, x: np.ndarray) -> float:
        x2 = self._x2(x)
        total = 0.0
        for lo, hi in self._batches():
            dq = self._limiting_disp_q(x2, lo, hi)
            cq = self._limiting_point_scale(lo, hi)
            total += 0.5 * float(np.sum(cq[None] * dq * dq))
        return total

    def _limiting_gradient_2d(self, x2: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x2)
        d = self.mesh.dim
        for lo, hi in self._batches():
            ne = hi - lo
            dq = self._limiting_disp_q(x2, lo, hi)
            cq = self._limiting_point_scale(lo, hi)
            part = fe.contract_quad_to_dofs(
                (cq[None] * dq).reshape((d, ne) + self._qshape),
                [self.em.b] * d, self.counter)
            for a in range(d):
                self._scatter(out[a], lo, hi, part[a])
        return out

    def limiting_gradient(self, x: np.ndarray) -> np.ndarray:
        return self._limiting_gradient_2d(self._x2(x)).ravel()

    def _limiting_hessian_apply_2d(self, vin2: np.ndarray) -> np.ndarray:
        out = np.zeros_like(vin2)
        d = self.mesh.dim
        for lo, hi in self._batches():
            ne = hi - lo
            etens = fe.dof_tensor(fe.e_gather(self.mesh.restriction[lo:hi], vin2),
                                  d, self.mesh.order)
            cq = self._limiting_point_scale(lo, hi)
            vq = fe.contract_dofs_to_quad(etens, [self.em.b] * d, self.counter)
            vq = vq.reshape(d, ne, self.n_quad_total)
            part = fe.contract_quad_to_dofs(
                (cq[None] * vq).reshape((d, ne) + self._qshape),
                [self.em.b] * d, self.counter)
            for a in range(d):
                self._scatter(out[a], lo, hi, part[a])
        return out

    def limiting_hessian_apply(self, v: np.ndarray) -> np.ndarray:
        v2 = self._x2(v)
        return self._limiting_hessian_apply_2d(v2).ravel()

    # -- full assembly reference ----------------------------------------------

    def fa_assemble(self, x: np.ndarray) -> sp.csr_matrix:
        """Reference sparse Hessian built with dense per-point basis tables
        (no sum factorization); constrained rows/columns are replaced by
        identity.  Guarded to small problems."""
        nnz_pred = fa_csr_nnz(self.mesh)
        if nnz_pred > FA_NNZ_GUARD:
            raise ValueError(
                f"full assembly would store {nnz_pred} entries "
                f"(> {FA_NNZ_GUARD}); the FA route is a small-problem reference")
        x2 = self._x2(x)
        mesh = self.mesh
        d, n_p = mesh.dim, (mesh.order + 1) ** mesh.dim
        vals, grads = reference_tables(self.em, d)
        coef = (self.config.spatial_weight * self.targets.det_w
                * self.targets.inv_scale ** 2)
        lim = self.config.limiting

        n_block = d * n_p
        rows_l, cols_l = np.divmod(np.arange(n_block * n_block), n_block)
        data, rows, cols = [], [], []
        for e in range(mesh.n_elements):
            conn = mesh.restriction[e]
            xe = x2[:, conn]
            jac = np.einsum("qib,ai->qab", grads, xe)
            dets = np.linalg.det(jac)
            if np.any(dets <= 0.0):
                q = int(np.argmin(dets))
                raise InvalidMeshError(e, q, float(dets[q]))
            full = metric_second_derivative(self.config.metric,
                                            jac * self.targets.inv_scale)
            full = full.reshape(-1, d, d, d, d) * (coef * self.wq)[:, None, None, None, None]
            ke = np.einsum("qin,qanbp,qjp->aibj", grads, full, grads)
            ke = ke.reshape(n_block, n_block)
            if lim is not None:
                cq = np.asarray(self._limiting_point_scale(e, e + 1))[0]
                me = np.einsum("q,qi,qj->ij", cq, vals, vals)
                for a in range(d):
                    ke[a * n_p:(a + 1) * n_p, a * n_p:(a + 1) * n_p] += me
            fixed_local = mesh.fixed_mask[:, conn].ravel()
            keep = ~fixed_local[rows_l] & ~fixed_local[cols_l]
            gidx = (np.arange(d)[:, None] * mesh.n_nodes + conn[None, :]).ravel()
            data.append(ke.ravel()[keep])
            rows.append(gidx[rows_l[keep]])
            cols.append(gidx[cols_l[keep]])

        fixed_idx = np.nonzero(mesh.fixed_mask.ravel())[0]
        data.append(np.ones(len(fixed_idx)))
        rows.append(fixed_idx)
        cols.append(fixed_idx)
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()
        return mat
