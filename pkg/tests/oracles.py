"""Independent reference implementations used to check the package.

Everything here is deliberately written without the package's sum
factorization or barycentric evaluation: Lagrange polynomials come from
polynomial root products, interpolation uses dense О(p^{2d}) loops, and
derivatives use central finite differences.
"""

from __future__ import annotations

import numpy as np


def lagrange_poly(nodes: np.ndarray, i: int) -> np.poly1d:
    others = np.delete(nodes, i)
    num = np.poly1d(np.poly(others))
    return num / num(nodes[i])


def dense_tables(nodes: np.ndarray, points: np.ndarray, dim: int):
    """Tensor-product basis values (Q, Np) and gradients (Q, Np, dim) at the
    given 1D points, built from per-axis polynomial evaluation.  Flat dof and
    quadrature indices have the direction-1 index fastest."""
    n = len(nodes)
    vals1 = np.empty((len(points), n))
    ders1 = np.empty((len(points), n))
    for i in range(n):
        poly = lagrange_poly(nodes, i)
        vals1[:, i] = poly(points)
        ders1[:, i] = poly.deriv()(points)

    n_q = len(points)
    q_tot, np_tot = n_q ** dim, n ** dim
    vals = np.empty((q_tot, np_tot))
    grads = np.empty((q_tot, np_tot, dim))
    for qf in range(q_tot):
        qidx = np.unravel_index(qf, (n_q,) * dim, order="F")
        for df in range(np_tot):
            didx = np.unravel_index(df, (n,) * dim, order="F")
            v = 1.0
            for m in range(dim):
                v *= vals1[qidx[m], didx[m]]
            vals[qf, df] = v
            for b in range(dim):
                g = 1.0
                for m in range(dim):
                    g *= ders1[qidx[m], didx[m]] if m == b else vals1[qidx[m], didx[m]]
                grads[qf, df, b] = g
    return vals, grads


def naive_interp(etensor_flat: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Per-element dense interpolation: out[e, q] = sum_i table[q, i] x[e, i]."""
    return etensor_flat @ table.T


def fa_gradient(problem, x: np.ndarray) -> np.ndarray:
    """Objective gradient via dense per-point tables (no sum factorization)."""
    from tmopbench.metrics import det, metric_first_derivative

    mesh = problem.mesh
    d = mesh.dim
    x2 = x.reshape(d, mesh.n_nodes)
    nodes = problem.basis.nodes
    _, grads = dense_tables(nodes, problem.rule.points, d)
    coef = (problem.config.spatial_weight * problem.targets.det_w
            * problem.targets.inv_scale)
    out = np.zeros((d, mesh.n_nodes))
    for e in range(mesh.n_elements):
        conn = mesh.restriction[e]
        xe = x2[:, conn]
        jac = np.einsum("qib,ai->qab", grads, xe)
        assert det(jac).min() > 0
        first = metric_first_derivative(problem.config.metric,
                                        jac * problem.targets.inv_scale)
        yq = coef * problem.wq[:, None, None] * first
        ge = np.einsum("qan,qin->ai", yq, grads)
        np.add.at(out, (slice(None), conn), ge)
    if problem.config.limiting is not None:
        out += problem.limiting_gradient(x).reshape(d, mesh.n_nodes)
    out[mesh.fixed_mask] = 0.0
    return out.ravel()


def quadrature_mass_matrix(nodes: np.ndarray, points: np.ndarray,
                           weights: np.ndarray, dim: int,
                           point_scale: np.ndarray | float = 1.0) -> np.ndarray:
    """M[i, j] = sum_q scale_q w_q l_i(chi_q) l_j(chi_q) on one reference
    element (tensor-product weights)."""
    vals, _ = dense_tables(nodes, points, dim)
    w1 = weights
    w = w1
    for _ in range(dim - 1):
        w = np.multiply.outer(w1, w).ravel()
    cq = w * point_scale
    return np.einsum("q,qi,qj->ij", cq, vals, vals)


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_valid_matrix(dim: int, rng: np.random.Generator,
                        det_range=(0.1, 10.0)) -> np.ndarray:
    """Random matrix with determinant in the given positive range."""
    for _ in range(100):
        t = rng.uniform(-1.5, 1.5, (dim, dim)) + np.eye(dim)
        d = np.linalg.det(t)
        if d <= 1e-3:
            continue
        target = rng.uniform(*det_range)
        return t * (target / d) ** (1.0 / dim)
    raise RuntimeError("failed to draw a valid matrix")


def perturbed_mesh_vector(mesh, rng: np.random.Generator,
                          amplitude: float) -> np.ndarray:
    """Mesh coordinates with seeded jitter on unconstrained components,
    scaled by the smallest node spacing (edge nodes of a high-order element
    sit much closer together than the element size)."""
    h = 1.0 / max(mesh.element_counts)
    gap = h / mesh.order**2
    x = mesh.dof_vector()
    jitter = amplitude * gap * rng.uniform(-1.0, 1.0, x.shape)
    jitter[mesh.fixed_mask.ravel()] = 0.0
    return x + jitter


def fd_gradient_matrix(fn, t: np.ndarray, step: float) -> np.ndarray:
    """Central finite differences of a scalar function of a matrix."""
    out = np.empty_like(t)
    for idx in np.ndindex(*t.shape):
        tp = t.copy()
        tm = t.copy()
        tp[idx] += step
        tm[idx] -= step
        out[idx] = (fn(tp) - fn(tm)) / (2.0 * step)
    return out


def fd_hessian_matrix(grad_fn, t: np.ndarray, step: float) -> np.ndarray:
    """Central finite differences of a matrix-valued gradient, flattened to
    (d*d, d*d) with row index m*d + n differentiating entry (m, n)."""
    d = t.shape[0]
    k = d * d
    out = np.empty((k, k))
    for m in range(d):
        for n in range(d):
            tp = t.copy()
            tm = t.copy()
            tp[m, n] += step
            tm[m, n] -= step
            diff = (grad_fn(tp) - grad_fn(tm)) / (2.0 * step)
            out[m * d + n] = diff.ravel()
    return out
