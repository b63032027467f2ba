"""Mesh quality metrics with analytic first and second derivatives, and
target-matrix construction.

All metric functions are vectorized: ``T`` may have shape ``(d, d)`` or any
batch shape ``(..., d, d)`` with a positive determinant everywhere.

The three metrics share one algebraic skeleton.  With S the inverse
transpose of T, the first derivative is ``a_t T + a_s S`` and the second
derivative is

    c_id I  +  c_ts (S (x) T + T (x) S)  +  c_ss S (x) S  +  c_x S_mp S_on,

for metric-specific scalar coefficients; only the coefficients differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .fe import (Basis1D, QuadRule1D, build_eval_matrices, jacobians_at_quad,
                 tensor_weights)

__all__ = [
    "MetricId",
    "MetricEval",
    "TargetKind",
    "TargetSpec",
    "TargetData",
    "metric_dim",
    "metric_value",
    "metric_first_derivative",
    "metric_second_derivative",
    "evaluate",
    "build_targets",
]


class MetricId(IntEnum):
    MU_2 = 2      # 2D shape
    MU_55 = 55    # size, any dimension
    MU_303 = 303  # 3D shape


def metric_dim(metric: MetricId) -> int | None:
    """Required space dimension, or None if the metric works in 2D and 3D."""
    return {MetricId.MU_2: 2, MetricId.MU_55: None, MetricId.MU_303: 3}[MetricId(metric)]


def check_metric_dim(metric: MetricId, dim: int) -> None:
    need = metric_dim(metric)
    if need is not None and need != dim:
        raise ValueError(f"{MetricId(metric).name} requires dim={need}, got dim={dim}")


# -- planar kernels ----------------------------------------------------------
# Operator code stores point matrices as (d, d, ...) with the large point
# axis last, so every [i, j] slice is one contiguous vector.  The planar
# functions below work on that layout; the public (..., d, d) API wraps them.


def frob2_planar(t: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,ij...->...", t, t)


def det_planar(t: np.ndarray) -> np.ndarray:
    d = t.shape[0]
    if d == 2:
        return t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]
    if d == 3:
        return (t[0, 0] * (t[1, 1] * t[2, 2] - t[1, 2] * t[2, 1])
                - t[0, 1] * (t[1, 0] * t[2, 2] - t[1, 2] * t[2, 0])
                + t[0, 2] * (t[1, 0] * t[2, 1] - t[1, 1] * t[2, 0]))
    raise ValueError(f"unsupported dimension {d}")


def _cofactor_planar(t: np.ndarray) -> np.ndarray:
    d = t.shape[0]
    out = np.empty_like(t)
    if d == 2:
        out[0, 0] = t[1, 1]
        out[0, 1] = -t[1, 0]
        out[1, 0] = -t[0, 1]
        out[1, 1] = t[0, 0]
        return out
    out[0, 0] = t[1, 1] * t[2, 2] - t[1, 2] * t[2, 1]
    out[0, 1] = t[1, 2] * t[2, 0] - t[1, 0] * t[2, 2]
    out[0, 2] = t[1, 0] * t[2, 1] - t[1, 1] * t[2, 0]
    out[1, 0] = t[0, 2] * t[2, 1] - t[0, 1] * t[2, 2]
    out[1, 1] = t[0, 0] * t[2, 2] - t[0, 2] * t[2, 0]
    out[1, 2] = t[0, 1] * t[2, 0] - t[0, 0] * t[2, 1]
    out[2, 0] = t[0, 1] * t[1, 2] - t[0, 2] * t[1, 1]
    out[2, 1] = t[0, 2] * t[1, 0] - t[0, 0] * t[1, 2]
    out[2, 2] = t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]
    return out


def inv_transpose_planar(t: np.ndarray, tau: np.ndarray) -> np.ndarray:
    return _cofactor_planar(t) / tau


def metric_value_planar(metric: MetricId, t: np.ndarray,
                        tau: np.ndarray | None = None) -> np.ndarray:
    metric = MetricId(metric)
    if tau is None:
        tau = det_planar(t)
    _check_tau(tau)
    if metric is MetricId.MU_2:
        return frob2_planar(t) / (2.0 * tau) - 1.0
    if metric is MetricId.MU_55:
        return (tau - 1.0) ** 2
    return frob2_planar(t) / (3.0 * np.cbrt(tau * tau)) - 1.0


def first_derivative_planar(metric: MetricId, t: np.ndarray,
                            tau: np.ndarray | None = None):
    """Returns (a_t, a_s, S) with d(mu)/dT = a_t T + a_s S, planar layout."""
    if tau is None:
        tau = det_planar(t)
    _check_tau(tau)
    a_t, a_s = _first_coeffs(metric, tau, frob2_planar(t))
    return a_t, a_s, inv_transpose_planar(t, tau)


def second_coeffs_planar(metric: MetricId, t: np.ndarray,
                         tau: np.ndarray | None = None):
    """Returns ((c_id, c_ts, c_ss, c_x), S) of the Hessian template, planar."""
    if tau is None:
        tau = det_planar(t)
    _check_tau(tau)
    return (_second_coeffs(metric, tau, frob2_planar(t)),
            inv_transpose_planar(t, tau))


def _to_planar(t: np.ndarray) -> np.ndarray:
    return np.moveaxis(t, (-2, -1), (0, 1))


def _from_planar(t: np.ndarray) -> np.ndarray:
    return np.moveaxis(t, (0, 1), (-2, -1))


def det(t: np.ndarray) -> np.ndarray:
    """Determinant of (..., d, d) matrices, d in {2, 3}, explicit formulas."""
    return det_planar(_to_planar(np.asarray(t)))


def inv_transpose(t: np.ndarray, tau: np.ndarray | None = None) -> np.ndarray:
    """Inverse transpose of (..., d, d) matrices: cofactor / det."""
    if tau is None:
        tau = det(t)
    return _from_planar(inv_transpose_planar(_to_planar(np.asarray(t)), tau))


def _frob2(t: np.ndarray) -> np.ndarray:
    return np.sum(t * t, axis=(-2, -1))


def _check_tau(tau: np.ndarray) -> None:
    if np.any(tau <= 0.0):
        raise ValueError("metric evaluated at a matrix with nonpositive determinant")


def _as_matrices(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim < 2 or t.shape[-1] != t.shape[-2] or t.shape[-1] not in (2, 3):
        raise ValueError(f"expected (..., d, d) with d in (2, 3), got shape {t.shape}")
    return t


def metric_value(metric: MetricId, t) -> np.ndarray | float:
    t = _as_matrices(t)
    check_metric_dim(metric, t.shape[-1])
    tau = det(t)
    _check_tau(tau)
    metric = MetricId(metric)
    if metric is MetricId.MU_2:
        out = _frob2(t) / (2.0 * tau) - 1.0
    elif metric is MetricId.MU_55:
        out = (tau - 1.0) ** 2
    else:
        out = _frob2(t) / (3.0 * np.cbrt(tau * tau)) - 1.0
    return out if out.ndim else float(out)


def _first_coeffs(metric: MetricId, tau, fro2):
    """Coefficients (a_t, a_s) of d(mu)/dT = a_t T + a_s S."""
    metric = MetricId(metric)
    if metric is MetricId.MU_2:
        return 1.0 / tau, -fro2 / (2.0 * tau)
    if metric is MetricId.MU_55:
        return np.zeros_like(tau), 2.0 * tau * (tau - 1.0)
    r = 1.0 / np.cbrt(tau * tau)
    return (2.0 / 3.0) * r, -(2.0 / 9.0) * fro2 * r


def _second_coeffs(metric: MetricId, tau, fro2):
    """Coefficients (c_id, c_ts, c_ss, c_x) of the shared Hessian template."""
    metric = MetricId(metric)
    zero = np.zeros_like(tau)
    if metric is MetricId.MU_2:
        half = fro2 / (2.0 * tau)
        return 1.0 / tau, -1.0 / tau, half, half
    if metric is MetricId.MU_55:
        return zero, zero, 2.0 * tau * (2.0 * tau - 1.0), -2.0 * tau * (tau - 1.0)
    r = 1.0 / np.cbrt(tau * tau)
    return ((2.0 / 3.0) * r, -(4.0 / 9.0) * r,
            (4.0 / 27.0) * fro2 * r, (2.0 / 9.0) * fro2 * r)


def metric_first_derivative(metric: MetricId, t) -> np.ndarray:
    t = _as_matrices(t)
    check_metric_dim(metric, t.shape[-1])
    tau = det(t)
    _check_tau(tau)
    s = inv_transpose(t, tau)
    a_t, a_s = _first_coeffs(metric, tau, _frob2(t))
    return a_t[..., None, None] * t + a_s[..., None, None] * s


def second_derivative_coefficients(metric: MetricId, t):
    """Coefficients (c_id, c_ts, c_ss, c_x) of the shared Hessian template
    together with S, the inverse transpose of T.

    The full (d^2 x d^2) Hessian block is
        c_id I + c_ts (S (x) T + T (x) S) + c_ss S (x) S + c_x S_mp S_on,
    which lets operator code store and apply the block in O(d^2) per point
    instead of O(d^4).
    """
    t = _as_matrices(t)
    check_metric_dim(metric, t.shape[-1])
    tau = det(t)
    _check_tau(tau)
    s = inv_transpose(t, tau)
    return _second_coeffs(metric, tau, _frob2(t)), s


def metric_second_derivative(metric: MetricId, t) -> np.ndarray:
    """Hessian of mu in T as (..., d*d, d*d), row index m*d + n, col o*d + p."""
    t = _as_matrices(t)
    d = t.shape[-1]
    check_metric_dim(metric, d)
    tau = det(t)
    _check_tau(tau)
    s = inv_transpose(t, tau)
    c_id, c_ts, c_ss, c_x = _second_coeffs(metric, tau, _frob2(t))

    k = d * d
    batch = t.shape[:-2]
    out = np.zeros(batch + (k, k))
    out[..., np.arange(k), np.arange(k)] = c_id[..., None]
    sv = s.reshape(batch + (k,))
    tv = t.reshape(batch + (k,))
    out += c_ts[..., None, None] * (sv[..., :, None] * tv[..., None, :]
                                    + tv[..., :, None] * sv[..., None, :])
    out += c_ss[..., None, None] * (sv[..., :, None] * sv[..., None, :])
    # cross pairing S_mp S_on at [(m,n), (o,p)]
    cross = np.einsum("...mp,...on->...mnop", s, s).reshape(batch + (k, k))
    out += c_x[..., None, None] * cross
    return out


@dataclass(frozen=True)
class MetricEval:
    value: float
    first: np.ndarray   # (d, d)
    second: np.ndarray  # (d*d, d*d)


def evaluate(metric: MetricId, t) -> MetricEval:
    """Convenience bundle for a single matrix."""
    t = _as_matrices(t)
    if t.ndim != 2:
        raise ValueError("evaluate() takes a single (d, d) matrix")
    return MetricEval(value=float(metric_value(metric, t)),
                      first=metric_first_derivative(metric, t),
                      second=metric_second_derivative(metric, t))


class TargetKind(IntEnum):
    IDEAL_UNIT = 0
    IDEAL_EQUAL_SIZE = 1


@dataclass(frozen=True)
class TargetSpec:
    kind: TargetKind
    h: float | None = None  # edge length for IDEAL_EQUAL_SIZE; derived if None


@dataclass(frozen=True)
class TargetData:
    """Constant isotropic target W = scale * I, shared by all quadrature points.

    Only isotropic constant targets are supported, so the per-point matrices
    collapse to one scalar; ``w_matrix``/``w_inv_matrix`` expand on demand.
    """

    dim: int
    scale: float

    @property
    def det_w(self) -> float:
        return self.scale ** self.dim

    @property
    def inv_scale(self) -> float:
        return 1.0 / self.scale

    def w_matrix(self) -> np.ndarray:
        return self.scale * np.eye(self.dim)

    def w_inv_matrix(self) -> np.ndarray:
        return self.inv_scale * np.eye(self.dim)


def mesh_volume(mesh, rule: QuadRule1D, coords: np.ndarray | None = None) -> float:
    """Volume of the mesh image computed by quadrature of det(A)."""
    basis = Basis1D.gauss_lobatto(mesh.order)
    em = build_eval_matrices(basis, rule)
    w = tensor_weights(rule, mesh.dim)
    x = mesh.coords if coords is None else coords.reshape(mesh.dim, mesh.n_nodes)
    total = 0.0
    for lo in range(0, mesh.n_elements, 4096):
        jac = jacobians_at_quad(x, mesh.restriction[lo:lo + 4096], em,
                                mesh.dim, mesh.order)
        total += float((det(jac) @ w).sum())
    return total


def build_targets(mesh, spec: TargetSpec, rule: QuadRule1D) -> TargetData:
    """Ideal targets: W = I, or W = h I with h the equal-size edge length
    derived from the quadrature volume of ``mesh`` when not given."""
    if spec.kind is TargetKind.IDEAL_UNIT:
        return TargetData(dim=mesh.dim, scale=1.0)
    if spec.h is not None:
        if spec.h <= 0:
            raise ValueError(f"target size h must be positive, got {spec.h}")
        return TargetData(dim=mesh.dim, scale=float(spec.h))
    vol = mesh_volume(mesh, rule)
    if vol <= 0:
        raise ValueError(f"mesh volume must be positive, got {vol}")
    return TargetData(dim=mesh.dim, scale=(vol / mesh.n_elements) ** (1.0 / mesh.dim))
