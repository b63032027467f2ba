"""Fused per-quadrature-point kernels for the operator hot paths.

Each kernel streams planar (d, d, n_points) arrays once, с metric selected
by its integer id (2, 55, 303).  Point loops are independent, so parallel
execution is bitwise deterministic regardless of thread count.  fastmath is
left off to keep IEEE evaluation order.

These kernels mirror the numpy planar implementations in ``metrics``; the
test suite checks them against that route and against finite differences.
"""

import numba
import numpy as np

MU_2 = 2
MU_55 = 55
MU_303 = 303


@numba.njit(cache=True, parallel=True)
def dets_kernel(jac, out):
    d = jac.shape[0]
    for k in numba.prange(jac.shape[2]):
        if d == 2:
            out[k] = jac[0, 0, k] * jac[1, 1, k] - jac[0, 1, k] * jac[1, 0, k]
        else:
            out[k] = (jac[0, 0, k] * (jac[1, 1, k] * jac[2, 2, k]
                                      - jac[1, 2, k] * jac[2, 1, k])
                      - jac[0, 1, k] * (jac[1, 0, k] * jac[2, 2, k]
                                        - jac[1, 2, k] * jac[2, 0, k])
                      + jac[0, 2, k] * (jac[1, 0, k] * jac[2, 1, k]
                                        - jac[1, 1, k] * jac[2, 0, k]))


@numba.njit(cache=True, parallel=True)
def value_kernel(code, jac, inv_scale, mu, det_jac):
    """mu(T) with T = inv_scale * A; also returns det(A) for validity checks."""
    d = jac.shape[0]
    for k in numba.prange(jac.shape[2]):
        if d == 2:
            dj = jac[0, 0, k] * jac[1, 1, k] - jac[0, 1, k] * jac[1, 0, k]
            fro = (jac[0, 0, k] ** 2 + jac[0, 1, k] ** 2
                   + jac[1, 0, k] ** 2 + jac[1, 1, k] ** 2)
            tau = dj * inv_scale * inv_scale
        else:
            dj = (jac[0, 0, k] * (jac[1, 1, k] * jac[2, 2, k]
                                  - jac[1, 2, k] * jac[2, 1, k])
                  - jac[0, 1, k] * (jac[1, 0, k] * jac[2, 2, k]
                                    - jac[1, 2, k] * jac[2, 0, k])
                  + jac[0, 2, k] * (jac[1, 0, k] * jac[2, 1, k]
                                    - jac[1, 1, k] * jac[2, 0, k]))
            fro = 0.0
            for i in range(3):
                for j in range(3):
                    fro += jac[i, j, k] ** 2
            tau = dj * inv_scale ** 3
        det_jac[k] = dj
        fro *= inv_scale * inv_scale
        if code == MU_2:
            mu[k] = fro / (2.0 * tau) - 1.0
        elif code == MU_55:
            mu[k] = (tau - 1.0) ** 2
        else:
            mu[k] = fro / (3.0 * np.cbrt(tau * tau)) - 1.0


@numba.njit(cache=True, parallel=True)
def first_derivative_kernel(code, jac, inv_scale, coef, wq, y, det_jac):
    """y = coef * w_q * d(mu)/dT evaluated at T = inv_scale * A.

    d(mu)/dT = a_t T + a_s S with S = cof(T) / det(T); the quadrature index
    is the point index modulo len(wq).
    """
    d = jac.shape[0]
    n_q = wq.shape[0]
    for k in numba.prange(jac.shape[2]):
        if d == 2:
            dj = jac[0, 0, k] * jac[1, 1, k] - jac[0, 1, k] * jac[1, 0, k]
            fro = (jac[0, 0, k] ** 2 + jac[0, 1, k] ** 2
                   + jac[1, 0, k] ** 2 + jac[1, 1, k] ** 2)
        else:
            dj = (jac[0, 0, k] * (jac[1, 1, k] * jac[2, 2, k]
                                  - jac[1, 2, k] * jac[2, 1, k])
                  - jac[0, 1, k] * (jac[1, 0, k] * jac[2, 2, k]
                                    - jac[1, 2, k] * jac[2, 0, k])
                  + jac[0, 2, k] * (jac[1, 0, k] * jac[2, 1, k]
                                    - jac[1, 1, k] * jac[2, 0, k]))
            fro = 0.0
            for i in range(3):
                for j in range(3):
                    fro += jac[i, j, k] ** 2
        det_jac[k] = dj
        tau = dj * inv_scale ** d
        fro *= inv_scale * inv_scale
        if code == MU_2:
            a_t = 1.0 / tau
            a_s = -fro / (2.0 * tau)
        elif code == MU_55:
            a_t = 0.0
            a_s = 2.0 * tau * (tau - 1.0)
        else:
            r = 1.0 / np.cbrt(tau * tau)
            a_t = (2.0 / 3.0) * r
            a_s = -(2.0 / 9.0) * fro * r
        cw = coef * wq[k % n_q]
        # T = inv_scale * A; S = cof(T)/tau with cof(T) = inv_scale^(d-1) cof(A)
        ct = cw * a_t * inv_scale
        cs = cw * a_s * inv_scale ** (d - 1) / tau
        if d == 2:
            y[0, 0, k] = ct * jac[0, 0, k] + cs * jac[1, 1, k]
            y[0, 1, k] = ct * jac[0, 1, k] - cs * jac[1, 0, k]
            y[1, 0, k] = ct * jac[1, 0, k] - cs * jac[0, 1, k]
            y[1, 1, k] = ct * jac[1, 1, k] + cs * jac[0, 0, k]
        else:
            y[0, 0, k] = ct * jac[0, 0, k] + cs * (jac[1, 1, k] * jac[2, 2, k]
                                                   - jac[1, 2, k] * jac[2, 1, k])
            y[0, 1, k] = ct * jac[0, 1, k] + cs * (jac[1, 2, k] * jac[2, 0, k]
                                                   - jac[1, 0, k] * jac[2, 2, k])
            y[0, 2, k] = ct * jac[0, 2, k] + cs * (jac[1, 0, k] * jac[2, 1, k]
                                                   - jac[1, 1, k] * jac[2, 0, k])
            y[1, 0, k] = ct * jac[1, 0, k] + cs * (jac[0, 2, k] * jac[2, 1, k]
                                                   - jac[0, 1, k] * jac[2, 2, k])
            y[1, 1, k] = ct * jac[1, 1, k] + cs * (jac[0, 0, k] * jac[2, 2, k]
                                                   - jac[0, 2, k] * jac[2, 0, k])
            y[1, 2, k] = ct * jac[1, 2, k] + cs * (jac[0, 1, k] * jac[2, 0, k]
                                                   - jac[0, 0, k] * jac[2, 1, k])
            y[2, 0, k] = ct * jac[2, 0, k] + cs * (jac[0, 1, k] * jac[1, 2, k]
                                                   - jac[0, 2, k] * jac[1, 1, k])
            y[2, 1, k] = ct * jac[2, 1, k] + cs * (jac[0, 2, k] * jac[1, 0, k]
                                                   - jac[0, 0, k] * jac[1, 2, k])
            y[2, 2, k] = ct * jac[2, 2, k] + cs * (jac[0, 0, k] * jac[1, 1, k]
                                                   - jac[0, 1, k] * jac[1, 0, k])


@numba.njit(cache=True, parallel=True)
def second_coeffs_kernel(code, jac, inv_scale, coef, wq, c_out, s_out, t_out,
                         det_jac):
    """Factored Hessian data: template coefficients scaled by coef * w_q,
    plus S and T themselves; also returns det(A)."""
    d = jac.shape[0]
    n_q = wq.shape[0]
    for k in numba.prange(jac.shape[2]):
        if d == 2:
            dj = jac[0, 0, k] * jac[1, 1, k] - jac[0, 1, k] * jac[1, 0, k]
            fro = (jac[0, 0, k] ** 2 + jac[0, 1, k] ** 2
                   + jac[1, 0, k] ** 2 + jac[1, 1, k] ** 2)
        else:
            dj = (jac[0, 0, k] * (jac[1, 1, k] * jac[2, 2, k]
                                  - jac[1, 2, k] * jac[2, 1, k])
                  - jac[0, 1, k] * (jac[1, 0, k] * jac[2, 2, k]
                                    - jac[1, 2, k] * jac[2, 0, k])
                  + jac[0, 2, k] * (jac[1, 0, k] * jac[2, 1, k]
                                    - jac[1, 1, k] * jac[2, 0, k]))
            fro = 0.0
            for i in range(3):
                for j in range(3):
                    fro += jac[i, j, k] ** 2
        det_jac[k] = dj
        tau = dj * inv_scale ** d
        fro *= inv_scale * inv_scale
        if code == MU_2:
            half = fro / (2.0 * tau)
            c0 = 1.0 / tau
            c1 = -1.0 / tau
            c2 = half
            c3 = half
        elif code == MU_55:
            c0 = 0.0
            c1 = 0.0
            c2 = 2.0 * tau * (2.0 * tau - 1.0)
            c3 = -2.0 * tau * (tau - 1.0)
        else:
            r = 1.0 / np.cbrt(tau * tau)
            c0 = (2.0 / 3.0) * r
            c1 = -(4.0 / 9.0) * r
            c2 = (4.0 / 27.0) * fro * r
            c3 = (2.0 / 9.0) * fro * r
        sw = coef * wq[k % n_q]
        c_out[0, k] = sw * c0
        c_out[1, k] = sw * c1
        c_out[2, k] = sw * c2
        c_out[3, k] = sw * c3
        # T = inv_scale * A and S = cof(A) * inv_scale^(d-1) / tau
        cs = inv_scale ** (d - 1) / tau
        if d == 2:
            t_out[0, 0, k] = inv_scale * jac[0, 0, k]
            t_out[0, 1, k] = inv_scale * jac[0, 1, k]
            t_out[1, 0, k] = inv_scale * jac[1, 0, k]
            t_out[1, 1, k] = inv_scale * jac[1, 1, k]
            s_out[0, 0, k] = cs * jac[1, 1, k]
            s_out[0, 1, k] = -cs * jac[1, 0, k]
            s_out[1, 0, k] = -cs * jac[0, 1, k]
            s_out[1, 1, k] = cs * jac[0, 0, k]
        else:
            for i in range(3):
                for j in range(3):
                    t_out[i, j, k] = inv_scale * jac[i, j, k]
            s_out[0, 0, k] = cs * (jac[1, 1, k] * jac[2, 2, k]
                                   - jac[1, 2, k] * jac[2, 1, k])
            s_out[0, 1, k] = cs * (jac[1, 2, k] * jac[2, 0, k]
                                   - jac[1, 0, k] * jac[2, 2, k])
            s_out[0, 2, k] = cs * (jac[1, 0, k] * jac[2, 1, k]
                                   - jac[1, 1, k] * jac[2, 0, k])
            s_out[1, 0, k] = cs * (jac[0, 2, k] * jac[2, 1, k]
                                   - jac[0, 1, k] * jac[2, 2, k])
            s_out[1, 1, k] = cs * (jac[0, 0, k] * jac[2, 2, k]
                                   - jac[0, 2, k] * jac[2, 0, k])
            s_out[1, 2, k] = cs * (jac[0, 1, k] * jac[2, 0, k]
                                   - jac[0, 0, k] * jac[2, 1, k])
            s_out[2, 0, k] = cs * (jac[0, 1, k] * jac[1, 2, k]
                                   - jac[0, 2, k] * jac[1, 1, k])
            s_out[2, 1, k] = cs * (jac[0, 2, k] * jac[1, 0, k]
                                   - jac[0, 0, k] * jac[1, 2, k])
            s_out[2, 2, k] = cs * (jac[0, 0, k] * jac[1, 1, k]
                                   - jac[0, 1, k] * jac[1, 0, k])


@numba.njit(cache=True, parallel=True)
def diag_hvals_kernel(c, s, t, out):
    """Diagonal component blocks H[(a,n),(a,p)] of the factored form:
    out[a, n, p, k] for all components and direction pairs."""
    d = s.shape[0]
    for k in numba.prange(s.shape[2]):
        for a in range(d):
            for n in range(d):
                for p in range(d):
                    v = (c[1, k] * (s[a, n, k] * t[a, p, k]
                                    + t[a, n, k] * s[a, p, k])
                         + (c[2, k] + c[3, k]) * s[a, n, k] * s[a, p, k])
                    if n == p:
                        v += c[0, k]
                    out[a, n, p, k] = v


@numba.njit(cache=True, parallel=True)
def block_multiply_kernel(c, s, t, g, z):
    """z = H g per point from the factored block
    H = c0 I + c1 (S (x) T + T (x) S) + c2 S (x) S + c3 S_mp S_on."""
    d = s.shape[0]
    for k in numba.prange(s.shape[2]):
        dt = 0.0
        ds = 0.0
        for i in range(d):
            for j in range(d):
                dt += t[i, j, k] * g[i, j, k]
                ds += s[i, j, k] * g[i, j, k]
        w1 = c[1, k] * dt + c[2, k] * ds
        w2 = c[1, k] * ds
        for a in range(d):
            for n in range(d):
                cross = 0.0
                for p in range(d):
                    gs = 0.0
                    for o in range(d):
                        gs += g[o, p, k] * s[o, n, k]
                    cross += s[a, p, k] * gs
                z[a, n, k] = (c[0, k] * g[a, n, k] + w1 * s[a, n, k]
                              + w2 * t[a, n, k] + c[3, k] * cross)
