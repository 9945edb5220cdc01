# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for the Dyson Brownian Motion inner loops.

Same API as `_flow_py` (the pure-numpy fallback); see that module for the
step semantics. Pairwise sums exploit antisymmetry (one division per pair),
and inner loops are laid out for SIMD vectorization.
"""

import numpy as np

from libc.math cimport INFINITY, sqrt

BACKEND = "cython"

# ordered particles: sum_l 1/(x_k-x_l)^2 <= 2 sum_j (j min_gap)^-2 = (pi^2/3)/g^2
DEF GAP_SUM_BOUND = 3.2899


cdef double _min_gap(double[::1] x) noexcept:
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k
    cdef double g, best
    if n < 2:
        return INFINITY
    best = INFINITY
    for k in range(n - 1):
        g = x[k + 1] - x[k]
        if g < best:
            best = g
    return best


cdef bint _ordered(double[::1] x) noexcept:
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k
    for k in range(n - 1):
        if x[k + 1] - x[k] <= 0.0:
            return False
    return True


cdef void _drift_into(double[::1] x, double n_inv, double[::1] out,
                      double[::1] tmp) noexcept:
    # split accumulation so the inner loops vectorize
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, l
    cdef double xk, s
    for k in range(n):
        out[k] = 0.0
    for k in range(n):
        xk = x[k]
        for l in range(k + 1, n):
            tmp[l] = 1.0 / (xk - x[l])
        s = 0.0
        for l in range(k + 1, n):
            s += tmp[l]
            out[l] -= tmp[l]
        out[k] += s
    for k in range(n):
        out[k] = n_inv * out[k] - 0.5 * x[k]


cdef void _drift_rates_into(double[::1] x, double[::1] u, double[::1] v,
                            double n_inv, double[::1] out,
                            double[::1] ru, double[::1] rv,
                            double[::1] tmp, double[::1] tu,
                            double[::1] tv) noexcept:
    """Drift plus tangent-kernel rates (du_k/dt, dv_k/dt) in one pass: the
    kernel weights are the squared pair inverses, so one division per pair
    serves both."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, l
    cdef double xk, uk, vk, sd, sw, swu, swv
    for k in range(n):
        out[k] = 0.0
        ru[k] = 0.0
        rv[k] = 0.0
    for k in range(n):
        xk = x[k]
        uk = u[k]
        vk = v[k]
        for l in range(k + 1, n):
            tmp[l] = 1.0 / (xk - x[l])
        sd = 0.0
        for l in range(k + 1, n):
            sd += tmp[l]
            out[l] -= tmp[l]
        out[k] += sd
        for l in range(k + 1, n):
            tmp[l] = tmp[l] * tmp[l]
            tu[l] = tmp[l] * u[l]
            tv[l] = tmp[l] * v[l]
        sw = 0.0
        swu = 0.0
        swv = 0.0
        for l in range(k + 1, n):
            sw += tmp[l]
            swu += tu[l]
            swv += tv[l]
            ru[l] += uk * tmp[l] - tu[l]
            rv[l] += vk * tmp[l] - tv[l]
        ru[k] += swu - uk * sw
        rv[k] += swv - vk * sw
    for k in range(n):
        out[k] = n_inv * out[k] - 0.5 * x[k]
        ru[k] *= n_inv
        rv[k] *= n_inv


cdef double _kernel_coef(double[::1] x, double n_inv, double dt) noexcept:
    """Largest diagonal Euler coefficient; cheap ordered-gap bound first,
    exact row sums only when the bound is inconclusive."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, l
    cdef double g, bound, c, w, coef_max
    g = _min_gap(x)
    if g == INFINITY:
        return 0.0
    bound = dt * n_inv * (GAP_SUM_BOUND / (g * g))
    if bound <= 1.0:
        return bound
    coef_max = 0.0
    for k in range(n):
        c = 0.0
        for l in range(n):
            if l != k:
                w = x[k] - x[l]
                c += 1.0 / (w * w)
        c *= dt * n_inv
        if c > coef_max:
            coef_max = c
    return coef_max


def em_block(double[::1] x, double t, double t_target, double[:, ::1] xi,
             double beta, double c_dt, double dt_max, int max_halve, dts,
             double[::1] x2=None, double[::1] u=None, double[::1] v=None):
    cdef Py_ssize_t n = x.shape[0]
    cdef double n_inv = 1.0 / n
    cdef double noise_coef = sqrt(2.0 / (beta * n))
    cdef Py_ssize_t rows = xi.shape[0]
    cdef Py_ssize_t row = 0
    cdef Py_ssize_t k
    cdef int halve
    cdef bint ok, coupled = x2 is not None, with_kernel = u is not None
    cdef double gap, g2, dt, sdt
    cdef double[::1] drift1 = np.empty(n)
    cdef double[::1] drift2 = np.empty(n) if coupled else None
    cdef double[::1] xn = np.empty(n)
    cdef double[::1] xn2 = np.empty(n) if coupled else None
    cdef double[::1] ru = np.empty(n) if with_kernel else None
    cdef double[::1] rv = np.empty(n) if with_kernel else None
    cdef double[::1] tmp = np.empty(n)
    cdef double[::1] tu = np.empty(n) if with_kernel else None
    cdef double[::1] tv = np.empty(n) if with_kernel else None

    while t < t_target:
        if row >= rows:
            return t, row, 1
        gap = _min_gap(x)
        if coupled:
            g2 = _min_gap(x2)
            if g2 < gap:
                gap = g2
        dt = c_dt * gap * gap * n if gap != INFINITY else dt_max
        if dt > dt_max:
            dt = dt_max
        if dt > t_target - t:
            dt = t_target - t
        if with_kernel:
            _drift_rates_into(x, u, v, n_inv, drift1, ru, rv, tmp, tu, tv)
        else:
            _drift_into(x, n_inv, drift1, tmp)
        if coupled:
            _drift_into(x2, n_inv, drift2, tmp)
        ok = False
        for halve in range(max_halve + 1):
            sdt = noise_coef * sqrt(dt)
            for k in range(n):
                xn[k] = x[k] + drift1[k] * dt + sdt * xi[row, k]
            ok = _ordered(xn)
            if ok and coupled:
                for k in range(n):
                    xn2[k] = x2[k] + drift2[k] * dt + sdt * xi[row, k]
                ok = _ordered(xn2)
            if ok:
                break
            dt *= 0.5
        if not ok:
            return t, row, 2
        if with_kernel:
            if _kernel_coef(x, n_inv, dt) > 1.0:
                return t, row, 3
            for k in range(n):
                u[k] += ru[k] * dt
                v[k] += rv[k] * dt
        for k in range(n):
            x[k] = xn[k]
        if coupled:
            for k in range(n):
                x2[k] = xn2[k]
        dts.append(dt)
        t += dt
        row += 1
    return t, row, 0


def replay_block(double[::1] x, double t, double t_target, double[:, ::1] xi,
                 double[::1] dts_fixed, Py_ssize_t start_step, double beta,
                 double[::1] x2=None, double[::1] u=None, double[::1] v=None):
    cdef Py_ssize_t n = x.shape[0]
    cdef double n_inv = 1.0 / n
    cdef double noise_coef = sqrt(2.0 / (beta * n))
    cdef Py_ssize_t rows = xi.shape[0]
    cdef Py_ssize_t row = 0
    cdef Py_ssize_t step_idx = start_step
    cdef Py_ssize_t total = dts_fixed.shape[0]
    cdef Py_ssize_t k
    cdef bint coupled = x2 is not None, with_kernel = u is not None
    cdef double dt, sdt
    cdef double[::1] drift1 = np.empty(n)
    cdef double[::1] drift2 = np.empty(n) if coupled else None
    cdef double[::1] ru = np.empty(n) if with_kernel else None
    cdef double[::1] rv = np.empty(n) if with_kernel else None
    cdef double[::1] tmp = np.empty(n)
    cdef double[::1] tu = np.empty(n) if with_kernel else None
    cdef double[::1] tv = np.empty(n) if with_kernel else None

    while step_idx < total and t < t_target:
        if row >= rows:
            return t, row, step_idx - start_step, 1
        dt = dts_fixed[step_idx]
        if with_kernel:
            _drift_rates_into(x, u, v, n_inv, drift1, ru, rv, tmp, tu, tv)
            if _kernel_coef(x, n_inv, dt) > 1.0:
                return t, row, step_idx - start_step, 3
            for k in range(n):
                u[k] += ru[k] * dt
                v[k] += rv[k] * dt
        else:
            _drift_into(x, n_inv, drift1, tmp)
        sdt = noise_coef * sqrt(dt)
        # grouping matches em_block exactly so replay is bitwise
        for k in range(n):
            x[k] = x[k] + drift1[k] * dt + sdt * xi[row, k]
        if coupled:
            _drift_into(x2, n_inv, drift2, tmp)
            for k in range(n):
                x2[k] = x2[k] + drift2[k] * dt + sdt * xi[row, k]
        t += dt
        row += 1
        step_idx += 1
    return t, row, step_idx - start_step, 0
