# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled root-modulus kernel for stationary AA coefficient sweeps.

For every coefficient row ``beta`` and every eigenvalue ``mu`` the kernel finds
the largest root modulus of

    lam^(m+1) - (1 + sum(beta)) mu lam^m + beta_1 mu lam^(m-1) + ... + beta_m mu

and reduces with ``max`` over ``mu``. Degree 2 uses the quadratic formula,
higher degrees use simultaneous Aberth-Ehrlich iteration.
"""

from libc.math cimport cos, sin, pow, sqrt

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double complex csqrt(double complex)

import numpy as np

DEF MAXDEG = 9
DEF MAXIT = 500


cdef inline double _quadratic_max_modulus(double complex b, double complex c) noexcept nogil:
    # roots of lam^2 + b lam + c
    cdef double complex disc = csqrt(b * b - 4.0 * c)
    cdef double complex r1, r2
    cdef double a1, a2
    if cabs(-b + disc) >= cabs(-b - disc):
        r1 = (-b + disc) / 2.0
    else:
        r1 = (-b - disc) / 2.0
    a1 = cabs(r1)
    if a1 == 0.0:
        return 0.0
    r2 = c / r1
    a2 = cabs(r2)
    return a1 if a1 >= a2 else a2


cdef inline double _abs2(double complex v) noexcept nogil:
    return v.real * v.real + v.imag * v.imag


cdef double _aberth_max_modulus(double complex* coef, int deg) noexcept nogil:
    # coef[0] == 1, polynomial sum coef[i] z^(deg - i)
    cdef double complex z[MAXDEG]
    cdef bint done[MAXDEG]
    cdef double complex p, dp, ratio, s, w, diff
    cdef double radius = 0.0, bound, tol2, biggest, tiny2 = 1e-300, step2
    cdef int i, j, k, it, active
    for i in range(1, deg + 1):
        bound = pow(cabs(coef[i]), 1.0 / i)
        if bound > radius:
            radius = bound
    if radius == 0.0:
        return 0.0
    tol2 = (1e-15 * radius) * (1e-15 * radius)
    for j in range(deg):
        z[j] = radius * (cos(6.283185307179586 * j / deg + 0.4) + 1j * sin(6.283185307179586 * j / deg + 0.4))
        done[j] = False
    for it in range(MAXIT):
        active = 0
        for j in range(deg):
            if done[j]:
                continue
            p = coef[0]
            dp = 0.0
            for i in range(1, deg + 1):
                dp = dp * z[j] + p
                p = p * z[j] + coef[i]
            if _abs2(dp) < tiny2:
                dp = 1e-150
            ratio = p / dp
            s = 0.0
            for k in range(deg):
                if k != j:
                    diff = z[j] - z[k]
                    if _abs2(diff) < tiny2:
                        diff = 1e-150
                    s = s + 1.0 / diff
            w = ratio / (1.0 - ratio * s)
            z[j] = z[j] - w
            step2 = _abs2(w)
            if step2 <= tol2:
                done[j] = True
            else:
                active += 1
        if active == 0:
            break
    biggest = 0.0
    for j in range(deg):
        if _abs2(z[j]) > biggest:
            biggest = _abs2(z[j])
    return sqrt(biggest)


def max_root_modulus_grid(double[::1] mu_re, double[::1] mu_im, double[:, ::1] betas):
    """Max root modulus over all ``mu`` for each row of ``betas``."""
    cdef Py_ssize_t n_grid = betas.shape[0]
    cdef int m = <int> betas.shape[1]
    cdef Py_ssize_t n_mu = mu_re.shape[0]
    cdef Py_ssize_t g, q
    cdef int i, deg = m + 1
    cdef double complex coef[MAXDEG + 1]
    cdef double complex mu
    cdef double total, worst, val
    if deg > MAXDEG:
        raise ValueError(f"window size {m} exceeds compiled limit {MAXDEG - 1}")
    out = np.empty(n_grid, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for g in range(n_grid):
            total = 0.0
            for i in range(m):
                total = total + betas[g, i]
            worst = 0.0
            for q in range(n_mu):
                mu = mu_re[q] + 1j * mu_im[q]
                if deg == 2:
                    val = _quadratic_max_modulus(-(1.0 + total) * mu, betas[g, 0] * mu)
                else:
                    coef[0] = 1.0
                    coef[1] = -(1.0 + total) * mu
                    for i in range(m):
                        coef[i + 2] = betas[g, i] * mu
                    val = _aberth_max_modulus(coef, deg)
                if val > worst:
                    worst = val
            res[g] = worst
    return out
