# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled likelihood kernels for the rank-k Poisson tomography model.

Twin of ``qtomo._kernels_py`` (see that module for the contract); this one
exists because likelihood and gradient evaluations dominate the runtime of
the Monte Carlo fits.
"""

import numpy as np

from libc.math cimport log

BACKEND_NAME = "cython"

ctypedef double complex dcomplex


cdef inline void _fill_factor(const double[::1] theta, int k, dcomplex* T) noexcept nogil:
    # T is a flat 4 x k row-major scratch buffer.
    cdef int r, c, pos
    for r in range(4 * k):
        T[r] = 0
    for c in range(k):
        T[c * k + c] = theta[c]
    pos = k
    for c in range(k):
        for r in range(c + 1, 4):
            T[r * k + c] = theta[pos] + 1j * theta[pos + 1]
            pos += 2


cdef inline void _project(const dcomplex* T, int k, const dcomplex[:, ::1] kets, int v,
                          dcomplex* u) noexcept nogil:
    # u = T+ m_v  (length k)
    cdef int r, c
    for c in range(k):
        u[c] = 0
        for r in range(4):
            u[c] = u[c] + T[r * k + c].conjugate() * kets[v, r]


def expected_rates(theta, int k, kets, double t):
    """M_v = t * ||T+ m_v||^2 for every projector."""
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const dcomplex[:, ::1] kv = np.ascontiguousarray(kets, dtype=np.complex128)
    cdef Py_ssize_t V = kv.shape[0]
    out = np.empty(V, dtype=np.float64)
    cdef double[::1] M = out
    cdef dcomplex T[16]
    cdef dcomplex u[4]
    cdef double acc
    cdef Py_ssize_t v
    cdef int c
    _fill_factor(th, k, T)
    for v in range(V):
        _project(T, k, kv, v, u)
        acc = 0.0
        for c in range(k):
            acc += u[c].real * u[c].real + u[c].imag * u[c].imag
        M[v] = t * acc
    return out


def rate_jacobian(theta, int k, kets, double t):
    """dM_v / dtheta_i as a (V, n_params) matrix."""
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const dcomplex[:, ::1] kv = np.ascontiguousarray(kets, dtype=np.complex128)
    cdef Py_ssize_t V = kv.shape[0]
    cdef int n = th.shape[0]
    out = np.empty((V, n), dtype=np.float64)
    cdef double[:, ::1] dM = out
    cdef dcomplex T[16]
    cdef dcomplex u[4]
    cdef dcomplex z
    cdef Py_ssize_t v
    cdef int r, c, pos
    _fill_factor(th, k, T)
    for v in range(V):
        _project(T, k, kv, v, u)
        for c in range(k):
            z = kv[v, c].conjugate() * u[c]
            dM[v, c] = 2.0 * t * z.real
        pos = k
        for c in range(k):
            for r in range(c + 1, 4):
                z = kv[v, r].conjugate() * u[c]
                dM[v, pos] = 2.0 * t * z.real
                dM[v, pos + 1] = -2.0 * t * z.imag
                pos += 2
    return out


def neg_loglik(theta, int k, kets, counts, double t, double mu_floor, double lgamma_total):
    """Negative Poisson log-likelihood, including the log-factorial constant."""
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const dcomplex[:, ::1] kv = np.ascontiguousarray(kets, dtype=np.complex128)
    cdef const double[::1] n_obs = np.ascontiguousarray(counts, dtype=np.float64)
    cdef Py_ssize_t V = kv.shape[0]
    cdef dcomplex T[16]
    cdef dcomplex u[4]
    cdef double acc, m, val = lgamma_total
    cdef Py_ssize_t v
    cdef int c
    _fill_factor(th, k, T)
    for v in range(V):
        _project(T, k, kv, v, u)
        acc = 0.0
        for c in range(k):
            acc += u[c].real * u[c].real + u[c].imag * u[c].imag
        m = t * acc
        val += m
        if n_obs[v] > 0.0:
            val -= n_obs[v] * log(m if m > mu_floor else mu_floor)
    return val


def neg_loglik_grad(theta, int k, kets, counts, double t, double mu_floor, double lgamma_total):
    """Value and gradient of ``neg_loglik`` in one pass."""
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const dcomplex[:, ::1] kv = np.ascontiguousarray(kets, dtype=np.complex128)
    cdef const double[::1] n_obs = np.ascontiguousarray(counts, dtype=np.float64)
    cdef Py_ssize_t V = kv.shape[0]
    cdef int n = th.shape[0]
    grad_out = np.zeros(n, dtype=np.float64)
    cdef double[::1] g = grad_out
    cdef dcomplex T[16]
    cdef dcomplex u[4]
    cdef dcomplex z
    cdef double acc, m, mf, w, val = lgamma_total
    cdef Py_ssize_t v
    cdef int r, c, pos
    _fill_factor(th, k, T)
    for v in range(V):
        _project(T, k, kv, v, u)
        acc = 0.0
        for c in range(k):
            acc += u[c].real * u[c].real + u[c].imag * u[c].imag
        m = t * acc
        val += m
        w = 1.0
        if n_obs[v] > 0.0:
            mf = m if m > mu_floor else mu_floor
            val -= n_obs[v] * log(mf)
            w = 1.0 - n_obs[v] / mf
        for c in range(k):
            z = kv[v, c].conjugate() * u[c]
            g[c] += w * 2.0 * t * z.real
        pos = k
        for c in range(k):
            for r in range(c + 1, 4):
                z = kv[v, r].conjugate() * u[c]
                g[pos] += w * 2.0 * t * z.real
                g[pos + 1] += w * (-2.0) * t * z.imag
                pos += 2
    return val, grad_out
