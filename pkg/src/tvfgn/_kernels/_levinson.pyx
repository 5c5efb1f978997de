# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Durbin-Levinson recursions on Toeplitz covariance first rows.

These are the O(n^2) inner loops behind exact long-memory Gaussian
likelihoods; they cannot be vectorised because each prediction order
feeds the next. A pure-numpy twin lives in ``_levinson_py``.
"""

import numpy as np

cimport numpy as cnp


def durbin_whitening(double[::1] r):
    """Whitening triangle of the Toeplitz covariance with first row ``r``.

    Returns (W, v) with W upper triangular such that for a data row x the
    one-step prediction errors are e = x @ W, and v[k] is the innovation
    variance of e[k].  Then x' Sigma^-1 x = sum(e_k^2 / v_k) and
    log|Sigma| = sum(log v_k).
    """
    cdef Py_ssize_t n = r.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W_arr = np.zeros((n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_arr = np.empty(n)
    cdef double[:, ::1] W = W_arr
    cdef double[::1] v = v_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_arr = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_arr = np.zeros(n)
    cdef double[::1] a = a_arr
    cdef double[::1] b = b_arr
    cdef Py_ssize_t k, j
    cdef double kappa, acc

    if n == 0:
        return W_arr, v_arr
    if r[0] <= 0.0:
        raise ValueError("leading covariance entry must be positive")
    v[0] = r[0]
    W[0, 0] = 1.0
    for k in range(1, n):
        acc = r[k]
        for j in range(1, k):
            acc -= a[j] * r[k - j]
        kappa = acc / v[k - 1]
        b[k] = kappa
        for j in range(1, k):
            b[j] = a[j] - kappa * a[k - j]
        for j in range(1, k + 1):
            a[j] = b[j]
        v[k] = v[k - 1] * (1.0 - kappa * kappa)
        if v[k] <= 0.0:
            raise ValueError("covariance first row is not positive definite")
        W[k, k] = 1.0
        for j in range(1, k + 1):
            W[k - j, k] = -a[j]
    return W_arr, v_arr


def durbin_quadform(double[::1] r, double[::1] x):
    """Quadratic form x' Sigma^-1 x and log|Sigma| in O(n) memory."""
    cdef Py_ssize_t n = r.shape[0]
    if x.shape[0] != n:
        raise ValueError("r and x must have equal length")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_arr = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_arr = np.zeros(n)
    cdef double[::1] a = a_arr
    cdef double[::1] b = b_arr
    cdef Py_ssize_t k, j
    cdef double kappa, acc, vk, e, quad, logdet

    if n == 0:
        return 0.0, 0.0
    if r[0] <= 0.0:
        raise ValueError("leading covariance entry must be positive")
    vk = r[0]
    quad = x[0] * x[0] / vk
    logdet = np.log(vk)
    for k in range(1, n):
        acc = r[k]
        for j in range(1, k):
            acc -= a[j] * r[k - j]
        kappa = acc / vk
        b[k] = kappa
        for j in range(1, k):
            b[j] = a[j] - kappa * a[k - j]
        for j in range(1, k + 1):
            a[j] = b[j]
        vk = vk * (1.0 - kappa * kappa)
        if vk <= 0.0:
            raise ValueError("covariance first row is not positive definite")
        e = x[k]
        for j in range(1, k + 1):
            e -= a[j] * x[k - j]
        quad += e * e / vk
        logdet += np.log(vk)
    return quad, logdet


def durbin_logdet(double[::1] r):
    """log-determinant of the Toeplitz covariance with first row ``r``."""
    cdef Py_ssize_t n = r.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_arr = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_arr = np.zeros(n)
    cdef double[::1] a = a_arr
    cdef double[::1] b = b_arr
    cdef Py_ssize_t k, j
    cdef double kappa, acc, vk, logdet

    if n == 0:
        return 0.0
    if r[0] <= 0.0:
        raise ValueError("leading covariance entry must be positive")
    vk = r[0]
    logdet = np.log(vk)
    for k in range(1, n):
        acc = r[k]
        for j in range(1, k):
            acc -= a[j] * r[k - j]
        kappa = acc / vk
        b[k] = kappa
        for j in range(1, k):
            b[j] = a[j] - kappa * a[k - j]
        for j in range(1, k + 1):
            a[j] = b[j]
        vk = vk * (1.0 - kappa * kappa)
        if vk <= 0.0:
            raise ValueError("covariance first row is not positive definite")
        logdet += np.log(vk)
    return logdet
