"""Pure-numpy twin of the compiled Levinson kernels.

Same contracts as ``_levinson.pyx``; used when the extension is not built
or when TVFGN_PURE_PYTHON is set. Each prediction order is one numpy step,
so cost is O(n) python iterations of O(n) vector work.
"""

import numpy as np


def _check_leading(r):
    if len(r) and r[0] <= 0.0:
        raise ValueError("leading covariance entry must be positive")


def durbin_whitening(r):
    r = np.ascontiguousarray(r, dtype=float)
    n = r.shape[0]
    W = np.zeros((n, n))
    v = np.empty(n)
    if n == 0:
        return W, v
    _check_leading(r)
    v[0] = r[0]
    W[0, 0] = 1.0
    a = np.zeros(n)
    for k in range(1, n):
        kappa = (r[k] - a[1:k] @ r[k - 1:0:-1]) / v[k - 1]
        a[1:k] = a[1:k] - kappa * a[k - 1:0:-1]
        a[k] = kappa
        v[k] = v[k - 1] * (1.0 - kappa * kappa)
        if v[k] <= 0.0:
            raise ValueError("covariance first row is not positive definite")
        W[k, k] = 1.0
        W[k - 1::-1, k] = -a[1:k + 1]
    return W, v


def durbin_quadform(r, x):
    r = np.ascontiguousarray(r, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    n = r.shape[0]
    if x.shape[0] != n:
        raise ValueError("r and x must have equal length")
    if n == 0:
        return 0.0, 0.0
    _check_leading(r)
    vk = r[0]
    quad = x[0] * x[0] / vk
    logdet = np.log(vk)
    a = np.zeros(n)
    for k in range(1, n):
        kappa = (r[k] - a[1:k] @ r[k - 1:0:-1]) / vk
        a[1:k] = a[1:k] - kappa * a[k - 1:0:-1]
        a[k] = kappa
        vk = vk * (1.0 - kappa * kappa)
        if vk <= 0.0:
            raise ValueError("covariance first row is not positive definite")
        e = x[k] - a[1:k + 1] @ x[k - 1::-1]
        quad += e * e / vk
        logdet += np.log(vk)
    return float(quad), float(logdet)


def durbin_logdet(r):
    r = np.ascontiguousarray(r, dtype=float)
    n = r.shape[0]
    if n == 0:
        return 0.0
    _check_leading(r)
    vk = r[0]
    logdet = np.log(vk)
    a = np.zeros(n)
    for k in range(1, n):
        kappa = (r[k] - a[1:k] @ r[k - 1:0:-1]) / vk
        a[1:k] = a[1:k] - kappa * a[k - 1:0:-1]
        a[k] = kappa
        vk = vk * (1.0 - kappa * kappa)
        if vk <= 0.0:
            raise ValueError("covariance first row is not positive definite")
        logdet += np.log(vk)
    return float(logdet)
