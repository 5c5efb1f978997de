"""Exact fractional Gaussian noise primitives.

Autocorrelation, Toeplitz covariance rows, exact simulation by circulant
embedding, quadratic-cost Gaussian log-density via the Durbin-Levinson
recursion, and the spectral KLD between stationary processes given by
covariance first rows.
"""

from __future__ import annotations

import numpy as np

from tvfgn import _kernels

HURST_MIN = 0.50
HURST_MAX = 0.99


def validate_hurst(h: float) -> float:
    """Check a Hurst exponent against the supported long-memory range."""
    h = float(h)
    if not np.isfinite(h) or not (HURST_MIN <= h <= HURST_MAX):
        raise ValueError(
            f"Hurst exponent must lie in [{HURST_MIN}, {HURST_MAX}], got {h}"
        )
    return h


def _acf_unchecked(h: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    two_h = 2.0 * h
    rho = 0.5 * (
        np.abs(k + 1.0) ** two_h - 2.0 * np.abs(k) ** two_h + np.abs(k - 1.0) ** two_h
    )
    rho[0] = 1.0
    return rho


def acf(h: float, n: int) -> np.ndarray:
    """Autocorrelation of fGn at lags 0..n-1.

    rho(k) = 0.5 * (|k+1|^(2H) - 2|k|^(2H) + |k-1|^(2H)); rho(0) = 1.
    """
    h = validate_hurst(h)
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return _acf_unchecked(h, n)


def covariance_row(h: float, n: int, tau: float = 1.0) -> np.ndarray:
    """First row of the Toeplitz covariance, variance tau^-1."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return acf(h, n) / tau


def simulate(
    h: float,
    n: int,
    seed,
    return_info: bool = False,
):
    """Exact zero-mean unit-variance fGn sample of length n.

    Circulant (Davies-Harte) embedding of the length-2n extension; if a
    circulant eigenvalue comes out negative the sampler falls back to a
    dense Cholesky factor of the Toeplitz covariance.  ``seed`` may be an
    int, a SeedSequence or a Generator; output is deterministic given it.

    With ``return_info=True`` returns (sample, path) where path is
    "circulant" or "cholesky".
    """
    h = validate_hurst(h)
    n = int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)

    r = _acf_unchecked(h, n + 1)
    circle = np.concatenate([r, r[n - 1:0:-1]])
    lam = np.fft.fft(circle).real
    path = "circulant"
    if lam.min() < -1e-8:
        path = "cholesky"
        x = _simulate_cholesky(h, n, rng)
    else:
        lam = np.clip(lam, 0.0, None)
        m = 2 * n
        z = np.empty(m, dtype=complex)
        z[0] = rng.standard_normal()
        z[n] = rng.standard_normal()
        re = rng.standard_normal(n - 1)
        im = rng.standard_normal(n - 1)
        z[1:n] = (re + 1j * im) / np.sqrt(2.0)
        z[n + 1:] = np.conj(z[n - 1:0:-1])
        x = np.sqrt(m) * np.fft.ifft(np.sqrt(lam) * z).real[:n]
    if return_info:
        return x, path
    return x


def _simulate_cholesky(h: float, n: int, rng: np.random.Generator) -> np.ndarray:
    from scipy.linalg import cholesky, toeplitz

    cov = toeplitz(_acf_unchecked(h, n))
    chol = cholesky(cov, lower=True)
    return chol @ rng.standard_normal(n)


def logdensity(x: np.ndarray, h: float, tau: float = 1.0) -> float:
    """Exact Gaussian log-density of x under covariance tau^-1 Sigma_H.

    Levinson-based: O(n^2) time, equal to the dense-Cholesky value.
    """
    h = validate_hurst(h)
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("x must be a nonempty 1-d vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite values")
    n = x.size
    quad, logdet = _kernels.durbin_quadform(_acf_unchecked(h, n), x)
    return float(
        -0.5 * n * np.log(2.0 * np.pi)
        + 0.5 * n * np.log(tau)
        - 0.5 * logdet
        - 0.5 * tau * quad
    )


def acf_logdet(h: float, n: int) -> float:
    """log-determinant of the n x n unit-variance fGn correlation matrix."""
    h = validate_hurst(h)
    return float(_kernels.durbin_logdet(_acf_unchecked(h, n)))


def circulant_eigenvalues(first_row: np.ndarray) -> np.ndarray:
    """Eigenvalues of the circular extension of a Toeplitz covariance row.

    The length-n row is mirrored into a circulant of order 2n-2 and its
    eigenvalues read off the DFT.  (Wrapping into an order-n circulant
    instead loses positive definiteness for strongly persistent rows.)
    """
    r = np.asarray(first_row, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("first row must be a nonempty 1-d vector")
    if r.size == 1:
        return r.copy()
    c = np.concatenate([r, r[-2:0:-1]])
    return np.fft.fft(c).real


def stationary_kld(first_row_p: np.ndarray, first_row_q: np.ndarray) -> float:
    """KLD between two stationary Gaussian processes from covariance rows.

    Spectral form: -0.5 * sum(log(l_j/q_j) - l_j/q_j + 1) over the circulant
    eigenvalues l (true process) and q (approximating process), obtained by
    wrapping each first row into a circulant and applying the DFT.
    """
    p = np.asarray(first_row_p, dtype=float)
    q = np.asarray(first_row_q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("covariance rows must have equal length")
    lam = circulant_eigenvalues(p)
    mu = circulant_eigenvalues(q)
    if np.any(mu <= 0):
        raise ValueError("approximating covariance row is not valid (nonpositive eigenvalue)")
    if np.any(lam <= 0):
        raise ValueError("covariance row is not valid (nonpositive eigenvalue)")
    ratio = lam / mu
    return float(-0.5 * np.sum(np.log(ratio) - ratio + 1.0))
