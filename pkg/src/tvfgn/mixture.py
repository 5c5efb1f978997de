"""Time-varying mixture of two fGn processes.

The generative component: a convex time-dependent weighting of two
independent fGn processes, optionally modulated by a logistic
time-varying standard deviation.  Also provides the sparse Markov
(stacked precision) form used by the latent-Gaussian engine, the
irregular-sampling interpolation matrix, and the KLD mapping from
mixture weights to locally equivalent Hurst exponents.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from tvfgn import ar1_cascade, fgn

TAU_HIGH = float(np.exp(15.0))
DENSE_GUARD = 2000


def linear_weight(timestamps) -> np.ndarray:
    """Linear mixing weight w(t) = (t - t1) / (tn - t1)."""
    t = np.asarray(timestamps, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("timestamps must be a 1-d vector of length >= 2")
    if np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    return (t - t[0]) / (t[-1] - t[0])


def sigma_logistic(beta: float, timestamps) -> np.ndarray:
    """Logistic time-varying standard deviation profile in (0.5, 1.5).

    sigma(t) = 1/2 + logistic(beta * (u - 1/2)) with u the position of t
    in [t1, tn]; identically 1 when beta = 0.
    """
    u = linear_weight(timestamps)
    return 0.5 + 1.0 / (1.0 + np.exp(-beta * (u - 0.5)))


@dataclass(frozen=True)
class MixtureSpec:
    """Full specification of the two-fGn mixture component.

    ``weights`` overrides the default linear weight function when a
    user-tabulated profile is wanted; it must match the timestamps.
    """

    h1: float
    h2: float
    timestamps: np.ndarray
    tau: float = 1.0
    beta: float | None = None
    m: int = 4
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        fgn.validate_hurst(self.h1)
        fgn.validate_hurst(self.h2)
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.m not in (3, 4):
            raise ValueError("m must be 3 or 4")
        t = np.asarray(self.timestamps, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing, length >= 2")
        object.__setattr__(self, "timestamps", t)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != t.shape:
                raise ValueError("weights must match timestamps")
            if np.any(w < 0) or np.any(w > 1):
                raise ValueError("weights must lie in [0, 1]")
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.timestamps.size

    def weight_values(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        return linear_weight(self.timestamps)

    def sigma_values(self) -> np.ndarray:
        if self.beta is None:
            return np.ones(self.n)
        return sigma_logistic(self.beta, self.timestamps)


def simulate_mixture(spec: MixtureSpec, seed) -> np.ndarray:
    """Draw one realization of the mixture component.

    Exact fGn pair via circulant embedding, combined with the weight
    function; the logistic amplitude applies when beta is present.
    Deterministic given the seed.
    """
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    s1, s2 = ss.spawn(2)
    x1 = fgn.simulate(spec.h1, spec.n, s1)
    x2 = fgn.simulate(spec.h2, spec.n, s2)
    w = spec.weight_values()
    x = (np.sqrt(1.0 - w) * x1 + np.sqrt(w) * x2) / np.sqrt(spec.tau)
    return spec.sigma_values() * x


def mixture_acf_row(w: float, h1: float, h2: float, n: int) -> np.ndarray:
    """Fixed-weight autocorrelation row (1-w) rho_H1 + w rho_H2.

    The Toeplitz covariance row of the mixture frozen at weight w; unit
    variance by construction.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    return (1.0 - w) * fgn.acf(h1, n) + w * fgn.acf(h2, n)


def mixture_covariance(spec: MixtureSpec) -> np.ndarray:
    """Dense covariance of the mixture component (diagnostic; small n only).

    Generative form: cov(eps_i, eps_j) =
    tau^-1 [sqrt((1-w_i)(1-w_j)) rho_H1(|i-j|) + sqrt(w_i w_j) rho_H2(|i-j|)],
    scaled by sigma(t_i) sigma(t_j) when beta is present.  This is the
    symmetric covariance implied by the construction; the common
    single-index display is its i = j diagonal shorthand.
    """
    n = spec.n
    if n > DENSE_GUARD:
        raise ValueError(
            f"dense covariance limited to n <= {DENSE_GUARD}; use the sparse "
            "stacked-precision path for longer series"
        )
    w = spec.weight_values()
    rho1 = fgn.acf(spec.h1, n)
    rho2 = fgn.acf(spec.h2, n)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    a = np.sqrt(1.0 - w)
    b = np.sqrt(w)
    cov = (np.outer(a, a) * rho1[idx] + np.outer(b, b) * rho2[idx]) / spec.tau
    if spec.beta is not None:
        s = spec.sigma_values()
        cov = cov * np.outer(s, s)
    return cov


def kld_map_weight_to_hurst(
    w: float, h1: float, h2: float, n: int, tol: float = 1e-4
) -> float:
    """Locally equivalent Hurst exponent for mixture weight w.

    Minimizes the spectral KLD between the fixed-w mixture row and a pure
    fGn row over H by golden-section search on a slightly padded bracket;
    endpoints are exact by construction.
    """
    h1 = fgn.validate_hurst(h1)
    h2 = fgn.validate_hurst(h2)
    if h1 > h2:
        h1, h2, w = h2, h1, 1.0 - w
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    if w == 0.0 or h1 == h2:
        return h1
    if w == 1.0:
        return h2
    n = min(int(n), 1024)
    row = mixture_acf_row(w, h1, h2, n)

    def f(h):
        return fgn.stationary_kld(row, fgn._acf_unchecked(h, n))

    lo = max(h1 - 0.02, 0.02)
    hi = min(h2 + 0.02, 0.999)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return float(0.5 * (a + b))


def interpolation_matrix(timestamps, grid_step: float):
    """Two-point interpolation from a regular latent grid to observation times.

    Returns (A, grid) where A is sparse n x M with convex rows (weights
    normalized by the grid step) and the grid covers
    [floor(t1), ceil(tn)].  A grid step above the smallest observation
    gap only triggers a resolution-loss warning.
    """
    t = np.asarray(timestamps, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing, length >= 2")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    min_gap = float(np.diff(t).min())
    if grid_step > min_gap:
        warnings.warn(
            f"grid step {grid_step} exceeds the smallest observation gap "
            f"{min_gap:.6g}; nearby observations will share grid support",
            stacklevel=2,
        )
    lo = np.floor(t[0])
    hi = np.ceil(t[-1])
    n_cells = int(np.ceil((hi - lo) / grid_step - 1e-12))
    grid = lo + grid_step * np.arange(n_cells + 1)
    n = t.size
    j = np.clip(np.searchsorted(grid, t, side="right") - 1, 0, n_cells - 1)
    frac = (t - grid[j]) / grid_step
    rows = np.repeat(np.arange(n), 2)
    cols = np.column_stack([j, j + 1]).ravel()
    vals = np.column_stack([1.0 - frac, frac]).ravel()
    keep = vals > 1e-14
    a = sparse.csr_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(n, grid.size)
    )
    return a, grid


def stacked_precision(spec: MixtureSpec, table=None) -> sparse.csc_matrix:
    """Sparse precision of the stacked vector (eps, Z1, Z2).

    3 x 3 block layout: the high-precision coupling of eps to the two
    AR(1) stacks plus the block-tridiagonal stack precisions.  Dimension
    n + 2 m n; positive definite.
    """
    if table is None:
        table = ar1_cascade.packaged_table(spec.m)
    n = spec.n
    if n < 2:
        raise ValueError("n must be >= 2")
    c1 = table.lookup(spec.h1)
    c2 = table.lookup(spec.h2)
    w = spec.weight_values()
    s = spec.sigma_values()
    d1 = np.sqrt(1.0 - w) * s
    d2 = np.sqrt(w) * s
    rinv_sqrt = 1.0 / np.sqrt(spec.tau)

    def a_block(coeffs, d):
        cols = [sparse.diags(np.sqrt(vj) * d) for vj in coeffs.v]
        return sparse.hstack(cols, format="csr")

    a1 = a_block(c1, d1)
    a2 = a_block(c2, d2)
    r1 = ar1_cascade.block_precision(spec.h1, n, table=table, m=spec.m)
    r2 = ar1_cascade.block_precision(spec.h2, n, table=table, m=spec.m)
    th = TAU_HIGH
    q11 = sparse.identity(n, format="csc") * th
    q12 = -rinv_sqrt * th * a1
    q13 = -rinv_sqrt * th * a2
    q22 = (th / spec.tau) * (a1.T @ a1) + r1
    q23 = (th / spec.tau) * (a1.T @ a2)
    q33 = (th / spec.tau) * (a2.T @ a2) + r2
    q = sparse.bmat(
        [[q11, q12, q13], [q12.T, q22, q23], [q13.T, q23.T, q33]], format="csc"
    )
    return q
