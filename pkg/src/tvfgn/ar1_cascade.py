"""Sparse Markov representation of fGn as a weighted sum of AR(1) processes.

Fits the lag-one coefficients and weights of m independent AR(1) processes
so that their weighted sum reproduces the fGn autocorrelation, tabulates
the fit over a grid of Hurst exponents, and builds the block-tridiagonal
precision matrices that make likelihood evaluations linear in n.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize

from tvfgn import fgn

DEFAULT_MAX_LAG = 1000
_PHI_SEP = 1e-9


@dataclass(frozen=True)
class CascadeCoefficients:
    """AR(1) cascade parameters: lag-one coefficients and unit-sum weights."""

    phi: np.ndarray
    v: np.ndarray
    objective: float = np.nan

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if phi.shape != v.shape or phi.ndim != 1:
            raise ValueError("phi and v must be 1-d arrays of equal length")
        if np.any(phi < 0) or np.any(phi >= 1):
            raise ValueError("phi entries must lie in [0, 1)")
        if np.any(np.diff(phi) <= 0):
            raise ValueError("phi must be strictly increasing")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-8:
            raise ValueError("v must be nonnegative and sum to 1")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "v", v)

    @property
    def m(self) -> int:
        return self.phi.size

    def acf(self, lags) -> np.ndarray:
        """Cascade autocorrelation sum_j v_j phi_j^k at the given lags."""
        lags = np.asarray(lags, dtype=float)
        return (self.v[None, :] * self.phi[None, :] ** lags[..., None]).sum(axis=-1)


def _canonical(phi: np.ndarray, v: np.ndarray, objective: float) -> CascadeCoefficients:
    order = np.argsort(phi)
    phi = np.clip(phi[order], 0.0, 1.0 - 1e-12)
    v = np.maximum(v[order], 0.0)
    v = v / v.sum()
    # break exact ties so the canonical ordering is strict
    for j in range(1, phi.size):
        if phi[j] <= phi[j - 1]:
            phi[j] = phi[j - 1] + _PHI_SEP
    return CascadeCoefficients(phi=phi, v=v, objective=float(objective))


def _search_lags(max_lag: int) -> np.ndarray:
    """Dense small lags plus log-spaced tail; enough to track the max error."""
    dense = np.arange(1, min(65, max_lag + 1))
    tail = np.unique(np.geomspace(65, max_lag, 48).astype(int)) if max_lag > 65 else []
    return np.unique(np.concatenate([dense, tail])).astype(float)


def _best_weights(
    phi: np.ndarray, target: np.ndarray, lags: np.ndarray | None = None
) -> tuple[np.ndarray, float]:
    """Optimal unit-sum nonnegative weights for fixed phi.

    Chebyshev (max absolute ACF difference) fit; a small linear program.
    """
    m = phi.size
    if lags is None:
        lags = np.arange(1, target.size + 1, dtype=float)
    powers = phi[None, :] ** lags[:, None]
    k = lags.size
    ones = np.ones((k, 1))
    c = np.concatenate([np.zeros(m), [1.0]])
    a_ub = np.block([[powers, -ones], [-powers, -ones]])
    b_ub = np.concatenate([target, -target])
    a_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
        bounds=[(0, None)] * (m + 1), method="highs",
    )
    if not res.success:
        raise RuntimeError(f"weight subproblem failed: {res.message}")
    return res.x[:m], float(res.fun)


def _spread_starts(m: int, n_starts: int, seed) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    ranges = [(0.3, 3.5), (0.6, 4.2), (0.15, 3.0), (0.8, 5.0)]
    starts = []
    for i in range(n_starts):
        lo, hi = ranges[i % len(ranges)]
        decades = np.linspace(lo, hi, m)
        if i >= len(ranges):
            decades = decades + rng.uniform(-0.15, 0.15, m)
        phi0 = 1.0 - 10.0 ** (-decades)
        starts.append(np.log(phi0 / (1.0 - phi0)))
    return starts


def fit_cascade(
    h: float,
    m: int = 4,
    max_lag: int = DEFAULT_MAX_LAG,
    n_starts: int = 8,
    seed: int = 0,
    extra_starts=(),
    maxiter: int = 250,
) -> CascadeCoefficients:
    """Fit the m-component cascade to the fGn ACF at the given Hurst exponent.

    Minimises the maximum absolute difference between the cascade ACF and
    the exact fGn ACF over lags 1..max_lag, subject to sum(v) = 1.  The
    weights are solved exactly by linear programming for each candidate
    phi; the phi search is multi-start Nelder-Mead.  The reported
    objective is the achieved max-abs ACF error.
    """
    h = fgn.validate_hurst(h)
    if m not in (3, 4):
        raise ValueError("m must be 3 or 4")
    if max_lag < 100:
        raise ValueError("max_lag must be >= 100")
    full = fgn.acf(h, max_lag + 1)[1:]
    lags = _search_lags(max_lag)
    target = full[lags.astype(int) - 1]

    def f(x, tgt, lag_set):
        phi = 1.0 / (1.0 + np.exp(-x))
        try:
            return _best_weights(phi, tgt, lag_set)[1]
        except RuntimeError:
            return np.inf

    best = None
    for x0 in list(extra_starts) + _spread_starts(m, n_starts, seed):
        res = minimize(
            f, x0, args=(target, lags), method="Nelder-Mead",
            options=dict(maxiter=maxiter, xatol=1e-6, fatol=1e-10, adaptive=True),
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise RuntimeError(f"cascade fit failed to converge at H={h}")
    # polish on the full lag range, which also yields the exact objective
    res = minimize(
        f, best.x, args=(full, None), method="Nelder-Mead",
        options=dict(maxiter=max(60, maxiter // 4), xatol=1e-7, fatol=1e-11,
                     adaptive=True),
    )
    x_best = res.x if res.fun <= f(best.x, full, None) else best.x
    phi = 1.0 / (1.0 + np.exp(-x_best))
    v, obj = _best_weights(phi, full)
    return _canonical(phi, v, obj)


class CoefficientTable:
    """Grid of fitted cascade coefficients over the Hurst range, with
    piecewise-linear interpolation (weights renormalised) between knots."""

    def __init__(self, h_grid, phi, v, objective, m, grid_step, max_lag,
                 criterion="minimax", version=1):
        self.h_grid = np.asarray(h_grid, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.objective = np.asarray(objective, dtype=float)
        self.m = int(m)
        self.grid_step = float(grid_step)
        self.max_lag = int(max_lag)
        self.criterion = criterion
        self.version = int(version)

    def _bracket(self, h: float):
        h = fgn.validate_hurst(h)
        pos = (h - self.h_grid[0]) / self.grid_step
        i = int(np.floor(pos + 1e-12))
        i = min(max(i, 0), self.h_grid.size - 1)
        frac = pos - i
        if abs(frac) < 1e-12 or i == self.h_grid.size - 1:
            return i, i, 0.0
        return i, i + 1, frac

    def lookup(self, h: float) -> CascadeCoefficients:
        i, j, frac = self._bracket(h)
        if j == i:
            return CascadeCoefficients(self.phi[i], self.v[i], self.objective[i])
        phi = (1.0 - frac) * self.phi[i] + frac * self.phi[j]
        v = (1.0 - frac) * self.v[i] + frac * self.v[j]
        v = v / v.sum()
        obj = max(self.objective[i], self.objective[j])
        return CascadeCoefficients(phi, v, obj)

    def error_bound(self, h: float) -> float:
        """Frozen max-abs ACF error bound near h.

        Max of the bracketing knot objectives with a 1.5 allowance for
        interpolation between knots (measured midpoint inflation is ~1.2).
        """
        i, j, _ = self._bracket(h)
        return 1.5 * float(max(self.objective[i], self.objective[j]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# AR(1) cascade coefficient table\n")
            fh.write(
                f"# m={self.m} grid_step={self.grid_step:.17g} "
                f"max_lag={self.max_lag} criterion={self.criterion} "
                f"version={self.version}\n"
            )
            cols = (
                ["H"]
                + [f"phi{j + 1}" for j in range(self.m)]
                + [f"v{j + 1}" for j in range(self.m)]
                + ["objective"]
            )
            fh.write("# columns: " + " ".join(cols) + "\n")
            for i, h in enumerate(self.h_grid):
                row = np.concatenate([[h], self.phi[i], self.v[i], [self.objective[i]]])
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")

    @classmethod
    def _parse(cls, fh) -> "CoefficientTable":
        meta = {}
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = val
                continue
            rows.append([float(x) for x in line.split()])
        if "m" not in meta:
            raise ValueError("table file lacks an m= header")
        m = int(meta["m"])
        data = np.asarray(rows, dtype=float)
        if data.shape[1] != 2 + 2 * m:
            raise ValueError("table row width does not match header m")
        return cls(
            h_grid=data[:, 0],
            phi=data[:, 1:1 + m],
            v=data[:, 1 + m:1 + 2 * m],
            objective=data[:, 1 + 2 * m],
            m=m,
            grid_step=float(meta.get("grid_step", np.diff(data[:2, 0])[0])),
            max_lag=int(meta.get("max_lag", DEFAULT_MAX_LAG)),
            criterion=meta.get("criterion", "minimax"),
            version=int(meta.get("version", 1)),
        )

    @classmethod
    def load(cls, path) -> "CoefficientTable":
        with open(path) as fh:
            return cls._parse(fh)

    @classmethod
    def load_packaged(cls, m: int = 4) -> "CoefficientTable":
        name = f"ar1_cascade_m{m}.txt"
        text = resources.files("tvfgn.data").joinpath(name).read_text()
        return cls._parse(io.StringIO(text))


_TABLE_CACHE: dict[int, CoefficientTable] = {}


def packaged_table(m: int = 4) -> CoefficientTable:
    """Cached accessor for the tables shipped with the package."""
    if m not in _TABLE_CACHE:
        _TABLE_CACHE[m] = CoefficientTable.load_packaged(m)
    return _TABLE_CACHE[m]


def build_table(
    m: int,
    grid_step: float = 0.01,
    max_lag: int = DEFAULT_MAX_LAG,
    path=None,
    seed: int = 0,
    progress: bool = False,
) -> CoefficientTable:
    """Fit every grid point in [0.50, 0.99] and optionally persist the table.

    Each knot is seeded with the previous knot's solution plus the spread
    starts, so the coefficients vary continuously in H.  Any knot failing
    to fit aborts the build.
    """
    if m not in (3, 4):
        raise ValueError("m must be 3 or 4")
    n_knots = int(round((fgn.HURST_MAX - fgn.HURST_MIN) / grid_step)) + 1
    h_grid = fgn.HURST_MIN + grid_step * np.arange(n_knots)
    phi = np.empty((n_knots, m))
    v = np.empty((n_knots, m))
    obj = np.empty(n_knots)
    prev = None
    for i, h in enumerate(h_grid):
        extra = []
        if prev is not None:
            p = np.clip(prev.phi, 1e-8, 1 - 1e-12)
            extra.append(np.log(p / (1.0 - p)))
        coeffs = fit_cascade(
            h, m=m, max_lag=max_lag, seed=seed + i, extra_starts=extra
        )
        phi[i], v[i], obj[i] = coeffs.phi, coeffs.v, coeffs.objective
        prev = coeffs
        if progress:
            print(f"H={h:.2f} objective={coeffs.objective:.3e}", flush=True)
    table = CoefficientTable(
        h_grid, phi, v, obj, m=m, grid_step=grid_step, max_lag=max_lag
    )
    if path is not None:
        table.save(path)
    return table


def ar1_precision(phi: float, n: int) -> sparse.csc_matrix:
    """Tridiagonal precision of a stationary unit-variance AR(1) of length n."""
    if n < 2:
        raise ValueError("n must be >= 2")
    kappa = 1.0 / (1.0 - phi * phi)
    diag = np.full(n, (1.0 + phi * phi) * kappa)
    diag[0] = diag[-1] = kappa
    off = np.full(n - 1, -phi * kappa)
    return sparse.diags([off, diag, off], [-1, 0, 1], format="csc")


def block_precision(h: float, n: int, table: CoefficientTable | None = None,
                    m: int = 4) -> sparse.csc_matrix:
    """Block-diagonal precision of the stacked m AR(1) processes for fGn(H).

    One tridiagonal block per cascade component; total dimension m * n.
    """
    if table is None:
        table = packaged_table(m)
    coeffs = table.lookup(h)
    blocks = [ar1_precision(p, n) for p in coeffs.phi]
    return sparse.block_diag(blocks, format="csc")
