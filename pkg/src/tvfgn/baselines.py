"""Classical early-warning indicators used for comparison.

Sliding-window maximum-likelihood Hurst estimation, Kendall's rank trend
statistic with Monte Carlo null quantiles, and detrended fluctuation
analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tvfgn import _kernels, fgn

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SlidingEstimates:
    """Per-window Hurst estimates; skipped (constant) windows hold NaN."""

    window: int
    centers: np.ndarray
    estimates: np.ndarray

    @property
    def n_windows(self) -> int:
        return self.estimates.size

    def valid(self) -> np.ndarray:
        return self.estimates[np.isfinite(self.estimates)]


class _WhiteningCache:
    """Per-call cache of whitening triangles keyed by the probe H."""

    def __init__(self, w: int, max_entries: int = 160):
        self.w = w
        self.max_entries = max_entries
        self._store: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def get(self, h: float):
        key = round(h, 12)
        hit = self._store.get(key)
        if hit is None:
            if len(self._store) >= self.max_entries:
                self._store.pop(next(iter(self._store)))
            hit = _kernels.durbin_whitening(fgn.acf(h, self.w))
            self._store[key] = hit
        return hit


def _profile_loglik(x_rows: np.ndarray, whiten, v) -> np.ndarray:
    """Gaussian log-likelihood profiled over the variance, per row."""
    w = x_rows.shape[1]
    e = x_rows @ whiten
    quad = (e * e / v[None, :]).sum(axis=1)
    logdet = float(np.sum(np.log(v)))
    with np.errstate(divide="ignore"):
        return -0.5 * (
            w * np.log(2.0 * np.pi) + logdet + w * np.log(quad / w) + w
        )


def window_hurst(
    y: np.ndarray,
    w: int,
    h_bounds: tuple[float, float] = (fgn.HURST_MIN, fgn.HURST_MAX),
    tol: float = 1e-3,
) -> SlidingEstimates:
    """Maximum-likelihood Hurst exponents in sliding windows of length w.

    Each window is demeaned (the local level is unknown) and maximizes the
    exact fGn likelihood profiled over the precision, by golden-section
    search in H.  The searches run in lockstep across windows so each
    distinct probe value costs one whitening triangle and one batched
    matrix product.  Windows with zero variance are skipped (NaN).
    """
    y = np.ascontiguousarray(y, dtype=float)
    n = y.size
    if not 10 <= w < n:
        raise ValueError("window length must satisfy 10 <= w < n")
    p = n - w
    idx = np.arange(p)[:, None] + np.arange(w)[None, :]
    rows = y[idx]
    live = rows.std(axis=1) > 0
    rows = rows - rows.mean(axis=1, keepdims=True)
    cache = _WhiteningCache(w)

    a = np.full(p, h_bounds[0])
    b = np.full(p, h_bounds[1])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)

    def batch_eval(h_probe: np.ndarray) -> np.ndarray:
        out = np.full(p, -np.inf)
        todo = np.flatnonzero(live)
        for h in np.unique(np.round(h_probe[todo], 12)):
            sel = todo[np.round(h_probe[todo], 12) == h]
            whiten, v = cache.get(float(h))
            out[sel] = _profile_loglik(rows[sel], whiten, v)
        return out

    fc = batch_eval(c)
    fd = batch_eval(d)
    while np.max(b - a) > tol:
        left = fc > fd
        # shrink toward c where f(c) > f(d), toward d otherwise
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - _INVPHI * (b - a)
        d_new = a + _INVPHI * (b - a)
        fc_new = np.where(left, np.nan, fd)
        fd_new = np.where(left, fc, np.nan)
        need_c = left
        need_d = ~left
        probe = np.where(need_c, c_new, d_new)
        vals = batch_eval(probe)
        fc = np.where(need_c, vals, fc_new)
        fd = np.where(need_d, vals, fd_new)
        c, d = c_new, d_new

    est = 0.5 * (a + b)
    est[~live] = np.nan
    centers = np.arange(p) + (w - 1) / 2.0
    return SlidingEstimates(window=int(w), centers=centers, estimates=est)


def kendall_tau(x: np.ndarray) -> float:
    """Kendall rank trend statistic of a sequence against time order.

    (#concordant - #discordant) / C(p, 2); tied pairs count as neither,
    with the denominator unchanged.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-d sequence of length >= 2")
    p = x.size
    s = 0
    for i in range(p - 1):
        s += int(np.sign(x[i + 1:] - x[i]).sum())
    return float(2.0 * s / (p * (p - 1)))


def tau_null_quantile(
    n: int,
    w: int,
    h0: float = 0.75,
    level: float = 0.95,
    reps: int = 1000,
    seed: int = 0,
) -> float:
    """Monte Carlo upper quantile of tau_K under a constant-H null.

    Simulates stationary fGn(h0) of length n, applies window_hurst and
    kendall_tau per replicate, and returns the empirical level-quantile.
    """
    if reps < 500:
        raise ValueError("reps must be >= 500")
    h0 = fgn.validate_hurst(h0)
    taus = np.empty(reps)
    for i, s in enumerate(np.random.SeedSequence(seed).spawn(reps)):
        x = fgn.simulate(h0, n, s)
        est = window_hurst(x, w)
        taus[i] = kendall_tau(est.valid())
    return float(np.quantile(taus, level))


def dfa_hurst(
    y: np.ndarray,
    n_scales: int = 20,
    min_scale: int = 4,
    max_scale: int | None = None,
    return_curve: bool = False,
):
    """First-order detrended fluctuation analysis slope.

    Cumulates the centered series, detrends boxes of each scale linearly
    (boxes taken from both ends), and regresses log F on log scale; the
    slope estimates H for fGn-like input.
    """
    y = np.ascontiguousarray(y, dtype=float)
    n = y.size
    if n < 200:
        raise ValueError("DFA needs at least 200 observations")
    profile = np.cumsum(y - y.mean())
    if max_scale is None:
        max_scale = n // 4
    scales = np.unique(np.geomspace(min_scale, max_scale, n_scales).astype(int))
    scales = scales[scales >= min_scale]
    if scales.size < 4:
        raise ValueError("fewer than 4 usable scales")
    t_full = np.arange(n, dtype=float)
    fluct = np.empty(scales.size)
    for k, s in enumerate(scales):
        nbox = n // s
        segs = np.concatenate([
            profile[: nbox * s].reshape(nbox, s),
            profile[n - nbox * s:].reshape(nbox, s),
        ])
        t = t_full[:s]
        t_c = t - t.mean()
        denom = float(t_c @ t_c)
        seg_c = segs - segs.mean(axis=1, keepdims=True)
        slope = (seg_c @ t_c) / denom
        resid = seg_c - slope[:, None] * t_c[None, :]
        fluct[k] = np.sqrt(np.mean(resid * resid))
    coeffs = np.polyfit(np.log(scales), np.log(fluct), 1)
    h = float(coeffs[0])
    if return_curve:
        return h, scales, fluct
    return h
