"""Hyperparameter priors, posterior exploration and the decision statistic.

Penalised complexity priors for the Hurst exponents and precisions, a
Laplace prior for the amplitude parameter; posterior exploration by
mode-finding plus a standardized grid or central-composite layout; and
the early-warning statistic p = P(H2 - H1 > 0 | y) with its interval,
sampled from the weighted exploration points.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from tvfgn import fgn, lgm
from tvfgn.config import InferenceConfig

_H_SPAN = fgn.HURST_MAX - fgn.HURST_MIN  # 0.49


class InferenceError(RuntimeError):
    """Posterior exploration failed (optimizer divergence or empty layout)."""


# ---------------------------------------------------------------------------
# penalised complexity priors


_DISTANCE_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _hurst_distance_table(n_ref: int):
    """Grid of d(H) = sqrt(2 KLD(fGn_H || white noise)) at length n_ref."""
    if n_ref not in _DISTANCE_CACHE:
        grid = np.linspace(fgn.HURST_MIN, fgn.HURST_MAX, 981)
        d = np.array([np.sqrt(max(-fgn.acf_logdet(h, n_ref), 0.0)) for h in grid])
        dgrad = np.gradient(d, grid)
        _DISTANCE_CACHE[n_ref] = (grid, d, dgrad)
    return _DISTANCE_CACHE[n_ref]


def hurst_distance(h: float, n_ref: int = 100) -> float:
    """Complexity distance of fGn(H) from the white-noise base model."""
    grid, d, _ = _hurst_distance_table(n_ref)
    return float(np.interp(h, grid, d))


def hurst_pc_rate(u: float = 0.9, alpha: float = 0.1, n_ref: int = 100) -> float:
    """Rate lambda with P(H > u) = alpha under the exponential distance prior."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return -np.log(alpha) / hurst_distance(u, n_ref)


def pc_prior_hurst(h: float, lam: float, n_ref: int = 100) -> float:
    """Log PC prior density for a Hurst exponent (base model H = 0.5).

    Exponential with rate lam on the KLD distance scale, pushed to the
    H scale with the numerically differentiated distance Jacobian.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    h = fgn.validate_hurst(h)
    grid, d, dgrad = _hurst_distance_table(n_ref)
    dist = float(np.interp(h, grid, d))
    jac = float(np.interp(h, grid, dgrad))
    return float(np.log(lam) - lam * dist + np.log(jac))


def pc_prior_precision(tau: float, u: float, alpha: float) -> float:
    """Log PC prior for a precision: exponential on sigma = tau^-1/2 with
    P(sigma > u) = alpha; pi(tau) = (lam/2) tau^-3/2 exp(-lam tau^-1/2)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not 0 < alpha < 1 or u <= 0:
        raise ValueError("need u > 0 and alpha in (0, 1)")
    lam = -np.log(alpha) / u
    return float(np.log(lam / 2.0) - 1.5 * np.log(tau) - lam / np.sqrt(tau))


def laplace_prior_beta(beta: float) -> float:
    """Log density of the unit-scale Laplace prior for the amplitude slope."""
    return float(np.log(0.5) - abs(beta))


# ---------------------------------------------------------------------------
# hyperparameter bookkeeping


@dataclass(frozen=True)
class HyperParams:
    """Natural-scale hyperparameters of one model configuration."""

    tau: float
    h1: float
    h2: float
    beta: float | None = None
    log_prec_trend: float | None = None

    @property
    def has_beta(self) -> bool:
        return self.beta is not None

    @property
    def has_trend(self) -> bool:
        return self.log_prec_trend is not None

    def to_internal(self) -> np.ndarray:
        z = [np.log(self.tau), _g_of_h(self.h1), _g_of_h(self.h2)]
        if self.beta is not None:
            z.append(self.beta)
        if self.log_prec_trend is not None:
            z.append(self.log_prec_trend)
        return np.array(z)

    @classmethod
    def from_internal(cls, z, has_beta: bool, has_trend: bool) -> "HyperParams":
        beta = float(z[3]) if has_beta else None
        lpt = float(z[3 + has_beta]) if has_trend else None
        return cls(
            tau=float(np.exp(z[0])),
            h1=_h_of_g(z[1]),
            h2=_h_of_g(z[2]),
            beta=beta,
            log_prec_trend=lpt,
        )


def _g_of_h(h: float) -> float:
    u = (fgn.validate_hurst(h) - fgn.HURST_MIN) / _H_SPAN
    u = min(max(u, 1e-12), 1.0 - 1e-12)
    return float(np.log(u / (1.0 - u)))


def _h_of_g(g: float) -> float:
    return float(fgn.HURST_MIN + _H_SPAN / (1.0 + np.exp(-g)))


def _log_dh_dg(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    # log sigma(g) + log(1 - sigma(g)) in softplus form, finite for all g
    return np.log(_H_SPAN) - np.logaddexp(0.0, -g) - np.logaddexp(0.0, g)


# ---------------------------------------------------------------------------
# posterior exploration


def _log_posterior(z, spec, y, cfg: InferenceConfig, lam_h: float,
                   has_beta: bool, has_trend: bool) -> float:
    hp = HyperParams.from_internal(z, has_beta, has_trend)
    try:
        lml = lgm.log_marginal_likelihood(spec, hp, y)
    except lgm.NumericalError:
        return -np.inf
    lp = lml
    lp += pc_prior_precision(hp.tau, cfg.prec_u, cfg.prec_alpha) + z[0]
    lp += pc_prior_hurst(hp.h1, lam_h, cfg.hurst_n_ref) + _log_dh_dg(z[1])
    lp += pc_prior_hurst(hp.h2, lam_h, cfg.hurst_n_ref) + _log_dh_dg(z[2])
    if has_beta:
        lp += laplace_prior_beta(hp.beta)
    if has_trend:
        tau_t = np.exp(hp.log_prec_trend)
        lp += pc_prior_precision(tau_t, cfg.trend_u, cfg.trend_alpha)
        lp += hp.log_prec_trend
    return float(lp)


def _find_mode(neg, z0, bounds, cfg: InferenceConfig):
    """Quasi-Newton mode search with finite-difference gradients.

    Premature stops are caught downstream: the exploration layout recenters
    and re-optimizes when it sees a better point than the returned mode.
    """
    res = minimize(
        neg, np.asarray(z0, dtype=float), method="L-BFGS-B", bounds=bounds,
        jac="3-point",
        options=dict(maxiter=cfg.max_opt_iter, gtol=1e-3, ftol=1e-9),
    )
    if not np.isfinite(res.fun):
        raise InferenceError(
            f"posterior optimization diverged: {res.message}; trace: {res}"
        )
    return res.x, -float(res.fun)


def _fd_hessian(f, x0, f0, step=0.05):
    p = x0.size
    hess = np.empty((p, p))
    fp = np.empty(p)
    fm = np.empty(p)
    for i in range(p):
        e = np.zeros(p)
        e[i] = step
        fp[i] = f(x0 + e)
        fm[i] = f(x0 - e)
        hess[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / step**2
    for i in range(p):
        for j in range(i + 1, p):
            ei = np.zeros(p)
            ej = np.zeros(p)
            ei[i] = step
            ej[j] = step
            fpp = f(x0 + ei + ej)
            fmm = f(x0 - ei - ej)
            hess[i, j] = hess[j, i] = (
                fpp - fp[i] - fp[j] + 2.0 * f0 - fm[i] - fm[j] + fmm
            ) / (2.0 * step**2)
    return hess


def _ccd_design(p: int, f0: float):
    """Center + scaled fractional-factorial corners + axial points, with
    weights integrating a standard Gaussian exactly through order two."""
    radius = f0 * np.sqrt(p)
    if p <= 4:
        corners = np.array(
            [[(1 if (i >> b) & 1 else -1) for b in range(p)] for i in range(2**p)],
            dtype=float,
        )
        if p == 4:  # resolution-IV half fraction, defining relation ABCD = I
            corners = corners[np.prod(corners, axis=1) > 0]
    else:
        full = np.array(
            [[(1 if (i >> b) & 1 else -1) for b in range(p - 1)] for i in range(2**(p - 1))],
            dtype=float,
        )
        corners = np.column_stack([full, np.prod(full, axis=1)])
    corners = corners / np.sqrt(p) * radius
    axial = np.vstack([np.eye(p), -np.eye(p)]) * radius
    pts = np.vstack([np.zeros(p), corners, axial])
    n_s = pts.shape[0] - 1
    w_s = p / (n_s * radius**2)
    wts = np.full(pts.shape[0], w_s)
    wts[0] = 1.0 - n_s * w_s
    return pts, wts, radius


class HyperPosterior:
    """Weighted hyperparameter points with Gaussian caps and lazy per-point
    latent conditionals."""

    def __init__(self, spec, y, cfg, points_internal, log_post, weights,
                 mode_internal, cov_mode, cap_cov, has_beta, has_trend):
        self.spec = spec
        self.y = y
        self.config = cfg
        self.points_internal = points_internal
        self.log_post = log_post
        self.weights = weights
        self.mode_internal = mode_internal
        self.cov_mode = cov_mode
        self.cap_cov = cap_cov
        self.has_beta = has_beta
        self.has_trend = has_trend
        self._cap_chol = np.linalg.cholesky(cap_cov) if cap_cov is not None else None
        self._conditionals: dict[int, lgm.GaussianConditional] = {}

    @property
    def n_points(self) -> int:
        return self.points_internal.shape[0]

    @property
    def mode(self) -> HyperParams:
        return HyperParams.from_internal(self.mode_internal, self.has_beta, self.has_trend)

    def point(self, i: int) -> HyperParams:
        return HyperParams.from_internal(
            self.points_internal[i], self.has_beta, self.has_trend
        )

    def conditional(self, i: int | None = None) -> lgm.GaussianConditional:
        """Latent conditional at exploration point i (default: best point)."""
        if i is None:
            i = int(np.argmax(self.log_post))
        if i not in self._conditionals:
            self._conditionals[i] = lgm.condition_on_data(self.spec, self.point(i), self.y)
        return self._conditionals[i]

    def sample_internal(self, size: int, seed) -> np.ndarray:
        """Draw from the cap mixture in internal coordinates."""
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.n_points, size=size, p=self.weights)
        z = self.points_internal[idx]
        if self._cap_chol is not None:
            z = z + rng.standard_normal((size, z.shape[1])) @ self._cap_chol.T
        return z


def explore_posterior(
    spec, y, cfg: InferenceConfig | None = None, with_beta: bool = False
) -> HyperPosterior:
    """Locate the hyperparameter posterior mode, lay out integration points,
    and weight them by the evaluated posterior.

    Steps: (1) maximize the log posterior in the unconstrained
    parametrization (quasi-Newton with finite-difference gradients);
    (2) finite-difference curvature at the mode; (3) a standardized grid
    or CCD layout; (4) evaluation and weight normalization.  ``y`` is
    expected on the standardized scale for the default priors to make
    sense; ``with_beta`` switches on the time-varying amplitude.
    """
    cfg = (cfg or InferenceConfig()).validate()
    y = np.ascontiguousarray(y, dtype=float)
    has_beta = bool(with_beta)
    has_trend = spec.trend
    lam_h = hurst_pc_rate(cfg.hurst_u, cfg.hurst_alpha, cfg.hurst_n_ref)

    def neg(z):
        return -_log_posterior(z, spec, y, cfg, lam_h, has_beta, has_trend)

    z0 = [0.0, _g_of_h(0.70), _g_of_h(0.70)]
    bounds = [(-12.0, 12.0), (-10.0, 10.0), (-10.0, 10.0)]
    if has_beta:
        z0.append(0.0)
        bounds.append((-30.0, 30.0))
    if has_trend:
        z0.append(2.0)
        bounds.append((-12.0, 16.0))
    z0 = np.asarray(z0)

    def lp(z):
        return _log_posterior(z, spec, y, cfg, lam_h, has_beta, has_trend)

    mode, lp_mode = _find_mode(neg, z0, bounds, cfg)

    for attempt in range(3):
        hess = -_fd_hessian(lp, mode, lp_mode, step=0.05)
        eigval, eigvec = np.linalg.eigh(hess)
        # floor keeps near-flat (boundary-saturated) directions from exploding
        eigval = np.clip(eigval, 0.04, None)
        cov_mode = (eigvec / eigval) @ eigvec.T
        chol = np.linalg.cholesky(cov_mode)
        p = mode.size

        if cfg.strategy == "ccd":
            zpts, design_w, _ = _ccd_design(p, cfg.ccd_f0)
            pts = mode[None, :] + zpts @ chol.T
            lps = np.array([lp(x) for x in pts])
            lps[0] = lp_mode
            good = np.isfinite(lps)
            # correct the Gaussian design weights by the evaluated density ratio
            r2 = np.sum(zpts**2, axis=1)
            logw = np.where(good, np.log(design_w) + lps + 0.5 * r2, -np.inf)
            cap_scale = 0.25 if cfg.cap_scale == "auto" else float(cfg.cap_scale)
        else:
            delta = cfg.grid_delta
            radius = np.sqrt(2.0 * (cfg.grid_drop + 1.5)) / delta
            kmax = int(np.floor(radius))
            axes = np.arange(-kmax, kmax + 1)
            mesh = np.meshgrid(*([axes] * p), indexing="ij")
            kvec = np.stack([g.ravel() for g in mesh], axis=1)
            kvec = kvec[np.einsum("ij,ij->i", kvec, kvec) <= radius**2]
            pts = mode[None, :] + (delta * kvec) @ chol.T
            lps = np.array([lp(x) for x in pts])
            good = np.isfinite(lps)
            lps_max = lps[good].max()
            good &= lps >= lps_max - cfg.grid_drop
            logw = lps.copy()
            cap_scale = delta**2 / 12.0 if cfg.cap_scale == "auto" else float(cfg.cap_scale)

        best = int(np.nanargmax(np.where(np.isfinite(lps), lps, -np.inf)))
        if lps[best] <= lp_mode + 0.3 or attempt == 2:
            break
        # the layout found a better point: the optimizer undershot; recenter
        mode, lp_mode = _find_mode(neg, pts[best], bounds, cfg)

    pts = pts[good]
    lps = lps[good]
    logw = logw[good]
    if pts.shape[0] < 5:
        raise InferenceError(
            f"only {pts.shape[0]} usable exploration points; posterior layout failed"
        )
    w = np.exp(logw - logw.max())
    w /= w.sum()
    cap_cov = cap_scale * cov_mode if cap_scale > 0 else None
    return HyperPosterior(
        spec, y, cfg, pts, lps, w, mode, cov_mode, cap_cov, has_beta, has_trend
    )


# ---------------------------------------------------------------------------
# summaries and the decision statistic


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(25)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()

_TRANSFORMS = {
    "tau": (0, np.exp),
    "h1": (1, lambda g: fgn.HURST_MIN + _H_SPAN / (1.0 + np.exp(-g))),
    "h2": (2, lambda g: fgn.HURST_MIN + _H_SPAN / (1.0 + np.exp(-g))),
    "beta": (3, lambda x: x),
    "log_prec_trend": (-1, lambda x: x),
}


@dataclass(frozen=True)
class ParamSummary:
    name: str
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    grid: np.ndarray
    density: np.ndarray


def _axis_index(post: HyperPosterior, name: str) -> int:
    idx, _ = _TRANSFORMS[name]
    if name == "beta" and not post.has_beta:
        raise KeyError("posterior has no beta")
    if name == "log_prec_trend":
        if not post.has_trend:
            raise KeyError("posterior has no trend precision")
        return post.points_internal.shape[1] - 1
    return idx


def marginal_summaries(post: HyperPosterior) -> dict[str, ParamSummary]:
    """Mean, sd, equal-tailed 95% interval and a density curve per parameter,
    from the weighted Gaussian-cap mixture."""
    names = ["tau", "h1", "h2"]
    if post.has_beta:
        names.append("beta")
    if post.has_trend:
        names.append("log_prec_trend")
    out = {}
    for name in names:
        k = _axis_index(post, name)
        _, transform = _TRANSFORMS[name]
        mu = post.points_internal[:, k]
        sd = np.sqrt(post.cap_cov[k, k]) if post.cap_cov is not None else 0.0
        if sd > 0:
            nodes = mu[:, None] + sd * _GH_NODES[None, :]
            vals = transform(nodes)
            mean = float(np.sum(post.weights[:, None] * _GH_WEIGHTS[None, :] * vals))
            second = float(
                np.sum(post.weights[:, None] * _GH_WEIGHTS[None, :] * vals**2)
            )
        else:
            vals = transform(mu)
            mean = float(np.sum(post.weights * vals))
            second = float(np.sum(post.weights * vals**2))
        var = max(second - mean**2, 0.0)
        lo_int = _mixture_quantile(mu, sd, post.weights, 0.025)
        hi_int = _mixture_quantile(mu, sd, post.weights, 0.975)
        lo, hi = sorted((float(transform(lo_int)), float(transform(hi_int))))
        grid_int = np.linspace(
            _mixture_quantile(mu, sd, post.weights, 1e-4),
            _mixture_quantile(mu, sd, post.weights, 1.0 - 1e-4),
            201,
        )
        dens_int = _mixture_density(grid_int, mu, sd, post.weights)
        grid_nat = transform(grid_int)
        with np.errstate(divide="ignore", invalid="ignore"):
            jac = np.gradient(grid_int, grid_nat)
        dens_nat = dens_int * np.abs(jac)
        out[name] = ParamSummary(
            name=name, mean=mean, sd=float(np.sqrt(var)),
            ci_low=lo, ci_high=hi, grid=np.asarray(grid_nat), density=dens_nat,
        )
    return out


def _mixture_density(x, mu, sd, w):
    x = np.asarray(x, dtype=float)
    if sd <= 0:
        raise ValueError("degenerate caps have no density curve")
    z = (x[:, None] - mu[None, :]) / sd
    return (w[None, :] * np.exp(-0.5 * z**2) / (sd * np.sqrt(2 * np.pi))).sum(axis=1)


def _mixture_cdf(x, mu, sd, w):
    from scipy.stats import norm

    if sd <= 0:
        return float(np.sum(w[mu <= x]))
    return float(np.sum(w * norm.cdf((x - mu) / sd)))


def _mixture_quantile(mu, sd, w, q):
    lo = float(mu.min() - 8 * max(sd, 1e-8))
    hi = float(mu.max() + 8 * max(sd, 1e-8))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _mixture_cdf(mid, mu, sd, w) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ProbIncrease:
    """Posterior probability of H2 > H1 with the 95% interval of H2 - H1."""

    p_hat: float
    ci_low: float
    ci_high: float
    b: int
    warnings: tuple[str, ...] = ()


def prob_increase(post: HyperPosterior, b: int = 100_000, seed: int = 0) -> ProbIncrease:
    """Monte Carlo estimate of P(H2 - H1 > 0 | y) from the cap mixture,
    with the equal-tailed 95% interval for H2 - H1."""
    if b < 10_000:
        raise ValueError("b must be at least 10000")
    notes = []
    if post.weights.max() > 0.999:
        notes.append(
            f"posterior weight degenerate: one point carries {post.weights.max():.4f}"
        )
    z = post.sample_internal(b, seed)
    dh = _h_of_g_vec(z[:, 2]) - _h_of_g_vec(z[:, 1])
    p_hat = float(np.mean(dh > 0))
    lo, hi = np.quantile(dh, [0.025, 0.975])
    return ProbIncrease(p_hat=p_hat, ci_low=float(lo), ci_high=float(hi), b=b,
                        warnings=tuple(notes))


def _h_of_g_vec(g):
    return fgn.HURST_MIN + _H_SPAN / (1.0 + np.exp(-np.asarray(g, dtype=float)))
