"""Latent Gaussian model assembly and exact Gaussian conditioning.

The latent field stacks, per grid point, the two AR(1) cascades, the
mixture value and optionally a second-order random-walk trend; a global
intercept is a bordered rank-one block.  Interleaving variables by time
makes the joint precision banded, so factorizations, conditional means
and log marginal likelihoods cost O(n) via LAPACK banded Cholesky.

Two independent assemblies exist on purpose: the banded engine driving
inference, and a plain sparse block assembly (`assemble_joint_precision`)
kept as the reference surface; tests compare the two through dense
oracles.  The intrinsic trend prior is made proper by adding unit mass on
its level/slope null space; conditioning on the corresponding constraints
removes that mass again, so results do not depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve, cholesky_banded, cho_solve_banded

from tvfgn import ar1_cascade, fgn, mixture

OBS_LOG_PRECISION = 15.0
INTERCEPT_PRECISION = 1e-6
_PROPERIZE_WEIGHT = 1.0


class NumericalError(RuntimeError):
    """Factorization or conditioning failed; indicates an invalid model state."""


# ---------------------------------------------------------------------------
# rw2 structure and scaling


def rw2_structure(ng: int) -> sparse.csc_matrix:
    """Second-difference penalty matrix D2'D2 (intrinsic rw2, unit weight)."""
    if ng < 3:
        raise ValueError("rw2 needs at least 3 grid points")
    d2 = sparse.diags(
        [np.ones(ng - 2), -2.0 * np.ones(ng - 2), np.ones(ng - 2)],
        [0, 1, 2],
        shape=(ng - 2, ng),
        format="csc",
    )
    return (d2.T @ d2).tocsc()


def rw2_constraints(ng: int) -> np.ndarray:
    """Level and slope constraint rows (normalized) spanning the rw2 null space."""
    level = np.ones(ng) / np.sqrt(ng)
    t = np.arange(ng, dtype=float)
    t -= t.mean()
    slope = t / np.linalg.norm(t)
    return np.vstack([level, slope])


_RW2_SCALE_CACHE: dict[int, float] = {}
_RW2_LOGDET_CACHE: dict[int, float] = {}


def rw2_scale(ng: int) -> float:
    """Precision multiplier making the constrained unit-precision rw2 have
    geometric-mean marginal variance 1."""
    if ng not in _RW2_SCALE_CACHE:
        s = rw2_structure(ng).toarray()
        a = rw2_constraints(ng)
        q = s + _PROPERIZE_WEIGHT * (a.T @ a)
        cov = np.linalg.inv(q)
        gain = cov @ a.T
        cov_c = cov - gain @ np.linalg.solve(a @ gain, gain.T)
        v = np.diag(cov_c)
        _RW2_SCALE_CACHE[ng] = float(np.exp(np.mean(np.log(v))))
    return _RW2_SCALE_CACHE[ng]


def rw2_generalized_logdet(ng: int) -> float:
    """Log product of the nonzero eigenvalues of the unit rw2 structure."""
    if ng not in _RW2_LOGDET_CACHE:
        eig = np.linalg.eigvalsh(rw2_structure(ng).toarray())
        _RW2_LOGDET_CACHE[ng] = float(np.sum(np.log(eig[2:])))
    return _RW2_LOGDET_CACHE[ng]


# ---------------------------------------------------------------------------
# model specification


@dataclass
class LatentModelSpec:
    """Structure of the latent model: mixture component, optional rw2 trend
    and intercept, observation mapping, fixed observation precision.

    Regularly sampled series put the latent grid on the observation times;
    otherwise a regular grid with the given step (default: half the mean
    spacing) is used and observations interpolate between grid neighbours.
    The weight function and the amplitude profile live on the grid span.
    """

    timestamps: np.ndarray
    m: int = 4
    trend: bool = False
    intercept: bool = False
    grid_step: float | None = None
    obs_log_precision: float = OBS_LOG_PRECISION
    intercept_precision: float = INTERCEPT_PRECISION
    weights: np.ndarray | None = None
    table: ar1_cascade.CoefficientTable | None = field(default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing, length >= 2")
        self.timestamps = t
        if self.table is None:
            self.table = ar1_cascade.packaged_table(self.m)
        dt = np.diff(t)
        regular = bool(np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12))
        if regular and self.grid_step is None:
            self.grid = t
            self.interp = None
        else:
            step = self.grid_step
            if step is None:
                step = (t[-1] - t[0]) / (2.0 * (t.size - 1))
            self.interp, self.grid = mixture.interpolation_matrix(t, step)
        self.ng = int(self.grid.size)
        self.u_grid = mixture.linear_weight(self.grid)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != self.grid.shape:
                raise ValueError("weights must be given on the latent grid")
            self.w_grid = w
        else:
            self.w_grid = self.u_grid
        # interleaved layout: per grid point [z1_1..z1_m, z2_1..z2_m, eps, (mu)]
        self.block = 2 * self.m + 1 + (1 if self.trend else 0)
        self.off_eps = 2 * self.m
        self.off_mu = 2 * self.m + 1
        self.nband = self.ng * self.block
        self.halfbw = 2 * self.block if self.trend else self.block
        if self.trend and self.ng < 5:
            raise ValueError("trend requires at least 5 grid points")
        self._build_observation_pieces()

    @property
    def n(self) -> int:
        return self.timestamps.size

    @property
    def tau_obs(self) -> float:
        return float(np.exp(self.obs_log_precision))

    def sigma_grid(self, beta: float | None) -> np.ndarray:
        if beta is None:
            return np.ones(self.ng)
        return 0.5 + 1.0 / (1.0 + np.exp(-beta * (self.u_grid - 0.5)))

    def total_dim(self) -> int:
        return self.nband + (1 if self.intercept else 0)

    # -- observation machinery (theta-independent, built once) --

    def _build_observation_pieces(self):
        k = self.block
        n = self.n
        if self.interp is None:
            rows = np.arange(n)
            cols = np.arange(self.ng) * k + self.off_eps
            data = np.ones(n)
            p = sparse.csr_matrix((data, (rows, cols)), shape=(n, self.nband))
            if self.trend:
                p = p + sparse.csr_matrix(
                    (data, (rows, np.arange(self.ng) * k + self.off_mu)),
                    shape=(n, self.nband),
                )
        else:
            a = self.interp.tocoo()
            rows = a.row
            cols = a.col * k + self.off_eps
            data = a.data
            p = sparse.csr_matrix((data, (rows, cols)), shape=(n, self.nband))
            if self.trend:
                p = p + sparse.csr_matrix(
                    (data, (rows, a.col * k + self.off_mu)), shape=(n, self.nband)
                )
        self.p_lat = p.tocsr()
        ty = self.tau_obs
        ptp = (self.p_lat.T @ self.p_lat).tocoo() * ty
        band = np.zeros((self.halfbw + 1, self.nband))
        mask = ptp.row >= ptp.col
        np.add.at(band, (ptp.row[mask] - ptp.col[mask], ptp.col[mask]), ptp.data[mask])
        self.band_obs = band
        self.c_obs = ty * np.asarray(self.p_lat.sum(axis=0)).ravel()
        self.d_obs = ty * n

    def obs_rhs(self, y: np.ndarray) -> np.ndarray:
        """Right-hand side P' tau_y y, extended with the intercept row."""
        b = self.tau_obs * (self.p_lat.T @ y)
        if self.intercept:
            b = np.concatenate([b, [self.tau_obs * float(y.sum())]])
        return b

    def constraint_rows(self) -> np.ndarray | None:
        if not self.trend:
            return None
        a_mu = rw2_constraints(self.ng)
        a = np.zeros((2, self.total_dim()))
        a[:, self.off_mu::self.block][:, : self.ng] = a_mu
        return a

    # -- component index maps (band order -> block order) --

    def component_indices(self) -> dict[str, np.ndarray]:
        k = self.block
        base = np.arange(self.ng) * k
        idx = {"eps": base + self.off_eps}
        for comp, off in (("z1", 0), ("z2", self.m)):
            idx[comp] = np.concatenate([base + off + j for j in range(self.m)])
        if self.trend:
            idx["trend"] = base + self.off_mu
        return idx

    def block_permutation(self) -> np.ndarray:
        """Band-order indices arranged as [eps, Z1, Z2, (trend)] block order."""
        idx = self.component_indices()
        parts = [idx["eps"], idx["z1"], idx["z2"]]
        if self.trend:
            parts.append(idx["trend"])
        return np.concatenate(parts)


def _theta_values(theta):
    """Accept a mapping or an object with tau/h1/h2/beta/log_prec_trend."""
    if isinstance(theta, dict):
        get = theta.get
    else:
        def get(key, default=None):
            return getattr(theta, key, default)
    tau = float(get("tau"))
    h1 = fgn.validate_hurst(get("h1"))
    h2 = fgn.validate_hurst(get("h2"))
    beta = get("beta", None)
    lpt = get("log_prec_trend", None)
    if tau <= 0:
        raise ValueError("tau must be positive")
    return (
        tau,
        h1,
        h2,
        None if beta is None else float(beta),
        None if lpt is None else float(lpt),
    )


# ---------------------------------------------------------------------------
# banded assembly


def _write_mixture_band(spec: LatentModelSpec, theta, ab: np.ndarray, k: int):
    """Add the stacked mixture precision into band storage with stride k."""
    tau, h1, h2, beta, _ = _theta_values(theta)
    ng = spec.ng
    th = mixture.TAU_HIGH
    s_inv = 1.0 / np.sqrt(tau)
    c1 = spec.table.lookup(h1)
    c2 = spec.table.lookup(h2)
    sig = spec.sigma_grid(beta)
    d1 = np.sqrt(1.0 - spec.w_grid) * sig
    d2 = np.sqrt(spec.w_grid) * sig
    u1 = np.sqrt(c1.v)
    u2 = np.sqrt(c2.v)
    g11 = (th / tau) * d1 * d1
    g22 = (th / tau) * d2 * d2
    g12 = (th / tau) * d1 * d2
    f1 = -s_inv * th * d1
    f2 = -s_inv * th * d2

    m = spec.m
    oe = spec.off_eps
    ab[0, oe::k] += th
    for j in range(m):
        ab[oe - j, j::k] += u1[j] * f1
        ab[oe - (m + j), (m + j)::k] += u2[j] * f2
    for j in range(m):
        for kk in range(j, m):
            ab[kk - j, j::k] += u1[j] * u1[kk] * g11
            ab[kk - j, (m + j)::k] += u2[j] * u2[kk] * g22
    for j in range(m):
        for kk in range(m):
            # z2_kk couples z1_j; z2 offsets sit above all z1 offsets
            ab[m + kk - j, j::k] += u1[j] * u2[kk] * g12
    for j in range(m):
        for col, phi in ((j, c1.phi[j]), (m + j, c2.phi[j])):
            kap = 1.0 / (1.0 - phi * phi)
            diag = np.full(ng, (1.0 + phi * phi) * kap)
            diag[0] = diag[-1] = kap
            ab[0, col::k] += diag
            ab[k, col::k][:-1] += -phi * kap


def _trend_precision_factor(spec: LatentModelSpec, theta) -> float:
    _, _, _, _, lpt = _theta_values(theta)
    if lpt is None:
        raise ValueError("trend model requires log_prec_trend in theta")
    return float(np.exp(lpt)) * rw2_scale(spec.ng)


def _assemble_posterior_band(spec: LatentModelSpec, theta):
    """Lower-banded posterior precision (without the null-space properization,
    which is returned as Woodbury columns)."""
    k = spec.block
    ng = spec.ng
    ab = np.zeros((spec.halfbw + 1, spec.nband))
    _write_mixture_band(spec, theta, ab, k)
    w_prop = np.zeros((spec.nband, 0))
    if spec.trend:
        tau_t = _trend_precision_factor(spec, theta)
        om = spec.off_mu
        diag = np.full(ng, 6.0)
        diag[[0, -1]] = 1.0
        diag[[1, -2]] = 5.0
        off1 = np.full(ng - 1, -4.0)
        off1[[0, -1]] = -2.0
        off2 = np.full(ng - 2, 1.0)
        ab[0, om::k] += tau_t * diag
        ab[k, om::k][:-1] += tau_t * off1
        ab[2 * k, om::k][:-2] += tau_t * off2
        w_prop = np.zeros((spec.nband, 2))
        w_prop[om::k, :] = np.sqrt(_PROPERIZE_WEIGHT) * rw2_constraints(ng).T
    ab += spec.band_obs
    return ab, w_prop


def _prior_logdet(spec: LatentModelSpec, theta) -> float:
    """logdet of the properized prior precision, by component blocks.

    The prior is block-diagonal across mixture, trend and intercept.  The
    mixture block is banded positive definite; the properized intrinsic
    trend block has closed-form determinant since the added mass sits
    exactly on its (orthonormal) null-space rows.
    """
    k0 = 2 * spec.m + 1
    ab = np.zeros((k0 + 1, spec.ng * k0))
    _write_mixture_band(spec, theta, ab, k0)
    try:
        cb = cholesky_banded(ab, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"prior factorization failed: {exc}") from exc
    logdet = 2.0 * float(np.sum(np.log(cb[0])))
    if spec.trend:
        tau_t = _trend_precision_factor(spec, theta)
        logdet += (
            (spec.ng - 2) * np.log(tau_t)
            + rw2_generalized_logdet(spec.ng)
            + 2.0 * np.log(_PROPERIZE_WEIGHT)
        )
    if spec.intercept:
        logdet += float(np.log(spec.intercept_precision))
    return logdet


# ---------------------------------------------------------------------------
# factorization: banded core + low-rank columns + optional intercept border


class _Factor:
    """Cholesky of (band + W W') with an optional bordered scalar block."""

    def __init__(self, ab, w=None, border=None):
        try:
            self.cb = cholesky_banded(ab, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"banded Cholesky failed: {exc}") from exc
        self.n_band = ab.shape[1]
        self.w = w if (w is not None and w.shape[1]) else None
        self.logdet = 2.0 * float(np.sum(np.log(self.cb[0])))
        if self.w is not None:
            self.biw = self._band_solve(self.w)
            cap = np.eye(self.w.shape[1]) + self.w.T @ self.biw
            self.cap_cf = cho_factor(cap)
            self.logdet += float(np.linalg.slogdet(cap)[1])
        self.border = None
        if border is not None:
            c, d = border
            mc = self._core_solve(c)
            schur = d - float(c @ mc)
            if schur <= 0:
                raise NumericalError("intercept block is not positive definite")
            self.border = (c, float(d), mc, schur)
            self.logdet += float(np.log(schur))

    def _band_solve(self, b):
        return cho_solve_banded((self.cb, True), b)

    def _core_solve(self, b):
        x = self._band_solve(b)
        if self.w is not None:
            x = x - self.biw @ cho_solve(self.cap_cf, self.w.T @ x)
        return x

    def solve(self, b):
        """Solve the full system; b is (dim,) or (dim, k)."""
        b = np.asarray(b, dtype=float)
        if self.border is None:
            return self._core_solve(b)
        c, _, mc, schur = self.border
        b_lat, b0 = b[:-1], b[-1]
        x_lat = self._core_solve(b_lat)
        x0 = (b0 - c @ x_lat) / schur
        if np.ndim(x0) == 0:
            return np.concatenate([x_lat - mc * x0, [x0]])
        return np.vstack([x_lat - mc[:, None] * x0[None, :], x0[None, :]])

    @property
    def dim(self) -> int:
        return self.n_band + (1 if self.border else 0)


def _posterior_factor(spec: LatentModelSpec, theta) -> _Factor:
    ab, w = _assemble_posterior_band(spec, theta)
    border = None
    if spec.intercept:
        border = (spec.c_obs, spec.intercept_precision + spec.d_obs)
    return _Factor(ab, w=w, border=border)


# ---------------------------------------------------------------------------
# public operations


def assemble_joint_precision(spec: LatentModelSpec, theta):
    """Reference sparse assembly of the joint latent prior precision.

    Returns (Q, constraints) in block order [eps, Z1, Z2, (trend), (intercept)];
    constraints are the trend level/slope rows (or None).  The mixture block
    is exactly the stacked precision of the mixture component on the grid.
    """
    tau, h1, h2, beta, lpt = _theta_values(theta)
    mspec = mixture.MixtureSpec(
        h1=h1,
        h2=h2,
        timestamps=spec.grid,
        tau=tau,
        beta=beta,
        m=spec.m,
        weights=spec.weights,
    )
    blocks = [mixture.stacked_precision(mspec, table=spec.table)]
    if spec.trend:
        if lpt is None:
            raise ValueError("trend model requires log_prec_trend in theta")
        tau_t = float(np.exp(lpt)) * rw2_scale(spec.ng)
        s = rw2_structure(spec.ng) * tau_t
        a_mu = rw2_constraints(spec.ng)
        s = s + sparse.csc_matrix(
            _PROPERIZE_WEIGHT * (a_mu.T @ a_mu)
        )
        blocks.append(s)
    if spec.intercept:
        blocks.append(sparse.csc_matrix(np.array([[spec.intercept_precision]])))
    q = sparse.block_diag(blocks, format="csc")
    constraints = None
    if spec.trend:
        ncols = q.shape[0]
        n_mix = spec.ng * (1 + 2 * spec.m)
        constraints = np.zeros((2, ncols))
        constraints[:, n_mix:n_mix + spec.ng] = rw2_constraints(spec.ng)
    return q, constraints


def _band_to_block_perm(spec: LatentModelSpec) -> np.ndarray:
    """Index array p such that x_block = x_band[p] (intercept appended)."""
    k = spec.block
    base = np.arange(spec.ng) * k
    parts = [base + spec.off_eps]
    for off in (0, spec.m):
        parts.extend(base + off + j for j in range(spec.m))
    if spec.trend:
        parts.append(base + spec.off_mu)
    return np.concatenate(parts)


class GaussianConditional:
    """Gaussian conditional of the latent field given data and hyperparameters.

    Holds the constrained posterior mean (block order), the factorized
    posterior precision, and the log-determinant bookkeeping needed for
    the marginal likelihood.
    """

    def __init__(self, spec: LatentModelSpec, theta, y: np.ndarray):
        y = np.ascontiguousarray(y, dtype=float)
        if y.shape != (spec.n,):
            raise ValueError(f"y must have length {spec.n}")
        self.spec = spec
        self.theta = theta
        logdet_prior = _prior_logdet(spec, theta)
        post = _posterior_factor(spec, theta)
        self._post = post
        b = spec.obs_rhs(y)
        mean_u = post.solve(b)
        ty = spec.tau_obs
        n = spec.n
        lml = (
            -0.5 * n * np.log(2.0 * np.pi)
            + 0.5 * (logdet_prior + n * np.log(ty) - post.logdet)
            - 0.5 * (ty * float(y @ y) - float(b @ mean_u))
        )
        self._a = spec.constraint_rows()
        self._correction = None
        if self._a is not None:
            v_post = post.solve(self._a.T)
            s_post = self._a @ v_post
            resid = self._a @ mean_u
            lml += _gauss_logpdf(resid, s_post)
            # prior constraint covariance is (1/c) I for the orthonormal
            # null-space rows carrying properization mass c
            s_prior = np.eye(self._a.shape[0]) / _PROPERIZE_WEIGHT
            lml -= _gauss_logpdf(np.zeros(self._a.shape[0]), s_prior)
            gain = np.linalg.solve(s_post, resid)
            mean_u = mean_u - v_post @ gain
            self._correction = (v_post, s_post)
        self.log_marginal = float(lml)
        self.logdet_prior = logdet_prior
        self.logdet_post = post.logdet
        self._mean_full = mean_u
        perm = _band_to_block_perm(spec)
        if spec.intercept:
            self.mean = np.concatenate([mean_u[:-1][perm], mean_u[-1:]])
        else:
            self.mean = mean_u[perm]
        self._perm = perm

    @property
    def dim(self) -> int:
        return self.spec.total_dim()

    def component_mean(self, name: str) -> np.ndarray:
        idx = self.spec.component_indices()
        if name == "intercept":
            if not self.spec.intercept:
                raise KeyError("model has no intercept")
            return self._mean_full[-1:]
        return self._mean_full[idx[name]]

    def component_variances(self, name: str) -> np.ndarray:
        """Constrained posterior marginal variances of one component."""
        if name == "intercept":
            if not self.spec.intercept:
                raise KeyError("model has no intercept")
            cols = np.array([self.dim - 1])
        else:
            cols = self.spec.component_indices()[name]
        rhs = np.zeros((self.dim, cols.size))
        rhs[cols, np.arange(cols.size)] = 1.0
        x = self._post.solve(rhs)
        var = x[cols, np.arange(cols.size)].copy()
        if self._correction is not None:
            v_post, s_post = self._correction
            vc = v_post[cols]
            var -= np.einsum("ij,ij->i", vc @ np.linalg.inv(s_post), vc)
        return np.maximum(var, 0.0)

    def predictor_mean(self) -> np.ndarray:
        """Posterior mean of the observation-scale predictor (eps + trend
        + intercept at the observation times)."""
        latent = self._mean_full[:-1] if self.spec.intercept else self._mean_full
        pred = self.spec.p_lat @ latent
        if self.spec.intercept:
            pred = pred + self._mean_full[-1]
        return pred


def _gauss_logpdf(x: np.ndarray, cov: np.ndarray) -> float:
    k = len(x)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise NumericalError("constraint covariance is not positive definite")
    quad = float(x @ np.linalg.solve(cov, x))
    return -0.5 * (k * np.log(2.0 * np.pi) + logdet + quad)


def condition_on_data(spec: LatentModelSpec, theta, y) -> GaussianConditional:
    """Gaussian conditional of the latent field given observations."""
    return GaussianConditional(spec, theta, np.asarray(y, dtype=float))


def log_marginal_likelihood(spec: LatentModelSpec, theta, y) -> float:
    """Exact log integral of the Gaussian likelihood against the latent prior,
    with level/slope constraint corrections when a trend is present."""
    return condition_on_data(spec, theta, y).log_marginal
