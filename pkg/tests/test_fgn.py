"""fGn primitives: ACF values, simulation, log-density, spectral KLD."""

import numpy as np
import pytest
from scipy.linalg import cho_factor, cholesky, toeplitz
from scipy.stats import multivariate_normal

from tvfgn import fgn, mixture


def tail_slope(row, lo=100, hi=1000):
    k = np.arange(lo, hi + 1)
    return np.polyfit(np.log(k), np.log(row[lo:hi + 1]), 1)[0]


class TestAcf:
    def test_white_noise(self):
        np.testing.assert_array_equal(fgn.acf(0.5, 4), [1.0, 0.0, 0.0, 0.0])

    def test_lag_one_closed_form(self):
        # rho(1) = 2^(2H-1) - 1
        assert fgn.acf(0.8, 2)[1] == pytest.approx(2**0.6 - 1, abs=1e-12)
        assert fgn.acf(0.8, 2)[1] == pytest.approx(0.515717, abs=1e-6)

    @pytest.mark.parametrize("h", [0.6, 0.75, 0.9])
    def test_power_law_tail(self, h):
        row = fgn.acf(h, 1001)
        assert tail_slope(row) == pytest.approx(2 * (h - 1), abs=0.02)

    def test_domain_validation(self):
        for bad in (0.3, 0.995, 1.2, np.nan):
            with pytest.raises(ValueError):
                fgn.acf(bad, 10)
        with pytest.raises(ValueError):
            fgn.acf(0.7, 0)

    @pytest.mark.parametrize("h", [0.5, 0.7, 0.99])
    def test_positive_definite(self, h):
        cholesky(toeplitz(fgn.acf(h, 150)))


class TestSimulate:
    def test_white_noise_uncorrelated(self):
        x = fgn.simulate(0.5, 10_000, seed=1)
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert abs(r1) < 0.03

    def test_monte_carlo_acf(self):
        # the process mean is known to be zero, so no sample centering
        # (centering biases the lag-1 estimate down for long memory)
        target = fgn.acf(0.9, 2)[1]
        acfs = []
        for s in np.random.SeedSequence(2).spawn(50):
            x = fgn.simulate(0.9, 10_000, s)
            acfs.append(float(x[:-1] @ x[1:] / (x @ x)))
        assert np.mean(acfs) == pytest.approx(target, abs=0.02)

    def test_deterministic(self):
        a = fgn.simulate(0.7, 100, seed=11)
        b = fgn.simulate(0.7, 100, seed=11)
        np.testing.assert_array_equal(a, b)

    def test_path_report(self):
        x, path = fgn.simulate(0.8, 256, seed=0, return_info=True)
        assert path in ("circulant", "cholesky")
        assert x.shape == (256,)

    def test_cholesky_fallback_matches_distribution(self, rng):
        # force the fallback and check the sample variance is sane
        x = fgn._simulate_cholesky(0.9, 500, rng)
        assert 0.3 < x.std() < 2.5


class TestLogdensity:
    def test_standard_normal_origin(self):
        val = fgn.logdensity(np.zeros(3), 0.5, tau=1.0)
        assert val == pytest.approx(-1.5 * np.log(2 * np.pi), abs=1e-12)

    def test_dense_oracle(self, rng):
        x = rng.standard_normal(50)
        ours = fgn.logdensity(x, 0.7, tau=1.0)
        ref = multivariate_normal(
            mean=np.zeros(50), cov=toeplitz(fgn.acf(0.7, 50))
        ).logpdf(x)
        assert ours == pytest.approx(ref, rel=1e-8)

    def test_dense_oracle_many(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 200))
            h = rng.uniform(0.5, 0.99)
            tau = rng.uniform(0.2, 4.0)
            x = rng.standard_normal(n)
            ours = fgn.logdensity(x, h, tau)
            ref = multivariate_normal(
                mean=np.zeros(n), cov=toeplitz(fgn.acf(h, n)) / tau
            ).logpdf(x)
            assert ours == pytest.approx(ref, rel=1e-8)

    def test_scaling_identity(self, rng):
        x = rng.standard_normal(30)
        c = 2.7
        base = fgn.logdensity(x, 0.8, tau=1.3)
        scaled = fgn.logdensity(c * x, 0.8, tau=1.3 / c**2)
        assert scaled == pytest.approx(base - 30 * np.log(c), rel=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            fgn.logdensity(np.array([1.0, np.inf]), 0.7)
        with pytest.raises(ValueError):
            fgn.logdensity(np.array([]), 0.7)
        with pytest.raises(ValueError):
            fgn.logdensity(np.ones(3), 0.7, tau=-1.0)


class TestStationaryKld:
    def test_self_zero(self):
        row = fgn.acf(0.8, 128)
        assert fgn.stationary_kld(row, row) == pytest.approx(0.0, abs=1e-10)

    def test_nonnegative_and_asymmetric(self, rng):
        asym = 0
        for _ in range(50):
            n = int(rng.integers(8, 200))
            p = fgn.acf(rng.uniform(0.5, 0.99), n) / rng.uniform(0.5, 2.0)
            q = fgn.acf(rng.uniform(0.5, 0.99), n) / rng.uniform(0.5, 2.0)
            fwd = fgn.stationary_kld(p, q)
            bwd = fgn.stationary_kld(q, p)
            assert fwd >= -1e-12 and bwd >= -1e-12
            if abs(fwd - bwd) > 1e-9:
                asym += 1
        assert asym > 40  # divergence, not a metric

    def test_minimizer_beats_endpoint(self):
        # the H2 endpoint is a worse match than the KLD-optimal H for w=0.5
        row = mixture.mixture_acf_row(0.5, 0.6, 0.8, 512)
        h_star = mixture.kld_map_weight_to_hurst(0.5, 0.6, 0.8, 512)
        at_star = fgn.stationary_kld(row, fgn.acf(h_star, 512))
        at_h2 = fgn.stationary_kld(row, fgn.acf(0.8, 512))
        assert h_star == pytest.approx(0.70, abs=0.015)
        assert at_h2 > at_star

    def test_invalid_covariance_rejected(self):
        row = fgn.acf(0.7, 64)
        bad = row.copy()
        bad[1:] = 0.99  # not a valid correlation row: circulant goes negative
        with pytest.raises(ValueError):
            fgn.stationary_kld(row, bad)
        with pytest.raises(ValueError):
            fgn.stationary_kld(row, row[:-1])
