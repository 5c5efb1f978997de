"""Compiled and pure-python Levinson kernels agree with each other and with
dense linear algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import cho_factor, cho_solve, toeplitz

from tvfgn import _kernels, fgn
from tvfgn._kernels import _levinson_py

try:
    from tvfgn._kernels import _levinson as _compiled
except ImportError:
    _compiled = None

BACKENDS = [_levinson_py] + ([_compiled] if _compiled is not None else [])


def random_row(rng, n):
    h = rng.uniform(0.5, 0.99)
    tau = rng.uniform(0.2, 5.0)
    return fgn.acf(h, n) / tau


@pytest.mark.parametrize("backend", BACKENDS)
def test_quadform_matches_dense(backend, rng):
    for _ in range(10):
        n = int(rng.integers(2, 60))
        r = random_row(rng, n)
        x = rng.standard_normal(n)
        quad, logdet = backend.durbin_quadform(r, x)
        cov = toeplitz(r)
        cf = cho_factor(cov)
        quad_ref = float(x @ cho_solve(cf, x))
        logdet_ref = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
        assert quad == pytest.approx(quad_ref, rel=1e-9)
        assert logdet == pytest.approx(logdet_ref, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_whitening_consistent_with_quadform(backend, rng):
    n = 40
    r = random_row(rng, n)
    w, v = backend.durbin_whitening(r)
    x = rng.standard_normal(n)
    e = x @ w
    assert float(np.sum(e * e / v)) == pytest.approx(
        backend.durbin_quadform(r, x)[0], rel=1e-10
    )
    assert float(np.sum(np.log(v))) == pytest.approx(
        backend.durbin_logdet(r), rel=1e-10
    )


@pytest.mark.skipif(_compiled is None, reason="extension not built")
def test_backends_agree(rng):
    for _ in range(8):
        n = int(rng.integers(2, 80))
        r = random_row(rng, n)
        x = rng.standard_normal(n)
        qc, lc = _compiled.durbin_quadform(r, x)
        qp, lp = _levinson_py.durbin_quadform(r, x)
        assert qc == pytest.approx(qp, rel=1e-12)
        assert lc == pytest.approx(lp, rel=1e-12)
        wc, vc = _compiled.durbin_whitening(r)
        wp, vp = _levinson_py.durbin_whitening(r)
        np.testing.assert_allclose(wc, wp, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(vc, vp, rtol=1e-12)


@given(h=st.floats(0.5, 0.99), n=st.integers(2, 40), seed=st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_quadform_property(h, n, seed):
    r = fgn.acf(h, n)
    x = np.random.default_rng(seed).standard_normal(n)
    quad, logdet = _kernels.durbin_quadform(r, x)
    cov = toeplitz(r)
    cf = cho_factor(cov)
    assert quad == pytest.approx(float(x @ cho_solve(cf, x)), rel=1e-8)
    assert logdet == pytest.approx(
        2.0 * float(np.sum(np.log(np.diag(cf[0])))), rel=1e-8, abs=1e-8
    )


@pytest.mark.parametrize("backend", BACKENDS)
def test_rejects_non_positive_definite(backend):
    bad = np.array([1.0, 1.5, 0.2])
    with pytest.raises(ValueError):
        backend.durbin_quadform(bad, np.zeros(3))
    with pytest.raises(ValueError):
        backend.durbin_whitening(bad)
    with pytest.raises(ValueError):
        backend.durbin_logdet(np.array([-1.0, 0.0]))
