import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from auxsurv import build_grid, build_spectral, cov_value, gamma_to_field, sqrt_matvec
from auxsurv.dense import dense_cov, dense_sqrt
from auxsurv.spectral import (CovarianceModel, NonPositiveDefinite, cov_matvec, field_to_gamma,
                              inv_sqrt_matvec, spectral_from_base)


def grid(k=3, **kw):
    return build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), k, k, **kw)


def test_cov_value_at_zero():
    for sigma2, phi in [(1.0, 1.0), (0.3, 20.0)]:
        assert cov_value(CovarianceModel("exponential", sigma2, phi), 0.0) == sigma2
        assert cov_value(CovarianceModel("matern", sigma2, phi, 1.5), 0.0) == pytest.approx(sigma2)


def test_cov_value_table_median():
    # one range away at the fitted leukaemia medians
    c = cov_value(CovarianceModel("exponential", 0.387 ** 2, 5316.0), 5316.0)
    assert c == pytest.approx(0.387 ** 2 * np.exp(-1.0), rel=1e-14)
    assert c == pytest.approx(0.0551, abs=5e-5)


def test_matern_half_is_exponential():
    d = np.linspace(0.0, 5.0, 101)
    e = cov_value(CovarianceModel("exponential", 0.7, 1.3), d)
    m = cov_value(CovarianceModel("matern", 0.7, 1.3, 0.5), d)
    np.testing.assert_allclose(m, e, rtol=1e-12)


@given(st.sampled_from(["exponential", "matern"]), st.floats(0.1, 3.0), st.floats(0.05, 5.0))
def test_cov_value_monotone(kind, sigma2, phi):
    d = np.linspace(0.0, 10.0, 200)
    c = cov_value(CovarianceModel(kind, sigma2, phi, 1.0), d)
    assert np.all(np.diff(c) <= 1e-12)
    assert np.all(c >= 0)


def test_cov_value_rejects_negative_distance():
    with pytest.raises(ValueError):
        cov_value(CovarianceModel(), -1.0)
    with pytest.raises(ValueError):
        CovarianceModel("gaussian")
    with pytest.raises(ValueError):
        CovarianceModel(phi=0.0)


def test_base_invariants():
    sb = build_spectral(grid(), CovarianceModel("exponential", 0.5, 0.3))
    assert sb.base[0, 0] == 0.5
    ny, nx = sb.shape
    neg = sb.base[(-np.arange(ny)) % ny][:, (-np.arange(nx)) % nx]
    np.testing.assert_array_equal(sb.base, neg)
    assert sb.eigs.sum() == pytest.approx(sb.m * 0.5, rel=1e-12)
    full = np.fft.fft2(sb.base)
    assert np.max(np.abs(full.imag)) < 1e-12
    np.testing.assert_allclose(sb.eigs, full.real, atol=1e-12)


def test_delta_and_constant_spectra():
    g = grid()
    sb = build_spectral(g, CovarianceModel("exponential", 2.0, 1e-6))
    np.testing.assert_allclose(sb.eigs, 2.0, rtol=1e-10)
    const = spectral_from_base(np.full((8, 8), 0.25), check=False)
    expect = np.zeros((8, 8))
    expect[0, 0] = 64 * 0.25
    np.testing.assert_allclose(const.eigs, expect, atol=1e-12)


@pytest.mark.parametrize("kind", ["exponential", "matern"])
@pytest.mark.parametrize("k", [3, 4])
def test_eigs_match_dense(kind, k):
    g = grid(k)
    model = CovarianceModel(kind, 0.8, 0.2, 1.0)
    sb = build_spectral(g, model)
    w = np.linalg.eigvalsh(dense_cov(g, model))
    np.testing.assert_allclose(np.sort(sb.eigs.ravel()), w, rtol=1e-8, atol=1e-8 * w.max())


def test_sqrt_matvec_matches_dense(rng):
    g = grid()
    model = CovarianceModel("exponential", 0.8, 0.3)
    sb = build_spectral(g, model)
    S = dense_cov(g, model)
    v = rng.standard_normal(g.m)
    np.testing.assert_allclose(sqrt_matvec(sb, v), dense_sqrt(S) @ v, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(sqrt_matvec(sb, sqrt_matvec(sb, v)), S @ v, rtol=1e-10)
    np.testing.assert_allclose(cov_matvec(sb, v), S @ v, rtol=1e-10)


def test_sqrt_matvec_trivial_cases(rng):
    g = grid()
    sb = build_spectral(g, CovarianceModel("exponential", 2.0, 1e-6))
    v = rng.standard_normal(g.m)
    np.testing.assert_allclose(sqrt_matvec(sb, v), np.sqrt(2.0) * v, rtol=1e-8)
    assert np.all(sqrt_matvec(sb, np.zeros(g.m)) == 0)


@given(st.integers(0, 2 ** 32 - 1))
def test_sqrt_matvec_self_adjoint(seed):
    r = np.random.default_rng(seed)
    sb = build_spectral(grid(), CovarianceModel("matern", 1.0, 0.25, 1.0))
    u, v = r.standard_normal((2, 64))
    assert u @ sqrt_matvec(sb, v) == pytest.approx(sqrt_matvec(sb, u) @ v, rel=1e-10, abs=1e-10)


def test_batched_matvec(rng):
    sb = build_spectral(grid(), CovarianceModel("exponential", 1.0, 0.3))
    V = rng.standard_normal((5, 64))
    out = sqrt_matvec(sb, V)
    for i in range(5):
        np.testing.assert_allclose(out[i], sqrt_matvec(sb, V[i]), rtol=1e-12)


def test_gamma_to_field(rng):
    sb = build_spectral(grid(), CovarianceModel("exponential", 0.36, 0.3))
    np.testing.assert_allclose(gamma_to_field(sb, np.zeros(64)), -0.18)
    gam = rng.standard_normal(64)
    np.testing.assert_allclose(field_to_gamma(sb, gamma_to_field(sb, gam)), gam, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(inv_sqrt_matvec(sb, sqrt_matvec(sb, gam)), gam, atol=1e-9)
    zero = build_spectral(grid(), CovarianceModel("exponential", 0.0, 0.3))
    assert np.all(gamma_to_field(zero, gam) == 0)


def test_bbox_placement_invariance():
    a = build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), 3, 3)
    b = build_grid(np.array([[10.0, -5.0], [11.0, -4.0]]), 3, 3)
    m = CovarianceModel("exponential", 1.0, 0.4)
    np.testing.assert_allclose(build_spectral(a, m).eigs, build_spectral(b, m).eigs, rtol=1e-12)


def test_non_positive_definite():
    g = grid(ext_factor=2.0)
    with pytest.raises(NonPositiveDefinite) as err:
        build_spectral(g, CovarianceModel("exponential", 1.0, 1.0))
    assert err.value.min_eig <= 0 or err.value.min_eig < 1e-10
    assert err.value.phi == 1.0
    assert "ext_factor" in str(err.value)


def test_build_cost_near_linear():
    times = []
    sizes = [6, 7, 8, 9]
    for k in sizes:
        g = grid(k)
        model = CovarianceModel("exponential", 1.0, 0.05)
        lags = g.lag_distances()
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            for _ in range(5):
                build_spectral(g, model, lags=lags)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    m = 4.0 ** np.array(sizes)
    slope = np.polyfit(np.log(m), np.log(times), 1)[0]
    assert 0.6 < slope < 1.4
