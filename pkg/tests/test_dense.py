import csv

import numpy as np
import pytest

from auxsurv import CovarianceModel, NonPositiveDefinite, Priors, WeibullSurvival, build_grid
from auxsurv.dense import (MAX_DENSE_CELLS, StandardModel, benchmark, dense_cov, dense_field,
                           dense_posterior, dense_sqrt, loglog_slope, write_timings)
from auxsurv.posterior import ParameterState
from _helpers import fd_gradient, random_state, survival_data, survival_model


def test_dense_cov_is_symmetric_with_sigma2_diagonal(unit_grid):
    S = dense_cov(unit_grid, CovarianceModel(sigma2=0.7, phi=0.2))
    np.testing.assert_allclose(S, S.T)
    np.testing.assert_allclose(np.diag(S), 0.7)


def test_dense_sqrt_squares_back(rng):
    A = rng.normal(size=(6, 6))
    S = A @ A.T + np.eye(6)
    R = dense_sqrt(S)
    np.testing.assert_allclose(R, R.T, atol=1e-12)
    np.testing.assert_allclose(R @ R, S, atol=1e-10)
    with pytest.raises(NonPositiveDefinite):
        dense_sqrt(np.diag([1.0, -1.0]))


def test_dense_guard():
    big = build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), 7, 6)
    assert big.m > MAX_DENSE_CELLS
    with pytest.raises(ValueError):
        dense_cov(big, CovarianceModel())


def test_dense_field_zero_variance(unit_grid):
    np.testing.assert_array_equal(dense_field(unit_grid, CovarianceModel(sigma2=0.0), np.ones(unit_grid.m)), 0)


def test_dense_posterior_matches_fft_path(rng):
    model = survival_model(n=12, k=3, rng=rng)
    for _ in range(5):
        st = random_state(model, rng)
        assert dense_posterior(st, model) == pytest.approx(model.log_posterior(st)[0], rel=1e-10, abs=1e-10)


def standard_model(rng, n=15):
    data = survival_data(n, rng)
    return StandardModel(WeibullSurvival(data), Priors(log_sigma=(np.log(0.5), 0.3), log_phi=(np.log(0.3), 0.3)))


def test_standard_model_gradients(rng):
    sm = standard_model(rng)
    st = ParameterState(rng.normal(0, 0.3, sm.p), sm.outcome.default_omega() + rng.normal(0, 0.1, 2),
                        sm.priors.eta_mean[:2], rng.normal(size=sm.n))
    ev = sm.evaluate(st)

    def f_bo(x):
        b, o = sm.split_bo(x)
        return sm.evaluate(ParameterState(b, o, st.eta_t, st.gamma), False).logpost

    def f_g(g):
        return sm.evaluate(ParameterState(st.beta, st.omega_t, st.eta_t, g), False).logpost

    np.testing.assert_allclose(ev.grad_bo, fd_gradient(f_bo, np.concatenate([st.beta, st.omega_t])), rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(ev.grad_latent, fd_gradient(f_g, st.gamma), rtol=1e-5, atol=1e-6)


def test_standard_model_shapes(rng):
    sm = standard_model(rng, 10)
    st = sm.initial_state()
    assert (sm.dim_bo, sm.dim_eta, sm.dim_latent) == (sm.p + 2, 2, 10)
    assert st.gamma.shape == (10,)
    assert np.isfinite(sm.evaluate(st).logpost)


def test_loglog_slope():
    n = np.array([10.0, 20.0, 40.0, 80.0])
    assert loglog_slope(n, 3 * n ** 2) == pytest.approx(2.0)
    assert loglog_slope(n, 0.1 * n) == pytest.approx(1.0)


def test_small_benchmark_and_csv(tmp_path):
    rows = benchmark(dense_sizes=(20, 40), fourier_sizes=(50, 100), output_grids=(4,),
                     iterations=5, reps=1)
    assert [r.method for r in rows] == ["dense", "dense", "fourier", "fourier"]
    assert all(r.seconds_per_1000_iter > 0 for r in rows)
    assert rows[-1].grid == "4x4"
    path = tmp_path / "t.csv"
    write_timings(rows, path)
    with open(path) as fh:
        got = list(csv.DictReader(fh))
    assert len(got) == 4
    assert float(got[0]["seconds_per_1000_iter"]) == rows[0].seconds_per_1000_iter
