import numpy as np
import pytest
from hypothesis import given, strategies as st

from auxsurv import Priors, SpatialModel, SurvivalData, WeibullSurvival, build_grid
from auxsurv.dense import dense_posterior, dense_sqrt, dense_cov
from auxsurv.posterior import ParameterState, log_posterior, normal_logpdf, try_evaluate
from auxsurv.spectral import NonPositiveDefinite

from _helpers import fd_gradient, poisson_model, random_state, survival_model


def _lp(model, state):
    return model.log_posterior(state)[0]


def test_empty_data_is_prior():
    grid = build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), 2, 2)
    data = SurvivalData(np.zeros(0), np.zeros(0), np.zeros((0, 2)), np.zeros((0, 1)))
    pri = Priors(log_phi=(np.log(0.2), 0.3))
    model = SpatialModel(WeibullSurvival(data), grid, pri)
    rng = np.random.default_rng(1)
    s = ParameterState([0.3], [0.1, -0.2], [-0.5, np.log(0.2)], rng.normal(size=grid.m))
    expect = (pri.logpdf(s.beta, s.omega_t, s.eta_t) + normal_logpdf(s.gamma, 0.0, 1.0))
    assert _lp(model, s) == pytest.approx(expect, rel=1e-13)
    np.testing.assert_allclose(model.grad_gamma(s), -s.gamma)


def test_zero_gamma_gives_shifted_predictor(rng):
    model = survival_model(rng=rng)
    s = random_state(model, rng)
    s.gamma[:] = 0.0
    Y = model.log_posterior(s)[1]
    eta = model.linear_predictor(s, Y)
    np.testing.assert_allclose(eta, model.outcome.X @ s.beta - s.sigma2 / 2)


def test_equals_dense_oracle(rng):
    model = survival_model(n=5, k=2, rng=rng)
    for _ in range(20):
        s = random_state(model, rng)
        assert _lp(model, s) == pytest.approx(dense_posterior(s, model), abs=1e-8)
    assert log_posterior(s, model)[0] == _lp(model, s)


def test_evaluate_agrees_with_log_posterior(rng):
    model = survival_model(rng=rng)
    s = random_state(model, rng)
    ev = model.evaluate(s)
    assert ev.logpost == pytest.approx(_lp(model, s), rel=1e-13)


def _check_gradients(model, rng, n_states=5, coords=10):
    for _ in range(n_states):
        s = random_state(model, rng)
        ev = model.evaluate(s)

        def f_bo(x):
            b, o = model.split_bo(x)
            return _lp(model, ParameterState(b, o, s.eta_t, s.gamma, s.u))
        np.testing.assert_allclose(ev.grad_bo, fd_gradient(f_bo, s.bo), rtol=1e-5, atol=1e-5)
        idx = rng.choice(model.dim_latent, coords, replace=False)
        lat = s.latent

        def f_lat(x):
            g, u = model.split_latent(x)
            return _lp(model, ParameterState(s.beta, s.omega_t, s.eta_t, g, u))
        for j in idx:
            e = np.zeros_like(lat)
            e[j] = 1e-6
            num = (f_lat(lat + e) - f_lat(lat - e)) / 2e-6
            assert ev.grad_latent[j] == pytest.approx(num, rel=1e-5, abs=1e-5)


@pytest.mark.parametrize("events", [(0,), (1,), (2,), (3,), (0, 1, 2, 3)])
def test_gradients_survival(events, rng):
    _check_gradients(survival_model(rng=rng, events=events), rng)


def test_gradients_poisson(rng):
    _check_gradients(poisson_model(rng=rng), rng)


def test_gradients_with_frailties(rng):
    pri = Priors(log_sigma=(np.log(0.5), 0.5), log_phi=(np.log(0.2), 0.3), log_sigma_u=(np.log(0.3), 0.5))
    model = survival_model(rng=rng, priors=pri)
    assert model.dim_eta == 3 and model.dim_latent == model.m + model.n
    _check_gradients(model, rng)


def test_flat_data_zero_gradient():
    grid = build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), 2, 2)
    # one uncensored record at exp(eta) H0 = 1: d/d eta = 0
    data = SurvivalData([1], [1.0], [[0.5, 0.5]], [[1.0]])
    pri = Priors(log_phi=(np.log(0.2), 0.3))
    model = SpatialModel(WeibullSurvival(data), grid, pri)
    s = ParameterState([0.0], [0.0, 0.0], [np.log(1e-9), np.log(0.2)], np.zeros(grid.m))
    ev = model.evaluate(s)
    assert ev.grad_bo[0] == pytest.approx(pri.grad_beta(0.0), abs=1e-8)
    assert ev.grad_bo[0] == pytest.approx(0.0, abs=1e-8)


def test_single_cell_gradient_dense(rng):
    """All data in one cell: the gradient is -gamma + (column of the root) * g."""
    grid = build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), 3, 3)
    n = 6
    data = SurvivalData(rng.integers(0, 4, n), np.full(n, 0.5), np.tile([[0.3, 0.3]], (n, 1)),
                        rng.normal(size=(n, 1)), np.full(n, 1.2))
    model = SpatialModel(WeibullSurvival(data), grid, Priors(log_phi=(np.log(0.2), 0.3)))
    s = random_state(model, rng)
    ev = model.evaluate(s)
    eta = model.linear_predictor(s, ev.Y)
    g = model.outcome.derivs(eta, s.omega_t)[0].sum()
    R = dense_sqrt(dense_cov(grid, model.covariance(s.eta_t)))
    c = model.cells[0]
    np.testing.assert_allclose(ev.grad_latent, -s.gamma + R[:, c] * g, rtol=1e-8, atol=1e-10)


def test_record_order_invariance(rng):
    model = survival_model(rng=rng)
    s = random_state(model, rng)
    perm = rng.permutation(model.n)
    m2 = SpatialModel(WeibullSurvival(model.outcome.data.subset(perm)), model.grid, model.priors)
    assert _lp(m2, s) == pytest.approx(_lp(model, s), rel=1e-13)


def test_non_pd_signal(rng):
    model = survival_model(rng=rng)
    s = random_state(model, rng)
    s.eta_t[1] = np.log(5.0)
    with pytest.raises(NonPositiveDefinite):
        model.log_posterior(s)
    assert try_evaluate(model, s) is None


def test_latent_hessian_diag_fd(rng):
    model = survival_model(rng=rng)
    s = random_state(model, rng)
    diag = model.latent_neg_hessian_diag(s)
    for j in rng.choice(model.m, 6, replace=False):
        e = np.zeros(model.m)
        e[j] = 1e-5
        gp = model.evaluate(ParameterState(s.beta, s.omega_t, s.eta_t, s.gamma + e)).grad_latent[j]
        gm = model.evaluate(ParameterState(s.beta, s.omega_t, s.eta_t, s.gamma - e)).grad_latent[j]
        assert diag[j] == pytest.approx(-(gp - gm) / 2e-5, rel=1e-4, abs=1e-6)


@given(st.floats(-3, 3), st.floats(0.1, 5))
def test_normal_logpdf(x, sd):
    from scipy import stats
    assert normal_logpdf([x], 0.5, sd) == pytest.approx(stats.norm.logpdf(x, 0.5, sd))


def test_prior_validation():
    with pytest.raises(ValueError):
        Priors(beta_sd=0.0)
    with pytest.raises(ValueError):
        Priors(sigma_u=0.3, log_sigma_u=(0.0, 1.0))
