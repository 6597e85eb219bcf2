import numpy as np
import pytest
from scipy import stats

from auxsurv import (CensoringScheme, Censoring, CovarianceModel, build_grid, simulate_field,
                     simulate_poisson, simulate_survival)
from auxsurv.dense import dense_cov
from auxsurv.outcomes import H0, WeibullBaseline


def field_moments_ok(grid, model, N, seed):
    Y, _ = simulate_field(grid, model, seed=seed, size=N)
    S = dense_cov(grid, model)
    d = np.sqrt(np.diag(S))
    mean_se = d / np.sqrt(N)
    assert np.all(np.abs(Y.mean(axis=0) + model.sigma2 / 2) <= 4 * mean_se)
    C = np.cov(Y, rowvar=False)
    # Gaussian sampling variance of a covariance entry
    cov_se = np.sqrt((np.outer(d ** 2, d ** 2) + S ** 2) / N)
    assert np.all(np.abs(C - S) <= 4 * cov_se)


def test_field_law_exponential(unit_grid):
    field_moments_ok(unit_grid, CovarianceModel("exponential", 0.5, 0.3), 10_000, 7)


def test_field_law_matern(unit_grid):
    field_moments_ok(unit_grid, CovarianceModel("matern", 0.8, 0.15, 1.0), 10_000, 8)


def test_field_shapes_and_seed(unit_grid):
    m = CovarianceModel(sigma2=0.3, phi=0.2)
    Y, g = simulate_field(unit_grid, m, seed=3)
    assert Y.shape == g.shape == (unit_grid.m,)
    Y2, _ = simulate_field(unit_grid, m, seed=3)
    np.testing.assert_array_equal(Y, Y2)


def test_zero_variance_field(unit_grid):
    Y, g = simulate_field(unit_grid, CovarianceModel(sigma2=0.0, phi=0.2), seed=1, size=4)
    assert np.all(Y == 0) and g.shape == (4, unit_grid.m)


def test_survival_times_follow_weibull_ph(unit_grid):
    # single covariate fixed at 1, flat field: S(t) = exp(-H0(t) e^beta)
    n, beta = 4000, 0.4
    b = WeibullBaseline(1.3, 0.5)
    sim = simulate_survival(n, [beta], b, np.zeros(unit_grid.m), unit_grid, seed=11, X=np.ones((n, 1)))
    T = sim.truth["event_times"]
    p = stats.kstest(T, lambda t: 1 - np.exp(-H0(b, t) * np.exp(beta))).pvalue
    assert p > 0.01
    assert np.all(sim.data.event == Censoring.UNCENSORED)
    np.testing.assert_array_equal(sim.data.t, T)


def test_field_shifts_hazard(unit_grid):
    # a cell-constant shift of the field acts like an intercept
    n, b = 3000, WeibullBaseline(1.0, 1.0)
    Y = np.full(unit_grid.m, np.log(2.0))
    T = simulate_survival(n, [0.0], b, Y, unit_grid, seed=5, X=np.zeros((n, 1))).truth["event_times"]
    assert stats.kstest(T, stats.expon(scale=0.5).cdf).pvalue > 0.01


def test_censoring_scheme(unit_grid):
    n = 5000
    sch = CensoringScheme(admin_time=2.0, left_rate=0.2, interval_rate=0.3)
    sim = simulate_survival(n, [0.3, -0.2], WeibullBaseline(0.9, 0.4), np.zeros(unit_grid.m),
                            unit_grid, sch, seed=2)
    d, T = sim.data, sim.truth["event_times"]
    right = d.event == Censoring.RIGHT
    np.testing.assert_array_equal(right, T > 2.0)
    assert np.all(d.t[right] == 2.0)
    left = d.event == Censoring.LEFT
    assert np.all(T[left] <= d.t[left])
    itv = d.event == Censoring.INTERVAL
    assert np.all((d.t[itv] <= T[itv]) & (T[itv] <= d.t2[itv]))
    assert np.all(np.isnan(d.t2[~itv]))
    early = ~right
    frac_left = np.mean(left[early])
    assert abs(frac_left - 0.2) < 4 * np.sqrt(0.16 / early.sum())
    x0, y0, x1, y1 = unit_grid.bbox
    assert np.all((d.locations >= [x0, y0]) & (d.locations <= [x1, y1]))


@pytest.mark.parametrize("kw", [dict(left_rate=-0.1), dict(interval_rate=1.2),
                                dict(left_rate=0.6, interval_rate=0.6), dict(admin_time=0.0)])
def test_censoring_scheme_rejects(kw):
    with pytest.raises(ValueError):
        CensoringScheme(**kw)


def test_poisson_counts_mean(unit_grid):
    n = 20000
    Y = np.zeros(unit_grid.m)
    sim = simulate_poisson(n, [1.0], Y, unit_grid, seed=4, X=np.full((n, 1), np.log(3.0)))
    z = sim.data.z
    assert abs(z.mean() - 3.0) < 4 * np.sqrt(3.0 / n)
    assert abs(z.var() - 3.0) < 0.15
