import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from auxsurv import baseline_hazard_band, covariance_band, diagnostics, summarize_field
from auxsurv.mcmc import ChainConfig, ChainOutput, ProposalScalings
from auxsurv.outcomes import WeibullBaseline, h0
from auxsurv.posterior import Priors
from auxsurv.prediction import lag1_autocorrelation, quantiles


def fake_chain(beta, omega_t, eta_t, Y, obs_mask=None):
    N = Y.shape[0]
    cfg = ChainConfig(N + 1, burnin=1)
    return ChainOutput(np.atleast_2d(beta), np.atleast_2d(omega_t), np.atleast_2d(eta_t), Y,
                       np.arange(N, dtype=float), np.arange(N), np.ones(N + 1, bool), np.ones(N + 1),
                       ProposalScalings.identity(1, 2, 1), cfg, ["beta_x1", "log_alpha", "log_lambda"],
                       ["log_sigma", "log_phi"], obs_mask=obs_mask)


def test_exceedance_certain_and_constant():
    Y = np.tile([np.log(3.0), np.log(0.5)], (5, 1))
    fs = summarize_field(Y, (1.2, 2.0))
    np.testing.assert_array_equal(fs.exceedance[:, 0], 1.0)
    np.testing.assert_array_equal(fs.exceedance[:, 1], 0.0)
    np.testing.assert_allclose(fs.mean, [3.0, 0.5])
    np.testing.assert_allclose(fs.quantiles, [[3.0, 0.5]] * 3)


def test_exceedance_gaussian_tail(rng):
    N = 10_000
    mu, sd = np.array([-0.2, 0.0, 0.3, 0.6]), np.array([0.3, 0.5, 0.4, 0.2])
    Y = rng.normal(mu, sd, (N, 4))
    fs = summarize_field(Y, (1.2, 1.5, 2.0))
    for k, c in enumerate((1.2, 1.5, 2.0)):
        p = stats.norm.sf(np.log(c), mu, sd)
        se = np.sqrt(p * (1 - p) / N)
        assert np.all(np.abs(fs.exceedance[k] - p) <= 3 * se + 1e-12)


@given(st.integers(0, 2 ** 31), st.lists(st.floats(0.1, 5.0), min_size=2, max_size=6, unique=True))
def test_exceedance_antitone(seed, cs):
    Y = np.random.default_rng(seed).normal(0, 0.7, (50, 9))
    cs = sorted(cs)
    fs = summarize_field(Y, cs)
    assert np.all(np.diff(fs.exceedance, axis=0) <= 0)
    assert np.all((fs.exceedance >= 0) & (fs.exceedance <= 1))


def test_mask_and_permutation(rng):
    Y = rng.normal(size=(40, 16))
    mask = np.zeros(16, bool)
    mask[[1, 4, 9]] = True
    full = summarize_field(Y)
    sub = summarize_field(Y, mask=mask)
    np.testing.assert_allclose(sub.mean, full.mean[mask])
    np.testing.assert_allclose(sub.exceedance, full.exceedance[:, mask])
    perm = summarize_field(Y[rng.permutation(40)], mask=mask)
    np.testing.assert_allclose(perm.quantiles, sub.quantiles)
    np.testing.assert_allclose(perm.mean, sub.mean, rtol=1e-14)


def test_chain_mask_default(rng):
    mask = np.array([True, False, True, False])
    ch = fake_chain(np.zeros((10, 1)), np.zeros((10, 2)), np.zeros((10, 2)), rng.normal(size=(10, 4)), mask)
    assert list(summarize_field(ch).cells) == [0, 2]
    assert summarize_field(ch, full_grid=True).cells.size == 4


def test_field_summary_rejects():
    with pytest.raises(ValueError):
        summarize_field(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        summarize_field(np.zeros((3, 4)), (0.0,))


def test_quantile_rule():
    x = np.arange(1.0, 11.0)
    # type 8 position (N + 1/3) p + 1/3 = 5.5 for the median
    assert quantiles(x, (0.5,))[0] == pytest.approx(5.5)
    pos = (10 + 1 / 3) * 0.025 + 1 / 3
    assert quantiles(x, (0.025,))[0] == pytest.approx(max(1.0, pos))


def test_single_sample_curves_coincide():
    ch = fake_chain([[0.1]], [[np.log(0.8), np.log(0.3)]], [[np.log(0.5), np.log(0.2)]], np.zeros((1, 4)))
    band = baseline_hazard_band(ch, [0.5, 1.0, 2.0])
    np.testing.assert_allclose(band.lower, band.upper)
    np.testing.assert_allclose(band.median, h0(WeibullBaseline(0.8, 0.3), [0.5, 1.0, 2.0]))
    cb = covariance_band(ch, [0.0, 0.1])
    np.testing.assert_allclose(cb.lower, cb.upper)
    assert cb.median[0] == pytest.approx(0.25)


def test_covariance_band_at_zero_is_sigma2(rng):
    eta = np.column_stack([rng.normal(-0.7, 0.2, 500), rng.normal(-1.5, 0.1, 500)])
    ch = fake_chain(np.zeros((500, 1)), np.zeros((500, 2)), eta, np.zeros((500, 4)))
    cb = covariance_band(ch, [0.0, 0.2, 0.5])
    np.testing.assert_allclose([cb.lower[0], cb.median[0], cb.upper[0]],
                               quantiles(np.exp(2 * eta[:, 0])))
    assert np.all(cb.lower <= cb.median) and np.all(cb.median <= cb.upper)


def test_hazard_band_matches_analytic_quantiles(rng):
    # lambda fixed, alpha lognormal: h0 at t > 1 is increasing in alpha
    N = 20_000
    la = rng.normal(np.log(0.9), 0.1, N)
    om = np.column_stack([la, np.full(N, np.log(0.2))])
    ch = fake_chain(np.zeros((N, 1)), om, np.zeros((N, 2)), np.zeros((N, 2)))
    t = np.array([1.5, 3.0, 6.0])
    band = baseline_hazard_band(ch, t)
    for p, got in zip((0.025, 0.5, 0.975), (band.lower, band.median, band.upper)):
        a = np.exp(stats.norm.ppf(p, np.log(0.9), 0.1))
        np.testing.assert_allclose(got, h0(WeibullBaseline(a, 0.2), t), rtol=0.02)
    with pytest.raises(ValueError):
        baseline_hazard_band(ch, [2.0, 1.0])


def test_white_noise_lag1(rng):
    N = 1000
    Y = rng.normal(size=(N, 400))
    ch = fake_chain(np.zeros((N, 1)), np.zeros((N, 2)), np.zeros((N, 2)), Y)
    d = diagnostics(ch)
    bound = 2 / np.sqrt(N)
    assert d.white_noise_bound == pytest.approx(bound)
    assert np.mean(np.abs(d.lag1) <= bound) >= 0.93
    assert abs(np.mean(d.lag1)) < 0.01


def test_diagnostics_trace_and_overlay(rng):
    N = 50
    ch = fake_chain(rng.normal(size=(N, 1)), rng.normal(size=(N, 2)), rng.normal(size=(N, 2)),
                    rng.normal(size=(N, 3)))
    ch.log_posterior = np.cumsum(rng.uniform(0.1, 1.0, N))
    d = diagnostics(ch, Priors(), bins=10)
    np.testing.assert_array_equal(d.log_posterior, ch.log_posterior)
    assert np.all(np.diff(d.log_posterior) > 0)
    edges, dens, prior = d.prior_posterior["log_phi"]
    assert edges.size == 11 and dens.size == 10
    np.testing.assert_allclose(prior, stats.norm.pdf(0.5 * (edges[1:] + edges[:-1]), np.log(5000), 0.3))
    assert set(d.parameter_lag1) == {"beta_x1", "log_alpha", "log_lambda", "log_sigma", "log_phi"}


def test_constant_chain_lag1_missing():
    assert np.isnan(lag1_autocorrelation(np.ones(10)))
    ch = fake_chain(np.zeros((5, 1)), np.zeros((5, 2)), np.zeros((5, 2)), np.zeros((5, 3)))
    d = diagnostics(ch)
    assert np.all(np.isnan(d.lag1))
    with pytest.raises(ValueError):
        diagnostics(np.zeros((2, 3)))
