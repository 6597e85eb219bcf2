"""Posterior summaries from retained grid samples.

Quantiles use the median-unbiased estimator (Hyndman-Fan type 8): with
sorted sample ``x_(1..N)`` the ``p`` quantile sits at position
``(N + 1/3) p + 1/3``, linearly interpolated and clamped to the sample range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .outcomes import WeibullBaseline, h0
from .spectral import CovarianceModel, cov_value

DEFAULT_THRESHOLDS = (1.2, 1.5, 2.0)
QUANTILES = (0.025, 0.5, 0.975)


def quantiles(x, probs=QUANTILES, axis=0) -> np.ndarray:
    return np.quantile(np.asarray(x, dtype=float), probs, axis=axis, method="median_unbiased")


@dataclass
class FieldSummary:
    cells: np.ndarray
    mean: np.ndarray  # posterior mean of exp(Y)
    quantiles: np.ndarray  # (3, n_cells) for QUANTILES
    thresholds: tuple[float, ...]
    exceedance: np.ndarray  # (n_thresholds, n_cells)


@dataclass
class CurveSummary:
    x: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray


def _samples_Y(chain):
    Y = chain.Y if hasattr(chain, "Y") else chain
    return np.atleast_2d(np.asarray(Y, dtype=float))


def summarize_field(chain, thresholds=DEFAULT_THRESHOLDS, mask=None,
                    full_grid: bool = False) -> FieldSummary:
    """Per-cell mean and quantiles of ``exp(Y)`` and exceedance probabilities.

    ``chain`` is a :class:`~auxsurv.mcmc.ChainOutput` or an ``(N, m)`` array of
    field samples. ``mask`` (boolean, length ``m``) restricts the output; by
    default a chain's own observation-window mask is used unless
    ``full_grid`` is set. Bare arrays are summarised over every column.
    """
    if mask is None and not full_grid:
        mask = getattr(chain, "obs_mask", None)
    Y = _samples_Y(chain)
    if Y.shape[0] < 2:
        raise ValueError("need at least two retained samples")
    thresholds = tuple(float(c) for c in thresholds)
    if any(c <= 0 for c in thresholds):
        raise ValueError("thresholds must be positive")
    cells = np.arange(Y.shape[1]) if mask is None else np.flatnonzero(mask)
    Y = Y[:, cells]
    eY = np.exp(Y)
    logc = np.log(thresholds)
    exc = np.array([np.mean(Y > lc, axis=0) for lc in logc]).reshape(len(thresholds), -1)
    return FieldSummary(cells, eY.mean(axis=0), quantiles(eY), thresholds, exc)


def _band(x, curves) -> CurveSummary:
    q = quantiles(curves)
    return CurveSummary(np.asarray(x, dtype=float), q[0], q[1], q[2])


def _check_abscissa(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(np.diff(x) < 0):
        raise ValueError("abscissae must be positive and sorted")
    return x


def baseline_hazard_band(chain, times) -> CurveSummary:
    """Pointwise 2.5/50/97.5% of the Weibull baseline hazard over ``times``."""
    times = _check_abscissa(times)
    om = np.atleast_2d(chain.omega_t)
    if om.shape[0] < 1:
        raise ValueError("empty chain")
    curves = np.array([h0(WeibullBaseline.from_log(o), times) for o in om]).reshape(len(om), -1)
    return _band(times, curves)


def covariance_band(chain, distances) -> CurveSummary:
    """Pointwise 2.5/50/97.5% of the covariance function over ``distances``.

    Distances may start at 0, where the band is that of ``sigma^2``.
    """
    d = np.asarray(distances, dtype=float)
    if np.any(d < 0) or np.any(np.diff(d) < 0):
        raise ValueError("distances must be non-negative and sorted")
    eta = np.atleast_2d(chain.eta_t)
    if eta.shape[0] < 1:
        raise ValueError("empty chain")
    kind, nu = getattr(chain, "kind", "exponential"), getattr(chain, "nu", 1.0)
    curves = np.array([
        cov_value(CovarianceModel(kind, float(np.exp(2 * e[0])), float(np.exp(e[1])), nu), d)
        for e in eta]).reshape(len(eta), -1)
    return _band(d, curves)


def lag1_autocorrelation(x, axis=0) -> np.ndarray:
    """Lag-1 autocorrelation along ``axis``; NaN where the series is constant."""
    x = np.moveaxis(np.asarray(x, dtype=float), axis, 0)
    xc = x - x.mean(axis=0)
    den = np.sum(xc * xc, axis=0)
    num = np.sum(xc[1:] * xc[:-1], axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


@dataclass
class Diagnostics:
    log_posterior: np.ndarray
    lag1: np.ndarray  # per cell
    lag1_range: tuple[float, float]
    lag1_central95: tuple[float, float]
    white_noise_bound: float  # 2 / sqrt(N)
    parameter_lag1: dict
    prior_posterior: dict  # name -> (bin_edges, histogram density, prior density at centres)


def diagnostics(chain, priors=None, bins: int = 30, mask=None) -> Diagnostics:
    """Convergence summaries: log-posterior trace, lag-1 autocorrelations and
    prior/posterior overlay data for each scalar parameter."""
    Y = _samples_Y(chain)
    N = Y.shape[0]
    if N < 3:
        raise ValueError("need at least three retained samples")
    if mask is not None:
        Y = Y[:, np.asarray(mask, dtype=bool)]
    ac = lag1_autocorrelation(Y)
    finite = ac[np.isfinite(ac)]
    rng_ = (float(finite.min()), float(finite.max())) if finite.size else (np.nan, np.nan)
    central = tuple(float(v) for v in np.quantile(finite, [0.025, 0.975])) if finite.size else (np.nan, np.nan)
    lp = np.asarray(getattr(chain, "log_posterior", np.full(N, np.nan)), dtype=float)

    params, prior_sd = {}, {}
    if hasattr(chain, "bo"):
        names = list(getattr(chain, "bo_names", [])) or [f"bo{j}" for j in range(chain.bo.shape[1])]
        for j, nm in enumerate(names):
            params[nm] = chain.bo[:, j]
        enames = list(getattr(chain, "eta_names", [])) or [f"eta{j}" for j in range(chain.eta_t.shape[1])]
        for j, nm in enumerate(enames):
            params[nm] = chain.eta_t[:, j]
    if priors is not None and params:
        p = chain.beta.shape[1]
        k = chain.omega_t.shape[1]
        for j, nm in enumerate(params):
            if j < p:
                prior_sd[nm] = (np.broadcast_to(priors.beta_mean, p)[j], np.broadcast_to(priors.beta_sd, p)[j])
            elif j < p + k:
                jj = j - p
                prior_sd[nm] = (np.broadcast_to(priors.omega_mean, k)[jj], np.broadcast_to(priors.omega_sd, k)[jj])
            else:
                jj = j - p - k
                prior_sd[nm] = (priors.eta_mean[jj], priors.eta_sd[jj])
    overlay = {}
    for nm, x in params.items():
        dens, edges = np.histogram(x, bins=bins, density=True)
        centres = 0.5 * (edges[1:] + edges[:-1])
        prior = stats.norm.pdf(centres, *prior_sd[nm]) if nm in prior_sd else None
        overlay[nm] = (edges, dens, prior)
    return Diagnostics(lp, ac, rng_, central, 2.0 / np.sqrt(N),
                       {nm: float(lag1_autocorrelation(x)) for nm, x in params.items()}, overlay)
