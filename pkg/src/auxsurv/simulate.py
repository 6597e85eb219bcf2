"""Synthetic fields, survival times and counts for validation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, cell_of
from .outcomes import Censoring, CountData, SurvivalData, WeibullBaseline, H0_inverse
from .spectral import CovarianceModel, build_spectral, gamma_to_field


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_field(grid: Grid, model: CovarianceModel, seed=None, size: int | None = None):
    """Draw ``gamma ~ N(0, I)`` and map it to the field.

    Returns ``(Y, gamma)``; with ``size`` both have a leading replicate axis.
    """
    rng = _rng(seed)
    shape = (grid.m,) if size is None else (size, grid.m)
    gamma = rng.standard_normal(shape)
    if model.sigma2 == 0:
        return np.zeros(shape), gamma
    sb = build_spectral(grid, model)
    return gamma_to_field(sb, gamma), gamma


@dataclass
class CensoringScheme:
    """How simulated event times are censored.

    ``admin_time``: right-censor anything later than this (None = never).
    ``left_rate``: fraction of records reported only as "before" a time
    ``T * (1 + E)``, ``E ~ Exp(1)``. ``interval_rate``: fraction reported as
    ``(T * V1, T * (1 + V2))`` with ``V1, V2 ~ U(0, 1)``.
    Administrative censoring takes precedence.
    """
    admin_time: float | None = None
    left_rate: float = 0.0
    interval_rate: float = 0.0

    def __post_init__(self):
        for r in (self.left_rate, self.interval_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("censoring rates must lie in [0, 1]")
        if self.left_rate + self.interval_rate > 1.0:
            raise ValueError("left_rate + interval_rate must not exceed 1")
        if self.admin_time is not None and not self.admin_time > 0:
            raise ValueError("admin_time must be positive")


@dataclass
class SimulatedData:
    data: object
    Y: np.ndarray
    truth: dict = field(default_factory=dict)


def _locations_and_design(n, grid, p, X, rng):
    x0, y0, x1, y1 = grid.bbox
    loc = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    if X is None:
        X = rng.standard_normal((n, p))
    X = np.asarray(X, dtype=float).reshape(n, p)
    return loc, X


def simulate_survival(n: int, beta, baseline: WeibullBaseline, Y, grid: Grid,
                      censoring: CensoringScheme | None = None, seed=None, X=None) -> SimulatedData:
    """Survival records from the proportional hazards model by inverse CDF.

    ``T = H0^{-1}(-log U / exp(eta))`` with ``eta = X beta + Y[cell]``.
    Locations are uniform on the grid's bounding box and covariates standard
    normal unless ``X`` is given.
    """
    rng = _rng(seed)
    censoring = censoring or CensoringScheme()
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    loc, X = _locations_and_design(n, grid, beta.size, X, rng)
    cells = cell_of(grid, loc)
    eta = X @ beta + np.asarray(Y)[cells]
    E = rng.exponential(size=n)  # -log U
    T = H0_inverse(baseline, E * np.exp(-eta))
    T = np.maximum(T, np.finfo(float).tiny)

    event = np.full(n, int(Censoring.UNCENSORED))
    t = T.copy()
    t2 = np.full(n, np.nan)
    kind = rng.random(n)
    left = kind < censoring.left_rate
    itv = (kind >= censoring.left_rate) & (kind < censoring.left_rate + censoring.interval_rate)
    ex = rng.exponential(size=n)
    v1, v2 = rng.random(n), rng.random(n)
    event[left] = Censoring.LEFT
    t[left] = T[left] * (1.0 + ex[left])
    event[itv] = Censoring.INTERVAL
    t[itv] = T[itv] * np.maximum(v1[itv], 1e-12)
    t2[itv] = T[itv] * (1.0 + v2[itv])
    if censoring.admin_time is not None:
        late = T > censoring.admin_time
        event[late] = Censoring.RIGHT
        t[late] = censoring.admin_time
        t2[late] = np.nan

    data = SurvivalData(event, t, loc, X, t2)
    truth = {"beta": beta, "alpha": baseline.alpha, "lambda": baseline.lam,
             "event_times": T, "cells": cells}
    return SimulatedData(data, np.asarray(Y), truth)


def simulate_poisson(n: int, beta, Y, grid: Grid, seed=None, X=None) -> SimulatedData:
    """Counts ``Z ~ Poisson(exp(X beta + Y[cell]))``."""
    rng = _rng(seed)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    loc, X = _locations_and_design(n, grid, beta.size, X, rng)
    cells = cell_of(grid, loc)
    with np.errstate(over="ignore"):
        rate = np.exp(X @ beta + np.asarray(Y)[cells])
    z = rng.poisson(rate)
    return SimulatedData(CountData(z, loc, X), np.asarray(Y), {"beta": beta, "cells": cells})
