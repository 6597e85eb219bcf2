"""Per-record outcome likelihoods and their derivatives.

Two outcome models share one interface so the posterior never needs to know
which one it is driving:

* :class:`WeibullSurvival`, a proportional-hazards model with Weibull baseline
  ``h0(t) = alpha * lam * t**(alpha - 1)`` and right, left and interval
  censoring;
* :class:`PoissonCounts`, ``Z ~ Poisson(exp(eta))``.

Both take the linear predictor ``eta`` per record (``X beta + Y[cell] (+ U)``)
and, for the survival model, the log baseline parameters
``omega_t = (log alpha, log lam)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np
from scipy.special import gammaln

_LOG2 = np.log(2.0)


class Censoring(IntEnum):
    RIGHT = 0
    UNCENSORED = 1
    LEFT = 2
    INTERVAL = 3


class DegenerateLikelihood(ValueError):
    """A record's contribution is log(0), e.g. an interval of zero hazard mass."""


@dataclass(frozen=True)
class WeibullBaseline:
    alpha: float
    lam: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.lam > 0):
            raise ValueError("Weibull alpha and lam must be positive")

    @classmethod
    def from_log(cls, omega_t) -> "WeibullBaseline":
        return cls(float(np.exp(omega_t[0])), float(np.exp(omega_t[1])))

    @property
    def omega_t(self) -> np.ndarray:
        return np.log([self.alpha, self.lam])


def h0(b: WeibullBaseline, t):
    """Baseline hazard."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    out = b.alpha * b.lam * t ** (b.alpha - 1.0)
    return float(out) if out.ndim == 0 else out


def H0(b: WeibullBaseline, t):
    """Baseline cumulative hazard ``lam * t**alpha``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    out = b.lam * t ** b.alpha
    return float(out) if out.ndim == 0 else out


def H0_inverse(b: WeibullBaseline, x):
    return (np.asarray(x, dtype=float) / b.lam) ** (1.0 / b.alpha)


@dataclass(frozen=True)
class SurvivalRecord:
    id: str
    censoring: Censoring
    t: float | tuple[float, float]
    covariates: tuple[float, ...] = ()
    location: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "censoring", Censoring(self.censoring))
        if self.censoring == Censoring.INTERVAL:
            t1, t2 = self.t
            if not (0 < t1 < t2 < np.inf):
                raise ValueError(f"record {self.id}: interval needs 0 < t1 < t2 < inf")
        elif not (0 < float(self.t) < np.inf):
            raise ValueError(f"record {self.id}: time must be positive and finite")

    @property
    def times(self) -> tuple[float, float]:
        if self.censoring == Censoring.INTERVAL:
            return float(self.t[0]), float(self.t[1])
        return float(self.t), np.nan


# -- numerically stable helpers ------------------------------------------------

def _log1mexp(x):
    """log(1 - exp(-x)) for x >= 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x < _LOG2, np.log(-np.expm1(-np.minimum(x, _LOG2))),
                        np.log1p(-np.exp(-np.maximum(x, _LOG2))))


def _x_over_expm1(x):
    """x / (exp(x) - 1), equal to 1 at 0 and decaying like x exp(-x)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    with np.errstate(over="ignore"):
        r = safe / np.expm1(safe)
    return np.where(small, 1.0 - 0.5 * x, r)


def _x_over_1mexpm(x):
    """x / (1 - exp(-x)); equal to 1 at 0 and ~x for large x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5 * x, safe / -np.expm1(-safe))


# -- vectorised Weibull proportional hazards ----------------------------------

def _log_cumhaz(t, log_alpha, log_lam):
    with np.errstate(divide="ignore"):
        return log_lam + np.exp(log_alpha) * np.log(t)


class _Groups:
    """Censoring-type index sets and log times, computed once per dataset."""

    def __init__(self, event, t, t2):
        event = np.asarray(event)
        t = np.asarray(t, dtype=float)
        self.n = event.shape[0]
        self.logt = np.log(t)
        self.unc = np.flatnonzero(event == int(Censoring.UNCENSORED))
        self.left = np.flatnonzero(event == int(Censoring.LEFT))
        self.itv = np.flatnonzero(event == int(Censoring.INTERVAL))
        t2 = np.full(self.n, np.nan) if t2 is None else np.asarray(t2, dtype=float)
        # log(t2 / t1) for interval records
        self.itv_dlog = np.log(t2[self.itv]) - self.logt[self.itv]
        self.logt_unc = self.logt[self.unc]


def _weibull_eval(g: _Groups, eta, omega_t, derivs: bool):
    eta = np.asarray(eta, dtype=float)
    la, ll = float(omega_t[0]), float(omega_t[1])
    alpha = np.exp(la)
    with np.errstate(over="ignore"):
        A = np.exp(eta + ll + alpha * g.logt)
    out = -A  # right censored
    if g.unc.size:
        out[g.unc] += eta[g.unc] + la + ll + (alpha - 1.0) * g.logt_unc
    if g.left.size:
        out[g.left] = _log1mexp(A[g.left])
    if g.itv.size:
        A1 = A[g.itv]
        with np.errstate(over="ignore", invalid="ignore"):
            D = A1 * np.expm1(alpha * g.itv_dlog)
        out[g.itv] = -A1 + _log1mexp(D)
    if not derivs:
        return out

    a_logt = alpha * g.logt
    d_eta = -A
    d2 = -A
    d_eta[g.unc] += 1.0
    # right and uncensored: d/dlog alpha = d_eta * alpha log t (+1 if uncensored)
    d_la = d_eta * a_logt
    d_la[g.unc] += 1.0
    if g.left.size:
        Al = A[g.left]
        r = _x_over_expm1(Al)
        d_eta[g.left] = r
        d_la[g.left] = r * a_logt[g.left]
        d2[g.left] = r * (1.0 - _x_over_1mexpm(Al))
    if g.itv.size:
        A1 = A[g.itv]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            A2 = A1 * np.exp(alpha * g.itv_dlog)
            D = A1 * np.expm1(alpha * g.itv_dlog)
            rD = _x_over_expm1(D)
            w = np.where(D > 0, rD / np.where(D > 0, D, 1.0), np.inf)
            al1 = a_logt[g.itv]
            al2 = al1 + alpha * g.itv_dlog
            d_eta[g.itv] = -A1 + rD
            d_la[g.itv] = -A1 * al1 + (A2 * al2 - A1 * al1) * w
            d2[g.itv] = -A1 + rD * (1.0 - _x_over_1mexpm(D))
    # d/d log lam of A equals A, exactly as for eta
    return out, d_eta, np.column_stack([d_la, d_eta]), d2


def weibull_loglik(event, t, t2, eta, omega_t) -> np.ndarray:
    """Per-record log-likelihood.

    ``event`` holds :class:`Censoring` codes; ``t2`` is only read for interval
    records. Contributions of zero probability come back as ``-inf``.
    """
    return _weibull_eval(_Groups(event, t, t2), eta, omega_t, derivs=False)


def weibull_derivs(event, t, t2, eta, omega_t):
    """Derivatives of :func:`weibull_loglik`.

    Returns ``(d_eta, d_omega, d2_eta)`` where ``d_omega`` has columns
    ``(d/d log alpha, d/d log lam)`` and ``d2_eta`` is the second derivative
    in ``eta``.
    """
    _, d_eta, d_omega, d2 = _weibull_eval(_Groups(event, t, t2), eta, omega_t, derivs=True)
    return d_eta, d_omega, d2


# -- single-record API ----------------------------------------------------------

def _record_arrays(r: SurvivalRecord):
    t1, t2 = r.times
    return np.array([int(r.censoring)]), np.array([t1]), np.array([t2])


def record_loglik(r: SurvivalRecord, b: WeibullBaseline, eta: float) -> float:
    ev, t1, t2 = _record_arrays(r)
    val = float(weibull_loglik(ev, t1, t2, np.array([eta]), b.omega_t)[0])
    if val == -np.inf:
        raise DegenerateLikelihood(f"record {r.id}: contribution has zero probability")
    return val


def record_dloglik_deta(r: SurvivalRecord, b: WeibullBaseline, eta: float) -> float:
    ev, t1, t2 = _record_arrays(r)
    return float(weibull_derivs(ev, t1, t2, np.array([eta]), b.omega_t)[0][0])


def dloglik_domega(r: SurvivalRecord, b: WeibullBaseline, eta: float) -> np.ndarray:
    ev, t1, t2 = _record_arrays(r)
    return weibull_derivs(ev, t1, t2, np.array([eta]), b.omega_t)[1][0]


def poisson_loglik(z, eta):
    z = np.asarray(z)
    if np.any(z < 0):
        raise ValueError("counts must be non-negative")
    eta = np.asarray(eta, dtype=float)
    out = z * eta - np.exp(eta) - gammaln(z + 1.0)
    return float(out) if out.ndim == 0 else out


def poisson_dloglik_deta(z, eta):
    z = np.asarray(z)
    if np.any(z < 0):
        raise ValueError("counts must be non-negative")
    out = z - np.exp(np.asarray(eta, dtype=float))
    return float(out) if out.ndim == 0 else out


# -- datasets -----------------------------------------------------------------

def _as_design(X, n):
    if X is None:
        return np.zeros((n, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[0] == n:
        return X
    return X.reshape(n, -1)


@dataclass
class SurvivalData:
    """Column-oriented survival dataset.

    ``t`` is the event/censoring time, or the lower end for interval records;
    ``t2`` is the upper end for interval records and NaN otherwise.
    """
    event: np.ndarray
    t: np.ndarray
    locations: np.ndarray
    X: np.ndarray | None = None
    t2: np.ndarray | None = None
    ids: list[str] | None = None
    covariate_names: list[str] | None = None

    def __post_init__(self):
        self.event = np.asarray(self.event, dtype=np.int64)
        n = self.event.shape[0]
        self.t = np.asarray(self.t, dtype=float)
        self.t2 = np.full(n, np.nan) if self.t2 is None else np.asarray(self.t2, dtype=float)
        self.locations = np.asarray(self.locations, dtype=float).reshape(n, 2)
        self.X = _as_design(self.X, n)
        if self.ids is None:
            self.ids = [str(i) for i in range(n)]
        if self.covariate_names is None:
            self.covariate_names = [f"x{j + 1}" for j in range(self.X.shape[1])]
        if not np.isin(self.event, [c.value for c in Censoring]).all():
            raise ValueError("unknown censoring code")
        if not (np.all(np.isfinite(self.t)) and np.all(self.t > 0)):
            raise ValueError("times must be positive and finite")
        itv = self.event == Censoring.INTERVAL
        if np.any(itv) and not np.all(self.t2[itv] > self.t[itv]):
            raise ValueError("interval records need t2 > t")
        if np.any(itv) and not np.all(np.isfinite(self.t2[itv])):
            raise ValueError("interval upper times must be finite")

    @property
    def n(self) -> int:
        return self.event.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord]) -> "SurvivalData":
        times = np.array([r.times for r in records], dtype=float).reshape(-1, 2)
        p = len(records[0].covariates) if records else 0
        return cls(
            event=np.array([int(r.censoring) for r in records], dtype=np.int64),
            t=times[:, 0], t2=times[:, 1],
            locations=np.array([r.location for r in records], dtype=float).reshape(-1, 2),
            X=np.array([r.covariates for r in records], dtype=float).reshape(-1, p),
            ids=[r.id for r in records],
        )

    def records(self) -> list[SurvivalRecord]:
        out = []
        for i in range(self.n):
            ev = Censoring(int(self.event[i]))
            t = (self.t[i], self.t2[i]) if ev == Censoring.INTERVAL else self.t[i]
            out.append(SurvivalRecord(self.ids[i], ev, t, tuple(self.X[i]),
                                      tuple(self.locations[i])))
        return out

    def subset(self, idx) -> "SurvivalData":
        idx = np.asarray(idx)
        return SurvivalData(self.event[idx], self.t[idx], self.locations[idx], self.X[idx],
                            self.t2[idx], [self.ids[i] for i in idx], self.covariate_names)


@dataclass
class CountData:
    z: np.ndarray
    locations: np.ndarray
    X: np.ndarray | None = None
    ids: list[str] | None = None
    covariate_names: list[str] | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z)
        n = self.z.shape[0]
        if np.any(self.z < 0) or np.any(self.z != np.round(self.z)):
            raise ValueError("counts must be non-negative integers")
        self.z = self.z.astype(np.int64)
        self.locations = np.asarray(self.locations, dtype=float).reshape(n, 2)
        self.X = _as_design(self.X, n)
        if self.ids is None:
            self.ids = [str(i) for i in range(n)]
        if self.covariate_names is None:
            self.covariate_names = [f"x{j + 1}" for j in range(self.X.shape[1])]

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


# -- outcome models -----------------------------------------------------------

@dataclass
class WeibullSurvival:
    """Weibull proportional hazards outcome over a :class:`SurvivalData`."""
    data: SurvivalData
    omega_names: tuple[str, ...] = ("log_alpha", "log_lambda")

    n_omega = 2

    def __post_init__(self):
        d = self.data
        self._groups = _Groups(d.event, d.t, d.t2)

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def X(self) -> np.ndarray:
        return self.data.X

    @property
    def locations(self) -> np.ndarray:
        return self.data.locations

    def loglik(self, eta, omega_t) -> np.ndarray:
        return _weibull_eval(self._groups, eta, omega_t, derivs=False)

    def derivs(self, eta, omega_t):
        return _weibull_eval(self._groups, eta, omega_t, derivs=True)[1:]

    def loglik_and_derivs(self, eta, omega_t):
        """``(loglik, d_eta, d_omega, d2_eta)`` in one pass."""
        return _weibull_eval(self._groups, eta, omega_t, derivs=True)

    def ad_hoc_eta(self, omega_t) -> np.ndarray:
        """Linear predictor maximising each record's own contribution.

        Finite only for uncensored and interval records; right and left censored
        contributions are monotone in ``eta`` and give NaN.
        """
        d = self.data
        alpha = np.exp(omega_t[0])
        logH1 = _log_cumhaz(d.t, omega_t[0], omega_t[1])
        out = np.full(d.n, np.nan)
        unc = d.event == Censoring.UNCENSORED
        out[unc] = -logH1[unc]
        itv = d.event == Censoring.INTERVAL
        if np.any(itv):
            g = alpha * np.log(d.t2[itv] / d.t[itv])
            out[itv] = np.log(g) - logH1[itv] - np.log(np.expm1(g))
        return out

    def default_omega(self) -> np.ndarray:
        """Exponential-model start: alpha = 1, lam = events / exposure."""
        d = self.data
        events = max(np.sum(d.event != Censoring.RIGHT), 1)
        return np.array([0.0, np.log(events / np.sum(d.t))])


@dataclass
class PoissonCounts:
    """Poisson counts with log link; no baseline parameters."""
    data: CountData
    omega_names: tuple[str, ...] = ()
    _log_fact: np.ndarray = field(init=False, repr=False)

    n_omega = 0

    def __post_init__(self):
        self._log_fact = gammaln(self.data.z + 1.0)

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def X(self) -> np.ndarray:
        return self.data.X

    @property
    def locations(self) -> np.ndarray:
        return self.data.locations

    def loglik(self, eta, omega_t=None) -> np.ndarray:
        return self.data.z * eta - np.exp(eta) - self._log_fact

    def derivs(self, eta, omega_t=None):
        mu = np.exp(eta)
        return self.data.z - mu, np.zeros((self.n, 0)), -mu

    def loglik_and_derivs(self, eta, omega_t=None):
        mu = np.exp(eta)
        z = self.data.z
        return z * eta - mu - self._log_fact, z - mu, np.zeros((self.n, 0)), -mu

    def ad_hoc_eta(self, omega_t=None) -> np.ndarray:
        z = self.data.z.astype(float)
        with np.errstate(divide="ignore"):
            return np.where(z > 0, np.log(z), np.nan)

    def default_omega(self) -> np.ndarray:
        return np.zeros(0)
