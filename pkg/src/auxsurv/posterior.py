"""Log posterior of the auxiliary-grid model and its Langevin gradients.

Parameters live on the sampling scale:

* ``beta`` covariate effects,
* ``omega_t`` log baseline parameters (empty for Poisson),
* ``eta_t = (log sigma, log phi[, log sigma_u])`` covariance hyperparameters,
* ``gamma`` white noise on the grid, ``Y = -sigma^2/2 + Sigma^{1/2} gamma``,
* ``u`` optional per-record iid frailties.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .grid import Grid, cell_of
from .spectral import (CovarianceModel, NonPositiveDefinite, SpectralBase,
                       build_spectral, gamma_to_field, sqrt_matvec)

_LOG_2PI = np.log(2.0 * np.pi)


def normal_logpdf(x, mean, sd) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    z = (x - mean) / sd
    log_sd = np.log(sd) * np.ones(x.shape) if np.ndim(sd) else x.size * np.log(sd)
    return float(-0.5 * np.sum(z * z) - np.sum(log_sd) - 0.5 * x.size * _LOG_2PI)


@dataclass
class Priors:
    """Independent normal priors on the sampling scale.

    Defaults follow the leukaemia configuration: ``N(0, 10^2)`` for ``beta``
    and ``log omega``, ``N(0, 0.5^2)`` for ``log sigma`` and
    ``N(log 5000, 0.3^2)`` for ``log phi``.

    Setting ``sigma_u`` switches on per-record frailties with that fixed sd;
    setting ``log_sigma_u`` instead samples ``log sigma_u`` under a normal
    prior, as a third hyperparameter.
    """
    beta_mean: float | np.ndarray = 0.0
    beta_sd: float | np.ndarray = 10.0
    omega_mean: float | np.ndarray = 0.0
    omega_sd: float | np.ndarray = 10.0
    log_sigma: tuple[float, float] = (0.0, 0.5)
    log_phi: tuple[float, float] = (float(np.log(5000.0)), 0.3)
    sigma_u: float | None = None
    log_sigma_u: tuple[float, float] | None = None

    def __post_init__(self):
        sds = [self.beta_sd, self.omega_sd, self.log_sigma[1], self.log_phi[1]]
        if self.log_sigma_u is not None:
            sds.append(self.log_sigma_u[1])
        if any(np.any(np.asarray(s) <= 0) for s in sds):
            raise ValueError("prior sds must be positive")
        if self.sigma_u is not None and self.sigma_u <= 0:
            raise ValueError("sigma_u must be positive")
        if self.sigma_u is not None and self.log_sigma_u is not None:
            raise ValueError("give either a fixed sigma_u or a prior on log sigma_u")

    @property
    def frailties(self) -> bool:
        return self.sigma_u is not None or self.log_sigma_u is not None

    @property
    def eta_mean(self) -> np.ndarray:
        out = [self.log_sigma[0], self.log_phi[0]]
        if self.log_sigma_u is not None:
            out.append(self.log_sigma_u[0])
        return np.array(out)

    @property
    def eta_sd(self) -> np.ndarray:
        out = [self.log_sigma[1], self.log_phi[1]]
        if self.log_sigma_u is not None:
            out.append(self.log_sigma_u[1])
        return np.array(out)

    def logpdf(self, beta, omega_t, eta_t) -> float:
        return (normal_logpdf(beta, self.beta_mean, self.beta_sd)
                + normal_logpdf(omega_t, self.omega_mean, self.omega_sd)
                + normal_logpdf(eta_t, self.eta_mean, self.eta_sd))

    def grad_beta(self, beta):
        return -(np.asarray(beta) - self.beta_mean) / np.square(self.beta_sd)

    def grad_omega(self, omega_t):
        return -(np.asarray(omega_t) - self.omega_mean) / np.square(self.omega_sd)


@dataclass
class ParameterState:
    beta: np.ndarray
    omega_t: np.ndarray
    eta_t: np.ndarray
    gamma: np.ndarray
    u: np.ndarray | None = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.omega_t = np.asarray(self.omega_t, dtype=float).ravel()
        self.eta_t = np.asarray(self.eta_t, dtype=float).ravel()
        self.gamma = np.asarray(self.gamma, dtype=float).ravel()
        if self.u is not None:
            self.u = np.asarray(self.u, dtype=float).ravel()

    @property
    def sigma2(self) -> float:
        return float(np.exp(2.0 * self.eta_t[0]))

    @property
    def phi(self) -> float:
        return float(np.exp(self.eta_t[1]))

    @property
    def bo(self) -> np.ndarray:
        return np.concatenate([self.beta, self.omega_t])

    @property
    def latent(self) -> np.ndarray:
        return self.gamma if self.u is None else np.concatenate([self.gamma, self.u])

    def copy(self) -> "ParameterState":
        return ParameterState(self.beta.copy(), self.omega_t.copy(), self.eta_t.copy(),
                              self.gamma.copy(), None if self.u is None else self.u.copy())


@dataclass
class Evaluation:
    """Log posterior at a state plus the Langevin-block gradients."""
    logpost: float
    Y: np.ndarray
    grad_bo: np.ndarray | None = None
    grad_latent: np.ndarray | None = None
    spectral: SpectralBase | None = None


@dataclass
class SpatialModel:
    """The auxiliary-grid target: outcome + grid + covariance family + priors."""
    outcome: object
    grid: Grid
    priors: Priors = field(default_factory=Priors)
    kind: str = "exponential"
    nu: float = 1.0
    cells: np.ndarray = field(init=False, repr=False)
    _lags: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.outcome.n
        self.cells = (cell_of(self.grid, self.outcome.locations) if n
                      else np.zeros(0, dtype=np.int64))
        self._lags = self.grid.lag_distances()

    # dimensions --------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.outcome.n

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def p(self) -> int:
        return self.outcome.X.shape[1]

    @property
    def dim_bo(self) -> int:
        return self.p + self.outcome.n_omega

    @property
    def dim_eta(self) -> int:
        return 3 if self.priors.log_sigma_u is not None else 2

    @property
    def dim_latent(self) -> int:
        return self.m + (self.n if self.priors.frailties else 0)

    @property
    def bo_names(self) -> list[str]:
        names = getattr(self.outcome.data, "covariate_names", None) or \
            [f"x{j + 1}" for j in range(self.p)]
        return [f"beta_{c}" for c in names] + list(self.outcome.omega_names)

    @property
    def eta_names(self) -> list[str]:
        return ["log_sigma", "log_phi", "log_sigma_u"][: self.dim_eta]

    def covariance(self, eta_t) -> CovarianceModel:
        return CovarianceModel(self.kind, float(np.exp(2.0 * eta_t[0])),
                               float(np.exp(eta_t[1])), self.nu)

    def sigma_u(self, state: ParameterState) -> float | None:
        if self.priors.log_sigma_u is not None:
            return float(np.exp(state.eta_t[2]))
        return self.priors.sigma_u

    def split_bo(self, bo):
        return bo[: self.p], bo[self.p:]

    def split_latent(self, latent):
        if self.priors.frailties:
            return latent[: self.m], latent[self.m:]
        return latent, None

    def initial_state(self, beta=None, omega_t=None, eta_t=None) -> ParameterState:
        return ParameterState(
            beta=np.zeros(self.p) if beta is None else beta,
            omega_t=self.outcome.default_omega() if omega_t is None else omega_t,
            eta_t=self.priors.eta_mean if eta_t is None else eta_t,
            gamma=np.zeros(self.m),
            u=np.zeros(self.n) if self.priors.frailties else None,
        )

    # field -------------------------------------------------------------------
    def spectral(self, eta_t) -> SpectralBase:
        return build_spectral(self.grid, self.covariance(eta_t), lags=self._lags)

    def field(self, state: ParameterState, sb: SpectralBase | None = None):
        sb = self.spectral(state.eta_t) if sb is None else sb
        return sb, gamma_to_field(sb, state.gamma, state.sigma2)

    def linear_predictor(self, state: ParameterState, Y) -> np.ndarray:
        eta = self.outcome.X @ state.beta + Y[self.cells]
        if state.u is not None:
            eta = eta + state.u
        return eta

    def log_density_given_field(self, state: ParameterState, Y) -> float:
        """Log posterior once the field ``Y`` implied by ``state`` is known."""
        ll = self.outcome.loglik(self.linear_predictor(state, Y), state.omega_t)
        lp = float(np.sum(ll)) + normal_logpdf(state.gamma, 0.0, 1.0)
        lp += self.priors.logpdf(state.beta, state.omega_t, state.eta_t)
        if state.u is not None:
            lp += normal_logpdf(state.u, 0.0, self.sigma_u(state))
        return lp if np.isfinite(lp) else -np.inf

    # posterior ---------------------------------------------------------------
    def log_posterior(self, state: ParameterState):
        """``(log posterior, Y)``; raises :class:`NonPositiveDefinite`."""
        sb, Y = self.field(state)
        return self.log_density_given_field(state, Y), Y

    def evaluate(self, state: ParameterState, gradients: bool = True) -> Evaluation:
        sb, Y = self.field(state)
        eta = self.linear_predictor(state, Y)
        if gradients:
            ll, d_eta, d_omega, _ = self.outcome.loglik_and_derivs(eta, state.omega_t)
        else:
            ll = self.outcome.loglik(eta, state.omega_t)
        lp = float(np.sum(ll)) - 0.5 * float(state.gamma @ state.gamma) - 0.5 * self.m * _LOG_2PI
        lp += self.priors.logpdf(state.beta, state.omega_t, state.eta_t)
        su = None
        if state.u is not None:
            su = self.sigma_u(state)
            lp += normal_logpdf(state.u, 0.0, su)
        if not np.isfinite(lp):
            return Evaluation(-np.inf, Y, spectral=sb)
        ev = Evaluation(lp, Y, spectral=sb)
        if gradients:
            g_beta = self.outcome.X.T @ d_eta + self.priors.grad_beta(state.beta)
            g_omega = d_omega.sum(axis=0) + self.priors.grad_omega(state.omega_t)
            ev.grad_bo = np.concatenate([g_beta, g_omega])
            g_gamma = self._grad_gamma(sb, state, d_eta)
            if state.u is not None:
                ev.grad_latent = np.concatenate([g_gamma, d_eta - state.u / su ** 2])
            else:
                ev.grad_latent = g_gamma
        return ev

    def _grad_gamma(self, sb, state, d_eta):
        if state.sigma2 == 0:
            return -state.gamma
        g = np.bincount(self.cells, weights=d_eta, minlength=self.m)
        return sqrt_matvec(sb, g) - state.gamma

    def grad_beta_omega(self, state: ParameterState) -> np.ndarray:
        return self.evaluate(state).grad_bo

    def grad_gamma(self, state: ParameterState) -> np.ndarray:
        return self.evaluate(state).grad_latent[: self.m]

    def latent_neg_hessian_diag(self, state: ParameterState) -> np.ndarray:
        """Diagonal of minus the Hessian in ``(gamma[, u])``.

        With ``w`` the per-cell sum of second derivatives in the linear
        predictor and ``r`` the base of ``Sigma^{1/2}``, the ``gamma`` diagonal is
        ``1 - sum_c r[c - k]^2 w[c]``: a circular convolution done by FFT.
        """
        sb, Y = self.field(state)
        eta = self.linear_predictor(state, Y)
        _, _, d2 = self.outcome.derivs(eta, state.omega_t)
        w = np.bincount(self.cells, weights=d2, minlength=self.m).reshape(sb.shape)
        r2 = sb.sqrt_base() ** 2
        conv = fft.irfft2(fft.rfft2(w) * fft.rfft2(r2), s=sb.shape).ravel()
        out = 1.0 - conv
        if state.u is not None:
            out = np.concatenate([out, -d2 + 1.0 / self.sigma_u(state) ** 2])
        return out


def log_posterior(state: ParameterState, model: SpatialModel):
    """Functional form of :meth:`SpatialModel.log_posterior`."""
    return model.log_posterior(state)


def try_evaluate(model, state, gradients: bool = True) -> Evaluation | None:
    """Evaluate, mapping a non-positive-definite covariance to ``None``."""
    try:
        return model.evaluate(state, gradients)
    except NonPositiveDefinite:
        return None


__all__ = ["Priors", "ParameterState", "Evaluation", "SpatialModel", "log_posterior",
           "normal_logpdf", "try_evaluate"]
