"""Blocked adaptive Metropolis-Hastings with Langevin and random-walk blocks.

One joint Gaussian proposal covers three blocks:

* ``(beta, omega_t)``: preconditioned Langevin, scale ``h^2 * h2_bo``;
* ``eta_t``: random walk, scale ``c * h^2 * h2_eta``;
* ``(gamma[, u])``: Langevin with a diagonal preconditioner, scale
  ``h^2 * h2_latent``.

The candidate is accepted or rejected as a whole. The global scale ``h`` is
adapted towards an acceptance rate of 0.574 with step ``i**-0.6``.

Any target with ``evaluate(state) -> Evaluation`` and the ``split_bo`` /
``split_latent`` helpers can be sampled; that covers both
:class:`~auxsurv.posterior.SpatialModel` and the dense reference model.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .posterior import Evaluation, ParameterState, SpatialModel, normal_logpdf, try_evaluate
from .spectral import NonPositiveDefinite, field_to_gamma

log = logging.getLogger(__name__)

TARGET_ACCEPTANCE = 0.574
RW_LANGEVIN_RATIO = 0.4  # ~ 0.234 / 0.574


class InitializationError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


# -- scalings -----------------------------------------------------------------

def langevin_scale(dim: int) -> float:
    return 1.65 ** 2 / dim ** (1.0 / 3.0) if dim > 0 else 1.0


def random_walk_scale(dim: int) -> float:
    return 2.38 ** 2 / dim if dim > 0 else 1.0


def _chol(S):
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.size == 0:
        return S
    return linalg.cholesky(S, lower=True)


@dataclass
class ProposalScalings:
    Sigma_bo: np.ndarray
    Sigma_eta: np.ndarray
    Sigma_latent: np.ndarray  # diagonal, stored as a vector
    h: float = 1.0
    c: float = RW_LANGEVIN_RATIO
    h2_bo: float = field(init=False)
    h2_eta: float = field(init=False)
    h2_latent: float = field(init=False)
    chol_bo: np.ndarray = field(init=False, repr=False)
    chol_eta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.Sigma_bo = np.atleast_2d(np.asarray(self.Sigma_bo, dtype=float))
        self.Sigma_eta = np.atleast_2d(np.asarray(self.Sigma_eta, dtype=float))
        self.Sigma_latent = np.asarray(self.Sigma_latent, dtype=float).ravel()
        if self.Sigma_bo.size == 0:
            self.Sigma_bo = np.zeros((0, 0))
        if self.h <= 0 or np.any(self.Sigma_latent <= 0):
            raise ValueError("scalings must be positive")
        self.h2_bo = langevin_scale(self.Sigma_bo.shape[0])
        self.h2_eta = random_walk_scale(self.Sigma_eta.shape[0])
        self.h2_latent = langevin_scale(self.Sigma_latent.size)
        # raises LinAlgError when not positive definite
        self.chol_bo = _chol(self.Sigma_bo)
        self.chol_eta = _chol(self.Sigma_eta)

    @classmethod
    def identity(cls, dim_bo: int, dim_eta: int, dim_latent: int, h: float = 1.0):
        return cls(np.eye(dim_bo), np.eye(dim_eta), np.ones(dim_latent), h=h)

    def with_h(self, h: float) -> "ProposalScalings":
        return ProposalScalings(self.Sigma_bo, self.Sigma_eta, self.Sigma_latent, h, self.c)


@dataclass
class ChainConfig:
    n_iterations: int
    burnin: int = 0
    thin: int = 1
    seed: int = 0
    target_acceptance: float = TARGET_ACCEPTANCE
    adapt_exponent: float = 0.6
    adapt_after_burnin: bool = False
    adapt: bool = True
    h_bounds: tuple[float, float] = (1e-6, 1e3)
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.burnin < self.n_iterations:
            raise ValueError("need 0 <= burnin < n_iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0.5 < self.adapt_exponent <= 1.0:
            raise ValueError("adapt_exponent must lie in (0.5, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.n_iterations - self.burnin) // self.thin


@dataclass
class ChainOutput:
    beta: np.ndarray
    omega_t: np.ndarray
    eta_t: np.ndarray
    Y: np.ndarray
    log_posterior: np.ndarray
    iterations: np.ndarray
    accepted: np.ndarray  # per iteration, whether the chain moved
    h_trace: np.ndarray
    scalings: ProposalScalings
    config: ChainConfig
    bo_names: list[str] = field(default_factory=list)
    eta_names: list[str] = field(default_factory=list)
    kind: str = "exponential"
    nu: float = 1.0
    initial_log_posterior: float = np.nan
    parallel_moves: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    obs_mask: np.ndarray | None = None  # grid cells overlapping the observation window
    final_state: ParameterState | None = None  # for continuing the chain

    @property
    def parallel_move_rate(self) -> float:
        """Fraction of multiple-proposal steps that moved (NaN for k = 1)."""
        return float(np.mean(self.parallel_moves)) if self.parallel_moves.size else np.nan

    @property
    def n_samples(self) -> int:
        return self.Y.shape[0]

    @property
    def acceptance_rate(self) -> float:
        """Move rate after burn-in."""
        return float(np.mean(self.accepted[self.config.burnin:]))

    @property
    def bo(self) -> np.ndarray:
        return np.hstack([self.beta, self.omega_t])


# -- proposal and accept/reject -----------------------------------------------

def _draw(rng: np.random.Generator, dims: tuple[int, int, int]):
    """All randomness for one candidate: block noise then one uniform."""
    z = rng.standard_normal(sum(dims))
    u = rng.random()
    return z, u


def _langevin_mean(x, grad, step, precond_mv):
    return x + 0.5 * step * precond_mv(grad)


def _bo_logq(x_to, mean, step, chol):
    if x_to.size == 0:
        return 0.0
    r = linalg.solve_triangular(chol, x_to - mean, lower=True, check_finite=False)
    return -0.5 * float(r @ r) / step


def _latent_logq(x_to, mean, step, diag):
    r = x_to - mean
    return -0.5 * float(np.sum(r * r / diag)) / step


def _block_steps(sc: ProposalScalings):
    h2 = sc.h * sc.h
    return h2 * sc.h2_bo, sc.c * h2 * sc.h2_eta, h2 * sc.h2_latent


def _candidate(target, state: ParameterState, ev: Evaluation, sc: ProposalScalings, z):
    s_bo, s_eta, s_lat = _block_steps(sc)
    k, q = sc.Sigma_bo.shape[0], sc.Sigma_eta.shape[0]
    z_bo, z_eta, z_lat = z[:k], z[k:k + q], z[k + q:]

    bo = state.bo
    mu_bo = _langevin_mean(bo, ev.grad_bo, s_bo, lambda g: sc.Sigma_bo @ g)
    new_bo = mu_bo + np.sqrt(s_bo) * (sc.chol_bo @ z_bo) if k else bo.copy()

    new_eta = state.eta_t + np.sqrt(s_eta) * (sc.chol_eta @ z_eta)

    lat = state.latent
    mu_lat = _langevin_mean(lat, ev.grad_latent, s_lat, lambda g: sc.Sigma_latent * g)
    new_lat = mu_lat + np.sqrt(s_lat * sc.Sigma_latent) * z_lat

    beta, omega_t = target.split_bo(new_bo)
    gamma, u = target.split_latent(new_lat)
    cand = ParameterState(beta, omega_t, new_eta, gamma, u)
    return cand, (mu_bo, mu_lat, new_bo, new_lat)


def random_walk_log_q_ratio(eta_from, eta_to) -> float:
    """The eta_t block's share of the q-ratio.

    Its proposal density depends on ``eta_to - eta_from`` only through a
    centred Gaussian, so the forward and reverse densities are equal and the
    share is exactly zero whatever the arguments.
    """
    return 0.0


def log_q_ratio(state, ev, cand, cand_ev, sc: ProposalScalings, fwd=None) -> float:
    """``log q(state | cand) - log q(cand | state)``.

    The random-walk block is symmetric and contributes nothing, so only the
    two Langevin blocks appear.
    """
    s_bo, _, s_lat = _block_steps(sc)
    bo, lat = state.bo, state.latent
    if fwd is None:
        mu_bo = _langevin_mean(bo, ev.grad_bo, s_bo, lambda g: sc.Sigma_bo @ g)
        mu_lat = _langevin_mean(lat, ev.grad_latent, s_lat, lambda g: sc.Sigma_latent * g)
        new_bo, new_lat = cand.bo, cand.latent
    else:
        mu_bo, mu_lat, new_bo, new_lat = fwd
    rev_bo = _langevin_mean(new_bo, cand_ev.grad_bo, s_bo, lambda g: sc.Sigma_bo @ g)
    rev_lat = _langevin_mean(new_lat, cand_ev.grad_latent, s_lat, lambda g: sc.Sigma_latent * g)

    lq = _bo_logq(bo, rev_bo, s_bo, sc.chol_bo) - _bo_logq(new_bo, mu_bo, s_bo, sc.chol_bo)
    lq += (_latent_logq(lat, rev_lat, s_lat, sc.Sigma_latent)
           - _latent_logq(new_lat, mu_lat, s_lat, sc.Sigma_latent))
    return lq + random_walk_log_q_ratio(state.eta_t, cand.eta_t)


def propose(target, state: ParameterState, ev: Evaluation, sc: ProposalScalings,
            rng: np.random.Generator, z=None):
    """Draw and evaluate one candidate.

    Returns ``(candidate, candidate_evaluation, log_q_ratio)``; the evaluation
    is ``None`` and the ratio ``-inf`` when the candidate's covariance is not
    positive definite, so it is rejected on sight.
    """
    if z is None:
        z = rng.standard_normal(sc.Sigma_bo.shape[0] + sc.Sigma_eta.shape[0] + sc.Sigma_latent.size)
    cand, fwd = _candidate(target, state, ev, sc, z)
    cand_ev = try_evaluate(target, cand)
    if cand_ev is None or not np.isfinite(cand_ev.logpost):
        return cand, None, -np.inf
    return cand, cand_ev, log_q_ratio(state, ev, cand, cand_ev, sc, fwd)


def accept_log_prob(cur_lp: float, cand_lp: float, lq: float) -> float:
    with np.errstate(invalid="ignore"):
        a = cand_lp - cur_lp + lq
    if np.isnan(a):
        return -np.inf
    return min(0.0, a)


def mh_step(target, state: ParameterState, ev: Evaluation, sc: ProposalScalings,
            rng: np.random.Generator):
    """One Metropolis-Hastings step. Returns ``(state, evaluation, accepted)``."""
    dims = (sc.Sigma_bo.shape[0], sc.Sigma_eta.shape[0], sc.Sigma_latent.size)
    z, u = _draw(rng, dims)
    cand, cand_ev, lq = propose(target, state, ev, sc, rng, z)
    if cand_ev is not None and np.log(u) < accept_log_prob(ev.logpost, cand_ev.logpost, lq):
        return cand, cand_ev, True
    return state, ev, False


def parallel_propose(target, state: ParameterState, ev: Evaluation, sc: ProposalScalings,
                     rngs: Sequence[np.random.Generator], executor=None):
    """Multiple-proposal step: ``k`` independent candidates, first accepted wins.

    Every stream draws its noise and uniform each call, whether or not its
    candidate ends up evaluated, so results do not depend on ``executor``.
    With an executor all candidates are evaluated concurrently; without one
    they are evaluated in index order until the first acceptance.

    Returns ``(state, evaluation, index or None, first_accepted)`` where
    ``first_accepted`` is the accept decision of candidate 0 (an unbiased
    single-proposal acceptance indicator).
    """
    dims = (sc.Sigma_bo.shape[0], sc.Sigma_eta.shape[0], sc.Sigma_latent.size)
    draws = [_draw(r, dims) for r in rngs]

    def run(j):
        return propose(target, state, ev, sc, rngs[j], draws[j][0])

    def ok(j, res):
        cand, cand_ev, lq = res
        return cand_ev is not None and \
            np.log(draws[j][1]) < accept_log_prob(ev.logpost, cand_ev.logpost, lq)

    if executor is not None:
        results = list(executor.map(run, range(len(rngs))))
        decisions = [ok(j, r) for j, r in enumerate(results)]
    else:
        results, decisions = [], []
        for j in range(len(rngs)):
            res = run(j)
            results.append(res)
            decisions.append(ok(j, res))
            if decisions[-1]:
                break
    for j, d in enumerate(decisions):
        if d:
            return results[j][0], results[j][1], j, decisions[0]
    return state, ev, None, False


def adapt_step(iteration: int, exponent: float = 0.6) -> float:
    """Diminishing adaptation step ``i**-exponent``."""
    return float(iteration) ** -exponent


def adapt(h: float, accepted: float, iteration: int, target: float = TARGET_ACCEPTANCE,
          exponent: float = 0.6, bounds=(1e-6, 1e3)) -> float:
    """Robbins-Monro update of the global scale on the log scale."""
    log_h = np.log(h) + adapt_step(iteration, exponent) * (float(accepted) - target)
    return float(np.clip(np.exp(log_h), *bounds))


# -- initialisation -----------------------------------------------------------

def stage_one(outcome, start=None, fixed: dict | None = None, tol: float = 1e-8):
    """Maximum likelihood for ``(beta, omega_t)`` with the field set to zero.

    ``fixed`` maps positions in ``(beta, omega_t)`` to values held constant.
    Quasi-Newton with the analytic gradient first, then with finite
    differences if that fails.
    """
    p, k = outcome.X.shape[1], outcome.n_omega
    dim = p + k
    x0 = np.concatenate([np.zeros(p), outcome.default_omega()]) if start is None else np.asarray(start, float)
    fixed = dict(fixed or {})
    free = np.array([i for i in range(dim) if i not in fixed], dtype=int)
    if free.size == 0:
        return x0.copy(), []

    def full(xf):
        x = x0.copy()
        for i, v in fixed.items():
            x[i] = v
        x[free] = xf
        return x

    def nll(xf):
        x = full(xf)
        with np.errstate(over="ignore", invalid="ignore"):
            val = -float(np.sum(outcome.loglik(outcome.X @ x[:p], x[p:])))
        return val if np.isfinite(val) else 1e300

    def grad(xf):
        x = full(xf)
        with np.errstate(over="ignore", invalid="ignore"):
            d_eta, d_om, _ = outcome.derivs(outcome.X @ x[:p], x[p:])
        g = -np.concatenate([outcome.X.T @ d_eta, d_om.sum(axis=0)])
        return np.nan_to_num(g[free], nan=0.0, posinf=1e300, neginf=-1e300)

    trace = []
    xf = x0[free].copy()
    for jac in (grad, None):
        res = optimize.minimize(nll, xf, jac=jac, method="BFGS", options={"gtol": tol, "maxiter": 2000})
        g = grad(res.x)
        trace.append({"jac": "analytic" if jac else "finite-difference", "fun": res.fun,
                      "nit": res.nit, "message": str(res.message), "grad_norm": float(np.linalg.norm(g))})
        if np.linalg.norm(g) <= 1e-4 * (1.0 + abs(res.fun)):
            return full(res.x), trace
        xf = res.x
    raise InitializationError("stage-one maximum likelihood did not converge", trace)


def ad_hoc_field(model: SpatialModel, beta, omega_t) -> np.ndarray:
    """Cell-wise mean of per-record maximising field values.

    Records without a finite maximiser are skipped; empty cells take the
    overall mean of the filled cells.
    """
    y_rec = model.outcome.ad_hoc_eta(omega_t) - model.outcome.X @ beta
    ok = np.isfinite(y_rec)
    Y = np.zeros(model.m)
    if not np.any(ok):
        return Y
    sums = np.bincount(model.cells[ok], weights=y_rec[ok], minlength=model.m)
    counts = np.bincount(model.cells[ok], minlength=model.m)
    filled = counts > 0
    Y[filled] = sums[filled] / counts[filled]
    Y[~filled] = Y[filled].mean()
    return Y


def fit_quadratic(points, values):
    """Least-squares quadratic ``c + b.x + x'Ax/2``; returns ``(c, b, A)``."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    f = np.asarray(values, dtype=float)
    d = X.shape[1]
    iu = np.triu_indices(d)
    cols = [np.ones(len(X))] + [X[:, i] for i in range(d)]
    cols += [X[:, i] * X[:, j] * (0.5 if i == j else 1.0) for i, j in zip(*iu)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), f, rcond=None)
    c, b = coef[0], coef[1:1 + d]
    A = np.zeros((d, d))
    A[iu] = coef[1 + d:]
    A = A + np.triu(A, 1).T
    return c, b, A


def quadratic_maximum(points, values):
    """Maximiser and ``(-A)^{-1}`` of a fitted quadratic, or ``None`` if not concave."""
    _, b, A = fit_quadratic(points, values)
    if np.any(np.linalg.eigvalsh(A) >= 0):
        return None
    cov = np.linalg.inv(-A)
    return cov @ b, cov


def conditional_gamma(model: SpatialModel, Y, eta_t=None) -> np.ndarray:
    """Whitened field for ``Y`` under the covariance at ``eta_t`` (prior mean by default)."""
    eta_t = model.priors.eta_mean if eta_t is None else np.asarray(eta_t, dtype=float)
    return field_to_gamma(model.spectral(eta_t), Y, float(np.exp(2 * eta_t[0])))


def hyper_log_density(model: SpatialModel, beta, omega_t, gamma, eta_t) -> float:
    """Log conditional density of the hyperparameters with everything else held fixed."""
    eta = np.asarray(eta_t, dtype=float)
    if eta.size < model.dim_eta:
        eta = np.concatenate([eta, model.priors.eta_mean[eta.size:]])
    u = np.zeros(model.n) if model.priors.frailties else None
    lp, _ = model.log_posterior(ParameterState(beta, omega_t, eta, gamma, u))
    return lp


def _lattice(model, beta, omega_t, gamma, centre, half_width, n_points):
    axes = [np.linspace(centre[i] - half_width[i], centre[i] + half_width[i], n_points)
            for i in range(2)]
    pts, vals = [], []
    for a in axes[0]:
        for b in axes[1]:
            try:
                v = hyper_log_density(model, beta, omega_t, gamma, np.array([a, b]))
            except NonPositiveDefinite:
                continue
            if np.isfinite(v):
                pts.append((a, b))
                vals.append(v)
    return np.array(pts).reshape(-1, 2), np.array(vals)


def stage_three(model: SpatialModel, beta, omega_t, gamma, n_points: int = 9, width: float = 3.0,
                max_refine: int = 4):
    """Quadratic fit of the hyperparameter conditional on a lattice.

    The lattice spans ``width`` prior sds either side of the prior mean in
    ``(log sigma, log phi)``. If the fitted surface is not concave the lattice
    is re-centred on its best point and shrunk threefold, up to ``max_refine``
    times, before falling back to the prior variance. A sampled
    ``log sigma_u`` starts at its prior mean with its prior variance.
    """
    mean, sd = model.priors.eta_mean, model.priors.eta_sd
    eta0, cov = mean.copy(), np.diag(sd ** 2)
    centre, half = mean[:2].copy(), width * sd[:2]
    best = None
    for _ in range(max_refine + 1):
        pts, vals = _lattice(model, beta, omega_t, gamma, centre, half, n_points)
        if len(pts) == 0:
            break
        best = pts[np.argmax(vals)]
        fitted = quadratic_maximum(pts, vals) if len(pts) >= 6 else None
        if fitted is not None:
            eta0[:2] = np.clip(fitted[0], pts.min(axis=0), pts.max(axis=0))
            cov[:2, :2] = fitted[1]
            break
        centre, half = best, half / 3.0
    else:
        warnings.warn("hyperparameter surface not concave; using prior variance", RuntimeWarning,
                      stacklevel=2)
        eta0[:2] = best
    if best is None:
        warnings.warn("no usable hyperparameter lattice point; starting at the prior mean",
                      RuntimeWarning, stacklevel=2)
    # the maximiser itself must give a usable covariance
    while True:
        try:
            model.spectral(eta0)
            break
        except NonPositiveDefinite:
            eta0[1] -= 0.1 * sd[1]
    return eta0, cov


def _spd(M, floor=1e-8):
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    scale = max(np.max(np.abs(w)), 1.0) if w.size else 1.0
    w = np.maximum(w, floor * scale)
    return (V * w) @ V.T


def bo_precision(model, state: ParameterState, eps: float = 1e-5) -> np.ndarray:
    """Minus the Hessian in ``(beta, omega_t)`` by central differences of the gradient."""
    bo = state.bo
    k = bo.size
    H = np.zeros((k, k))
    for j in range(k):
        step = eps * max(1.0, abs(bo[j]))
        gp = []
        for sgn in (1.0, -1.0):
            x = bo.copy()
            x[j] += sgn * step
            b, o = model.split_bo(x)
            s = ParameterState(b, o, state.eta_t, state.gamma, state.u)
            gp.append(model.evaluate(s).grad_bo)
        H[:, j] = (gp[0] - gp[1]) / (2 * step)
    return -0.5 * (H + H.T)


@dataclass
class InitInfo:
    stage_one: np.ndarray
    stage_one_trace: list
    Y_ad_hoc: np.ndarray
    eta0: np.ndarray
    Sigma_eta: np.ndarray


def initialize(model: SpatialModel, n_points: int = 9):
    """Three-stage start: ML without space, ad hoc field, hyperparameter quadratic.

    Returns ``(state, scalings, info)``. The state has ``gamma = 0`` (and
    ``u = 0``); the ad hoc field is only used for the preconditioners.
    """
    if model.n < 1:
        raise InitializationError("no records to initialise from")
    bo_hat, trace = stage_one(model.outcome)
    beta, omega_t = model.split_bo(bo_hat)
    Y0 = ad_hoc_field(model, beta, omega_t)
    gamma_c = conditional_gamma(model, Y0)
    eta0, Sigma_eta = stage_three(model, beta, omega_t, gamma_c, n_points)
    sb = model.spectral(eta0)
    gamma_hat = field_to_gamma(sb, Y0, float(np.exp(2 * eta0[0])))
    u0 = np.zeros(model.n) if model.priors.frailties else None
    at = ParameterState(beta, omega_t, eta0, gamma_hat, u0)
    Sigma_bo = np.linalg.inv(_spd(bo_precision(model, at))) if model.dim_bo else np.zeros((0, 0))
    Sigma_lat = 1.0 / np.maximum(model.latent_neg_hessian_diag(at), 1e-8)
    state = ParameterState(beta, omega_t, eta0, np.zeros(model.m), u0)
    sc = ProposalScalings(_spd(Sigma_bo) if model.dim_bo else Sigma_bo, _spd(Sigma_eta), Sigma_lat)
    return state, sc, InitInfo(bo_hat, trace, Y0, eta0, Sigma_eta)


# -- chain driver ---------------------------------------------------------------

def _streams(seed: int, k: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def _obs_mask(target, m):
    grid = getattr(target, "grid", None)
    mask = getattr(grid, "obs_mask", None)
    return None if mask is None or mask.size != m else mask.copy()


def run_chain(target, config: ChainConfig, state: ParameterState, scalings: ProposalScalings,
              executor=None, progress_every: int = 0) -> ChainOutput:
    """Run the sampler; deterministic given ``config.seed``.

    The global scale adapts during burn-in (and afterwards if
    ``config.adapt_after_burnin``).

    With ``config.workers = k > 1`` each step calls :func:`parallel_propose`.
    Candidate ``j`` is exactly what a single-proposal chain would try after
    ``j`` rejections, so a step whose first acceptance is candidate ``j``
    stands for ``j + 1`` iterations of that chain (``j`` rejections, then the
    move) and a step with none accepted for ``k`` rejections. Iteration
    counts, thinning, acceptance and adaptation all use these underlying
    iterations, which keeps the retained draws distributed as a
    single-proposal chain. Per-step move indicators are kept in
    ``ChainOutput.parallel_moves``.
    """
    rngs = _streams(config.seed, config.workers)
    ev = target.evaluate(state)
    if not np.isfinite(ev.logpost):
        raise ValueError("initial state has zero posterior density")
    sc = scalings
    N = config.n_retained
    m = ev.Y.size
    out_beta = np.empty((N, state.beta.size))
    out_omega = np.empty((N, state.omega_t.size))
    out_eta = np.empty((N, state.eta_t.size))
    out_Y = np.empty((N, m))
    out_lp = np.empty(N)
    out_it = np.empty(N, dtype=np.int64)
    accepted = np.zeros(config.n_iterations, dtype=bool)
    h_trace = np.empty(config.n_iterations)
    moves = []
    initial_lp = ev.logpost

    def record(i, st, e, acc):
        nonlocal sc, j
        accepted[i - 1] = acc
        if config.adapt and (i <= config.burnin or config.adapt_after_burnin):
            h_new = adapt(sc.h, acc, i, config.target_acceptance, config.adapt_exponent,
                          config.h_bounds)
            if h_new != sc.h:
                sc = sc.with_h(h_new)
        h_trace[i - 1] = sc.h
        if i > config.burnin and (i - config.burnin) % config.thin == 0 and j < N:
            out_beta[j], out_omega[j], out_eta[j] = st.beta, st.omega_t, st.eta_t
            out_Y[j], out_lp[j], out_it[j] = e.Y, e.logpost, i
            j += 1
        if progress_every and i % progress_every == 0:
            log.info("iteration %d  h=%.4g  acc=%.3f  logpost=%.6g", i, sc.h,
                     accepted[max(0, i - progress_every):i].mean(), e.logpost)

    j = 0
    i = 0
    while i < config.n_iterations:
        if config.workers == 1:
            state, ev, acc = mh_step(target, state, ev, sc, rngs[0])
            i += 1
            record(i, state, ev, acc)
            continue
        new_state, new_ev, idx, _ = parallel_propose(target, state, ev, sc, rngs, executor)
        moves.append(idx is not None)
        rejections = config.workers if idx is None else idx
        for _ in range(rejections):
            if i == config.n_iterations:
                break
            i += 1
            record(i, state, ev, False)
        if idx is not None and i < config.n_iterations:
            state, ev = new_state, new_ev
            i += 1
            record(i, state, ev, True)

    return ChainOutput(out_beta, out_omega, out_eta, out_Y, out_lp, out_it, accepted, h_trace,
                       sc, config, list(getattr(target, "bo_names", [])),
                       list(getattr(target, "eta_names", [])),
                       getattr(target, "kind", "exponential"), getattr(target, "nu", 1.0),
                       initial_lp, np.array(moves, dtype=bool), _obs_mask(target, m), state)


def fit(model: SpatialModel, config: ChainConfig, executor=None) -> ChainOutput:
    """Initialise then run the chain."""
    state, sc, _ = initialize(model)
    return run_chain(model, config, state, sc, executor)
