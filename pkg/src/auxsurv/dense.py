"""Dense reference algebra and the standard-method timing comparison.

``dense_cov``/``dense_sqrt``/``dense_posterior`` redo the grid computations
with explicit ``m x m`` matrices; they exist to check the FFT path and are
guarded against large grids.

:class:`StandardModel` is the conventional model with one spatially
correlated frailty per individual, whitened through a Cholesky factor of the
``n x n`` covariance. It is a different model from the grid one and is only
used for cost comparisons.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .grid import Grid, toroidal_distance
from .posterior import Evaluation, ParameterState, Priors, SpatialModel, normal_logpdf
from .spectral import CovarianceModel, NonPositiveDefinite, cov_value

MAX_DENSE_CELLS = 4096


def dense_cov(grid: Grid, model: CovarianceModel, max_cells: int = MAX_DENSE_CELLS) -> np.ndarray:
    """Full toroidal covariance matrix over all cells."""
    if grid.m > max_cells:
        raise ValueError(f"dense covariance refused for m={grid.m} > {max_cells}")
    idx = np.arange(grid.m)
    D = toroidal_distance(grid, idx[:, None], idx[None, :])
    return cov_value(model, D)


def dense_sqrt(S: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root by eigendecomposition."""
    w, V = np.linalg.eigh(S)
    if w.min() <= tol * max(np.max(np.diag(S)), np.finfo(float).tiny):
        raise NonPositiveDefinite(w.min())
    return (V * np.sqrt(w)) @ V.T


def dense_field(grid: Grid, model: CovarianceModel, gamma) -> np.ndarray:
    if model.sigma2 == 0:
        return np.zeros_like(np.asarray(gamma, dtype=float))
    R = dense_sqrt(dense_cov(grid, model))
    return -0.5 * model.sigma2 + R @ np.asarray(gamma, dtype=float)


def dense_posterior(state: ParameterState, model: SpatialModel) -> float:
    """Log posterior of the grid model with the field built densely."""
    Y = dense_field(model.grid, model.covariance(state.eta_t), state.gamma)
    return model.log_density_given_field(state, Y)


@dataclass
class StandardModel:
    """Per-individual correlated frailties; O(n^3) per evaluation."""
    outcome: object
    priors: Priors = field(default_factory=Priors)
    kind: str = "exponential"
    nu: float = 1.0
    _D: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._D = cdist(self.outcome.locations, self.outcome.locations)

    @property
    def n(self) -> int:
        return self.outcome.n

    m = n

    @property
    def p(self) -> int:
        return self.outcome.X.shape[1]

    @property
    def dim_bo(self) -> int:
        return self.p + self.outcome.n_omega

    @property
    def dim_eta(self) -> int:
        return 2

    @property
    def dim_latent(self) -> int:
        return self.n

    def split_bo(self, bo):
        return bo[: self.p], bo[self.p:]

    def split_latent(self, latent):
        return latent, None

    def initial_state(self, beta=None, omega_t=None, eta_t=None) -> ParameterState:
        return ParameterState(
            np.zeros(self.p) if beta is None else beta,
            self.outcome.default_omega() if omega_t is None else omega_t,
            self.priors.eta_mean[:2] if eta_t is None else eta_t,
            np.zeros(self.n))

    def evaluate(self, state: ParameterState, gradients: bool = True) -> Evaluation:
        s2 = state.sigma2
        C = cov_value(CovarianceModel(self.kind, s2, state.phi, self.nu), self._D)
        try:
            L = linalg.cholesky(C, lower=True, check_finite=False)
        except linalg.LinAlgError:
            raise NonPositiveDefinite(np.nan, state.phi) from None
        Y = -0.5 * s2 + L @ state.gamma
        eta = self.outcome.X @ state.beta + Y
        lp = float(np.sum(self.outcome.loglik(eta, state.omega_t)))
        lp += normal_logpdf(state.gamma, 0.0, 1.0)
        lp += self.priors.logpdf(state.beta, state.omega_t, state.eta_t)
        if not np.isfinite(lp):
            return Evaluation(-np.inf, Y)
        ev = Evaluation(lp, Y)
        if gradients:
            d_eta, d_omega, _ = self.outcome.derivs(eta, state.omega_t)
            ev.grad_bo = np.concatenate([self.outcome.X.T @ d_eta + self.priors.grad_beta(state.beta),
                                         d_omega.sum(axis=0) + self.priors.grad_omega(state.omega_t)])
            ev.grad_latent = L.T @ d_eta - state.gamma
        return ev


# -- benchmark -----------------------------------------------------------------

@dataclass
class TimingRow:
    method: str
    n: int
    grid: str
    seconds_per_1000_iter: float


def _bench_data(n, seed):
    from .outcomes import WeibullBaseline
    from .simulate import CensoringScheme, simulate_survival
    from .grid import build_grid

    g = build_grid(np.array([[0.0, 0.0], [1.0, 1.0]]), 3, 3)
    sim = simulate_survival(n, [0.5, -0.3], WeibullBaseline(0.8, 0.5), np.zeros(g.m), g,
                            CensoringScheme(admin_time=3.0), seed=seed)
    return sim.data


def _time_chain(target, iterations, reps, seed):
    from .mcmc import ChainConfig, ProposalScalings, run_chain

    state = target.initial_state()
    sc = ProposalScalings.identity(target.dim_bo, target.dim_eta, target.dim_latent, h=0.1)
    cfg = ChainConfig(n_iterations=iterations, burnin=0, thin=iterations, seed=seed, adapt=False)
    run_chain(target, ChainConfig(n_iterations=2, thin=2, seed=seed, adapt=False), state, sc)  # warm-up
    times = []
    for r in range(reps):
        t0 = time.perf_counter()
        run_chain(target, cfg, state, sc)
        times.append(time.perf_counter() - t0)
    return float(np.median(times)) / iterations * 1000.0


def benchmark(dense_sizes=(50, 100, 200, 400), fourier_sizes=(250, 500, 1000, 2000),
              output_grids=(32,), iterations: int = 200, reps: int = 5, seed: int = 1,
              phi: float = 0.1, threads: int | None = 1) -> list[TimingRow]:
    """Per-iteration cost of the standard dense method and the grid method.

    ``output_grids`` are side lengths of the grid over the observation window;
    each runs on a grid twice as large per axis. Times are medians over
    ``reps`` runs, reported per 1000 iterations, with BLAS limited to
    ``threads`` threads.
    """
    from threadpoolctl import threadpool_limits
    from .grid import build_grid
    from .outcomes import WeibullSurvival

    priors = Priors(log_sigma=(np.log(0.5), 0.3), log_phi=(np.log(phi), 0.3))
    rows = []
    with threadpool_limits(limits=threads):
        for n in dense_sizes:
            target = StandardModel(WeibullSurvival(_bench_data(n, seed + n)), priors)
            rows.append(TimingRow("dense", n, "", _time_chain(target, iterations, reps, seed)))
        for side in output_grids:
            k = int(np.log2(2 * side))
            for n in fourier_sizes:
                data = _bench_data(n, seed + n)
                grid = build_grid(data.locations, k, k, 2.0, bbox=(0.0, 0.0, 1.0, 1.0))
                target = SpatialModel(WeibullSurvival(data), grid, priors)
                rows.append(TimingRow("fourier", n, f"{side}x{side}",
                                      _time_chain(target, iterations, reps, seed)))
    return rows


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def write_timings(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "n", "grid", "seconds_per_1000_iter"])
        for r in rows:
            w.writerow([r.method, r.n, r.grid, repr(r.seconds_per_1000_iter)])
