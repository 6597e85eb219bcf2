"""Stationary covariance on the torus and its circulant (FFT) algebra.

On the extended grid the covariance matrix of the field is block circulant,
so it is diagonalised by the 2-D DFT. Everything here works on the
``(ny, nx)`` base array (covariance between cell 0 and every other cell) and
its DFT, the eigenvalue array; the ``m x m`` matrix is never formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft, special

from .grid import Grid

PD_TOLERANCE = 1e-10


class NonPositiveDefinite(ValueError):
    """The embedded covariance has a non-positive eigenvalue.

    Usually the spatial range is too long relative to the extended grid; extend
    the grid (larger ``ext_factor``) or tighten the prior on the range.
    """

    def __init__(self, min_eig: float, phi: float | None = None):
        self.min_eig = float(min_eig)
        self.phi = phi
        msg = f"covariance on the extended grid is not positive definite (min eigenvalue {min_eig:.3g}"
        if phi is not None:
            msg += f", phi={phi:.6g}"
        super().__init__(msg + "); increase ext_factor or restrict the range")


@dataclass(frozen=True)
class CovarianceModel:
    kind: str = "exponential"
    sigma2: float = 1.0
    phi: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "matern"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if not (self.sigma2 >= 0 and self.phi > 0 and self.nu > 0):
            raise ValueError("need sigma2 >= 0, phi > 0, nu > 0")

    def with_params(self, sigma2: float, phi: float) -> "CovarianceModel":
        return CovarianceModel(self.kind, float(sigma2), float(phi), self.nu)


def cov_value(model: CovarianceModel, d):
    """Covariance at distance ``d``.

    exponential: ``sigma2 * exp(-d / phi)``;
    matern: ``sigma2 * 2**(1-nu) / Gamma(nu) * u**nu * K_nu(u)``,
    ``u = d * sqrt(2 nu) / phi``.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    if model.kind == "exponential":
        out = model.sigma2 * np.exp(-d / model.phi)
    else:
        nu = model.nu
        u = d * np.sqrt(2.0 * nu) / model.phi
        with np.errstate(invalid="ignore", over="ignore"):
            out = model.sigma2 * np.exp(
                (1.0 - nu) * np.log(2.0) - special.gammaln(nu)
                + nu * np.log(np.where(u > 0, u, 1.0))
            ) * special.kv(nu, u)
        out = np.where(u > 0, out, model.sigma2)
        # K_nu underflows to 0 far out; kv returns 0 there already
        out = np.nan_to_num(out, nan=0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralBase:
    """Base array of a symmetric block-circulant covariance and its spectrum.

    ``eigs_half`` is the ``rfft2`` half of the eigenvalue array; the base is
    even along each axis, so the full array is its mirror image.
    """
    base: np.ndarray  # (ny, nx)
    eigs_half: np.ndarray  # (ny, nx // 2 + 1)
    sigma2: float
    min_eig: float = field(init=False)
    _sqrt_half: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "min_eig", float(self.eigs_half.min()))
        object.__setattr__(self, "_sqrt_half", np.sqrt(np.clip(self.eigs_half, 0.0, None)))

    @property
    def shape(self):
        return self.base.shape

    @property
    def m(self) -> int:
        return self.base.size

    @property
    def eigs(self) -> np.ndarray:
        """Full ``(ny, nx)`` eigenvalue array."""
        nx = self.shape[1]
        mirror = self.eigs_half[:, 1:(nx + 1) // 2][:, ::-1]
        return np.concatenate([self.eigs_half, mirror], axis=1)

    def is_pd(self, tol: float = PD_TOLERANCE) -> bool:
        return self.min_eig > tol * max(self.sigma2, np.finfo(float).tiny)

    def logdet(self) -> float:
        return float(np.sum(np.log(self.eigs)))

    def sqrt_base(self) -> np.ndarray:
        """Base array of the symmetric square root (its first row, reshaped)."""
        return fft.irfft2(self._sqrt_half, s=self.shape)


def spectral_from_base(base: np.ndarray, sigma2: float | None = None,
                       pd_tol: float = PD_TOLERANCE, phi: float | None = None,
                       check: bool = True) -> SpectralBase:
    base = np.asarray(base, dtype=float)
    eigs_half = fft.rfft2(base).real
    s2 = float(base.flat[0]) if sigma2 is None else float(sigma2)
    sb = SpectralBase(base=base, eigs_half=eigs_half, sigma2=s2)
    if check and s2 > 0 and not sb.is_pd(pd_tol):
        raise NonPositiveDefinite(sb.min_eig, phi)
    return sb


def build_spectral(grid: Grid, model: CovarianceModel, pd_tol: float = PD_TOLERANCE,
                   lags: np.ndarray | None = None) -> SpectralBase:
    """Base array and eigenvalues of the field covariance on ``grid``.

    ``lags`` may carry a precomputed ``grid.lag_distances()`` to avoid
    rebuilding it on every call inside a sampler.

    Raises
    ------
    NonPositiveDefinite
        If the smallest eigenvalue is at or below ``pd_tol * sigma2``.
    """
    d = grid.lag_distances() if lags is None else lags
    base = cov_value(model, d)
    return spectral_from_base(base, model.sigma2, pd_tol, phi=model.phi)


def _apply(sb: SpectralBase, v, spectrum_half: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    shape = sb.shape
    lead = v.shape[:-1]
    grid_v = v.reshape(lead + shape)
    out = fft.irfft2(fft.rfft2(grid_v) * spectrum_half, s=shape)
    return out.reshape(v.shape)


def sqrt_matvec(sb: SpectralBase, v) -> np.ndarray:
    """Symmetric square root of the covariance applied to ``v``.

    ``v`` has length ``m`` in its last axis (leading axes are batched).
    Applying this twice gives the covariance times ``v``.
    """
    if sb.sigma2 > 0 and not sb.is_pd():
        raise NonPositiveDefinite(sb.min_eig)
    return _apply(sb, v, sb._sqrt_half)


def cov_matvec(sb: SpectralBase, v) -> np.ndarray:
    """Covariance times ``v`` (no positive-definiteness needed)."""
    return _apply(sb, v, sb.eigs_half)


def inv_sqrt_matvec(sb: SpectralBase, v) -> np.ndarray:
    """Inverse symmetric square root applied to ``v`` (whitening)."""
    if not sb.is_pd():
        raise NonPositiveDefinite(sb.min_eig)
    return _apply(sb, v, 1.0 / sb._sqrt_half)


def gamma_to_field(sb: SpectralBase, gamma, sigma2: float | None = None) -> np.ndarray:
    """Map white noise to the field: ``Y = -sigma2/2 + sqrt(Sigma) gamma``.

    The mean shift gives ``E[exp(Y)] = 1``.
    """
    s2 = sb.sigma2 if sigma2 is None else float(sigma2)
    if s2 == 0:
        return np.zeros(np.shape(gamma))
    return -0.5 * s2 + sqrt_matvec(sb, gamma)


def field_to_gamma(sb: SpectralBase, y, sigma2: float | None = None) -> np.ndarray:
    """Inverse of :func:`gamma_to_field`."""
    s2 = sb.sigma2 if sigma2 is None else float(sigma2)
    return inv_sqrt_matvec(sb, np.asarray(y, dtype=float) + 0.5 * s2)
