"""Auxiliary-grid MCMC for spatial survival and count models.

Spatial frailties live on a toroidally wrapped regular grid, so covariance
algebra reduces to 2-D FFTs and the sampled grid field doubles as the
spatial prediction.
"""
from .grid import Grid, build_grid, cell_of, toroidal_distance
from .spectral import (CovarianceModel, NonPositiveDefinite, SpectralBase, build_spectral,
                       cov_value, gamma_to_field, sqrt_matvec)
from .outcomes import (Censoring, CountData, PoissonCounts, SurvivalData, SurvivalRecord,
                       WeibullBaseline, WeibullSurvival)
from .posterior import ParameterState, Priors, SpatialModel
from .mcmc import ChainConfig, ChainOutput, ProposalScalings, fit, initialize, run_chain
from .prediction import baseline_hazard_band, covariance_band, diagnostics, summarize_field
from .simulate import CensoringScheme, simulate_field, simulate_poisson, simulate_survival

__version__ = "0.1.0"
