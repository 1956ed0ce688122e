"""Bayesian estimation of Gaussian ARFIMA(p, d, q) models with p, q <= 1.

Exact-likelihood MCMC, approximate Bayesian computation with periodogram
summaries, maximum likelihood, posterior-predictive forecasting and a
replicated simulation-study harness.
"""

from .abc import AbcConfig, run_abc
from .draws import PosteriorDraws
from .errors import InputError, NumericalError, ParameterDomainError, WorkerError
from .forecast import ForecastDraws, plug_in_interval, posterior_predictive_paths
from .io import VERSION as __version__
from .likelihood import Priors, log_integrated_posterior, log_likelihood
from .mcmc import McmcConfig, dic, effective_sample_size, run_mcmc
from .mle import MleFit, fit_mle, fit_whittle
from .model import ArfimaParams, Series, acvf_arfima_exact, acvf_convolution, simulate_arfima
from .study import StudyConfig, forecast_study, run_study

__all__ = [
    "AbcConfig", "ArfimaParams", "ForecastDraws", "InputError", "McmcConfig", "MleFit", "NumericalError",
    "ParameterDomainError", "PosteriorDraws", "Priors", "Series", "StudyConfig", "WorkerError",
    "__version__", "acvf_arfima_exact", "acvf_convolution", "dic", "effective_sample_size", "fit_mle",
    "fit_whittle", "forecast_study", "log_integrated_posterior", "log_likelihood", "plug_in_interval",
    "posterior_predictive_paths", "run_abc", "run_mcmc", "run_study", "simulate_arfima",
]
