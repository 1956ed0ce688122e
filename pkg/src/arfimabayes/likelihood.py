"""Gaussian ARFIMA likelihood and the posterior pieces built on it.

All routines evaluate ``y' Sigma_n^-1 y`` and ``log|Sigma_n|`` in a single
Durbin-Levinson pass (O(n^2) time, O(n) memory). ``log_likelihood_dense``
is the O(n^3) Cholesky reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _kernels
from .errors import NumericalError
from .model import ArfimaParams

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Priors:
    """Uniform priors on (d, phi, theta) and an inverse-gamma prior on sigma2.

    ``beta`` is the IG rate, so the prior mean is ``beta / (alpha - 1)``.
    """

    alpha: float = 28.0
    beta: float = 30.0
    d_bounds: tuple[float, float] = (-0.5, 0.5)
    phi_bounds: tuple[float, float] = (-1.0, 1.0)
    theta_bounds: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("inverse-gamma hyperparameters must be positive")
        for name, (lo, hi) in self.bounds().items():
            if not lo < hi:
                raise ValueError(f"empty prior support for {name}")

    def bounds(self) -> dict[str, tuple[float, float]]:
        return {"d": self.d_bounds, "phi": self.phi_bounds, "theta": self.theta_bounds}

    def contains(self, d: float, phi: float = 0.0, theta: float = 0.0) -> bool:
        return (
            self.d_bounds[0] < d < self.d_bounds[1]
            and self.phi_bounds[0] < phi < self.phi_bounds[1]
            and self.theta_bounds[0] < theta < self.theta_bounds[1]
        )


# IG(28, 30) in the simulation setting, IG(33, 45) for the GNP series
STUDY_PRIORS = Priors(alpha=28.0, beta=30.0)
GNP_PRIORS = Priors(alpha=33.0, beta=45.0)


@dataclass(frozen=True)
class LogPosteriorValue:
    """Log-density up to an additive constant, with the quadratic form it used."""

    value: float
    params: tuple[float, float, float]
    quad: float = field(default=math.nan, compare=False)
    logdet: float = field(default=math.nan, compare=False)

    def __float__(self):
        return self.value


def quad_logdet(gamma: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """``(y' S^-1 y, log|S|)`` for ``S = toeplitz(gamma)``; raises if S is not PD."""
    q, ld = _kernels.levinson_quad_logdet(np.asarray(gamma, dtype=float), np.asarray(y, dtype=float))
    if not np.isfinite(q):
        raise NumericalError("Toeplitz covariance is not positive definite")
    return q, ld


def _unit_acvf(d, phi, theta, n):
    return _kernels.arfima_acvf_unit(float(d), float(phi), float(theta), n)


def log_likelihood(series, params: ArfimaParams) -> float:
    """``log N(y; 0, sigma2 Sigma_n)`` via Durbin-Levinson."""
    y = np.asarray(series, dtype=float)
    n = y.size
    q, ld = quad_logdet(_unit_acvf(params.d, params.ar, params.ma, n), y)
    return -0.5 * (n * (LOG_2PI + math.log(params.sigma2)) + ld + q / params.sigma2)


def log_likelihood_dense(series, params: ArfimaParams) -> float:
    """Reference log-likelihood from an explicit Cholesky factorization."""
    y = np.asarray(series, dtype=float)
    n = y.size
    cov = params.sigma2 * linalg.toeplitz(_unit_acvf(params.d, params.ar, params.ma, n))
    try:
        L = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc
    z = linalg.solve_triangular(L, y, lower=True)
    return -0.5 * (n * LOG_2PI + 2.0 * np.log(np.diag(L)).sum() + z @ z)


def profile_log_likelihood(series, d: float, phi: float = 0.0, theta: float = 0.0) -> tuple[float, float]:
    """Log-likelihood maximized over sigma2; returns ``(loglik, sigma2_hat)``."""
    y = np.asarray(series, dtype=float)
    n = y.size
    q, ld = quad_logdet(_unit_acvf(d, phi, theta, n), y)
    s2 = q / n
    return -0.5 * (n * (LOG_2PI + math.log(s2) + 1.0) + ld), s2


def integrated_from_parts(quad: float, logdet: float, n: int, priors: Priors) -> float:
    """``-1/2 log|Sigma| - (n/2 + alpha) log(quad + 2 beta)``."""
    return -0.5 * logdet - (0.5 * n + priors.alpha) * math.log(quad + 2.0 * priors.beta)


def log_integrated_posterior(series, d: float, phi: float = 0.0, theta: float = 0.0,
                             priors: Priors = STUDY_PRIORS) -> LogPosteriorValue:
    """Marginal log-posterior of (d, phi, theta) with sigma2 integrated out.

    Outside the prior support the value is ``-inf`` (no error), which makes
    such proposals rejected with probability one.
    """
    point = (float(d), float(phi), float(theta))
    if not priors.contains(*point):
        return LogPosteriorValue(-math.inf, point)
    y = np.asarray(series, dtype=float)
    q, ld = quad_logdet(_unit_acvf(*point, y.size), y)
    return LogPosteriorValue(integrated_from_parts(q, ld, y.size, priors), point, q, ld)


def sigma2_conditional_params(quad: float, n: int, priors: Priors) -> tuple[float, float]:
    """Shape and scale of the inverse-gamma full conditional of sigma2."""
    return 0.5 * n + priors.alpha, 0.5 * (quad + 2.0 * priors.beta)


def draw_inverse_gamma(shape: float, scale: float, rng: np.random.Generator, size=None):
    return scale / rng.gamma(shape, 1.0, size=size)


def sample_sigma2_conditional(series, d: float, phi: float = 0.0, theta: float = 0.0,
                              priors: Priors = STUDY_PRIORS, rng=None, size=None):
    """Draw sigma2 from IG(n/2 + alpha, (y' Sigma^-1 y + 2 beta) / 2)."""
    rng = np.random.default_rng(rng)
    y = np.asarray(series, dtype=float)
    q, _ = quad_logdet(_unit_acvf(d, phi, theta, y.size), y)
    shape, scale = sigma2_conditional_params(q, y.size, priors)
    return draw_inverse_gamma(shape, scale, rng, size)


def log_posterior_grid(series, d_grid, phi_grid, theta_fixed: float = 0.0,
                       priors: Priors = STUDY_PRIORS) -> np.ndarray:
    """Integrated log-posterior on a (d, phi) grid; rows follow ``d_grid``."""
    d_grid = np.atleast_1d(np.asarray(d_grid, dtype=float))
    phi_grid = np.atleast_1d(np.asarray(phi_grid, dtype=float))
    out = np.empty((d_grid.size, phi_grid.size))
    for i, d in enumerate(d_grid):
        for j, phi in enumerate(phi_grid):
            out[i, j] = log_integrated_posterior(series, d, phi, theta_fixed, priors).value
    return out


def ridge_correlation(grid_values, d_grid, phi_grid, within: float = 2.0) -> float:
    """Pearson correlation of (d, phi) over grid cells within ``within`` log-units of the max.

    A negative value means the high-posterior region runs along a
    descending d-phi ridge.
    """
    v = np.asarray(grid_values, dtype=float)
    dd, pp = np.meshgrid(np.asarray(d_grid, dtype=float), np.asarray(phi_grid, dtype=float), indexing="ij")
    keep = np.isfinite(v) & (v >= np.nanmax(v) - within)
    if keep.sum() < 3 or np.ptp(dd[keep]) == 0 or np.ptp(pp[keep]) == 0:
        return math.nan
    return float(np.corrcoef(dd[keep], pp[keep])[0, 1])
