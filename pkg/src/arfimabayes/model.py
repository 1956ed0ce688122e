"""ARFIMA(p<=1, d, q<=1) parameters, autocovariances, filters and simulation.

Sign convention throughout: ``(1 - phi B)(1 - B)^d y_t = (1 + theta B) w_t``
with ``w_t ~ N(0, sigma2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, signal

from . import _kernels
from .errors import NumericalError, ParameterDomainError

ORDERS = ("0d0", "1d0", "0d1", "1d1")

_ORDER_ALIASES = {
    "(0,d,0)": "0d0",
    "(1,d,0)": "1d0",
    "(0,d,1)": "0d1",
    "(1,d,1)": "1d1",
}


def parse_order(order: str) -> str:
    """Normalise ``"1d1"``, ``"(1,d,1)"`` or ``"1,d,1"`` to the short form."""
    key = order.strip().lower().replace(" ", "")
    if key in ORDERS:
        return key
    if not key.startswith("("):
        key = f"({key})"
    try:
        return _ORDER_ALIASES[key]
    except KeyError:
        raise ValueError(f"unsupported ARFIMA order {order!r}; expected one of {ORDERS}") from None


def order_names(order: str) -> tuple[str, ...]:
    """Names of the free (d, phi, theta) parameters for an order."""
    order = parse_order(order)
    names = ["d"]
    if order[0] == "1":
        names.append("phi")
    if order[2] == "1":
        names.append("theta")
    return tuple(names)


@dataclass(frozen=True)
class ArfimaParams:
    """A point ``(d, phi, theta, sigma2)``; ``None`` marks an absent ARMA term."""

    d: float
    phi: Optional[float] = None
    theta: Optional[float] = None
    sigma2: float = 1.0

    def __post_init__(self):
        if not -0.5 < self.d < 0.5:
            raise ParameterDomainError(f"d={self.d} outside the stationary range (-0.5, 0.5)")
        if self.phi is not None and not -1.0 < self.phi < 1.0:
            raise ParameterDomainError(f"phi={self.phi} outside (-1, 1)")
        if self.theta is not None and not -1.0 < self.theta < 1.0:
            raise ParameterDomainError(f"theta={self.theta} outside (-1, 1)")
        if not self.sigma2 > 0.0:
            raise ParameterDomainError(f"sigma2={self.sigma2} must be positive")

    @classmethod
    def from_order(cls, order, d, phi=0.0, theta=0.0, sigma2=1.0) -> "ArfimaParams":
        """Build a point for ``order``, dropping the terms it does not carry."""
        order = parse_order(order)
        return cls(
            d=float(d),
            phi=float(phi) if order[0] == "1" else None,
            theta=float(theta) if order[2] == "1" else None,
            sigma2=float(sigma2),
        )

    @property
    def order(self) -> str:
        return f"{int(self.phi is not None)}d{int(self.theta is not None)}"

    @property
    def ar(self) -> float:
        return 0.0 if self.phi is None else self.phi

    @property
    def ma(self) -> float:
        return 0.0 if self.theta is None else self.theta

    def as_vector(self) -> np.ndarray:
        """``[d, phi, theta, sigma2]`` with absent terms as 0."""
        return np.array([self.d, self.ar, self.ma, self.sigma2])

    def replace(self, **changes) -> "ArfimaParams":
        values = dict(d=self.d, phi=self.phi, theta=self.theta, sigma2=self.sigma2)
        values.update(changes)
        return ArfimaParams(**values)


@dataclass(frozen=True)
class Series:
    """An observed or simulated series, optionally with its sample mean removed."""

    values: np.ndarray
    demeaned: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a series needs at least 2 observations")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values, demean: bool = True) -> "Series":
        x = np.asarray(values, dtype=float)
        if demean:
            x = x - x.mean()
        return cls(x, demeaned=demean)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class AcvfVector:
    """Autocovariances gamma(0..L-1) and the route that produced them."""

    gamma: np.ndarray
    method: str

    def __len__(self):
        return self.gamma.size

    def __getitem__(self, item):
        return self.gamma[item]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.gamma, dtype=dtype)

    def toeplitz(self, size: Optional[int] = None) -> np.ndarray:
        g = self.gamma if size is None else self.gamma[:size]
        return linalg.toeplitz(g)


def _check_lags(max_lag: int) -> int:
    max_lag = int(max_lag)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    return max_lag


def _check_d(d: float):
    if not -0.5 < d < 0.5:
        raise ParameterDomainError(f"d={d} outside the stationary range (-0.5, 0.5)")


def acvf_arfima0d0(d: float, sigma2: float, max_lag: int) -> AcvfVector:
    """Autocovariances of fractionally integrated noise, lags ``0..max_lag-1``.

    Uses ``gamma(0) = sigma2 Gamma(1-2d) / Gamma(1-d)^2`` and the ratio
    ``gamma(h) / gamma(h-1) = (h-1+d) / (h-d)``, which is the closed form with
    the Gamma(d) pole cancelled, so ``d = 0`` gives white noise directly.
    """
    _check_d(d)
    if not sigma2 > 0:
        raise ParameterDomainError("sigma2 must be positive")
    g = sigma2 * _kernels.arfima0d0_acvf_unit(float(d), _check_lags(max_lag))
    return AcvfVector(g, "arfima0d0")


def acvf_arma11(phi: float, theta: float, sigma2: float, max_lag: int) -> AcvfVector:
    """Autocovariances of ``(1 - phi B) y_t = (1 + theta B) w_t``."""
    if not -1.0 < phi < 1.0:
        raise ParameterDomainError(f"phi={phi} outside (-1, 1)")
    if not -1.0 < theta < 1.0:
        raise ParameterDomainError(f"theta={theta} outside (-1, 1)")
    g = sigma2 * _kernels.arma11_acvf_unit(float(phi), float(theta), _check_lags(max_lag))
    return AcvfVector(g, "arma11")


def acvf_convolution(params: ArfimaParams, max_lag: int) -> AcvfVector:
    """ARFIMA autocovariances from the ARMA(1,1) weights convolved with gamma_0.

    ``gamma(h) = sum_j sum_k psi_j psi_k gamma_0(h + j - k)``. The double sum is
    evaluated through the ARMA autocovariance ``sum_j psi_j psi_{j+m}``, whose
    geometric tail is kept until ``|phi|^m < 1e-14``.
    """
    g = _kernels.arfima_acvf_unit(params.d, params.ar, params.ma, _check_lags(max_lag))
    return AcvfVector(params.sigma2 * g, "convolution")


def hyp2f1_unit_b(a, c, x, rtol: float = 1e-12, max_terms: int = 100_000):
    """Gauss ``F(a, 1; c; x)`` by its power series, elementwise over ``a`` and ``c``.

    Raises NumericalError if the series has not met ``rtol`` after
    ``max_terms`` terms.
    """
    a, c = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(c, dtype=float))
    if not abs(x) < 1.0:
        raise NumericalError("hypergeometric series diverges for |x| >= 1")
    term = np.ones(a.shape)
    total = np.ones(a.shape)
    active = np.ones(a.shape, dtype=bool)
    # terms only shrink monotonically once a + k and c + k are both positive
    settle = np.maximum(0.0, -np.minimum(a, c)) + 1.0
    tail = 1.0 / (1.0 - abs(x))
    for k in range(max_terms):
        term = np.where(active, term * (a + k) / (c + k) * x, 0.0)
        total = total + term
        active &= (k < settle) | (np.abs(term) * tail > rtol * np.abs(total))
        if not active.any():
            return total
    raise NumericalError(f"hypergeometric series did not converge in {max_terms} terms")


# below this the hypergeometric terms cancel to about eps / |d| relative error
_EXACT_MIN_D = 1e-6


def acvf_arfima_exact(params: ArfimaParams, max_lag: int) -> AcvfVector:
    """Closed-form ARFIMA(1,d,1) autocovariances via Gauss hypergeometric series.

    With AR root ``rho = phi`` (for the ``1 - phi B`` convention)::

        gamma(h) = sigma2 / (rho (1 - rho^2)) * [theta C(d, -h, rho)
                   + theta C(d, 2 - h, rho) + (1 + theta^2) C(d, 1 - h, rho)]
        C(d, h, rho) = gamma_0(h) / sigma2 * [rho^2 F(d + h, 1; 1 - d + h; rho)
                   + F(d - h, 1; 1 - d - h; rho) - 1]

    A missing MA term is treated as ``theta = 0``. The prefactor is singular
    at ``phi = 0`` and the series is ill-conditioned near ``d = 0``; use
    :func:`acvf_convolution` there.
    """
    max_lag = _check_lags(max_lag)
    phi, theta, d = params.ar, params.ma, params.d
    if phi == 0.0:
        raise ParameterDomainError("exact ACVF is singular at phi = 0; use acvf_convolution")
    if abs(d) < _EXACT_MIN_D:
        raise ParameterDomainError(f"exact ACVF loses accuracy for |d| < {_EXACT_MIN_D:g}; use acvf_convolution")
    rho = phi
    h = np.arange(max_lag)
    lags = np.arange(-max_lag - 2, max_lag + 3)
    g0 = _kernels.arfima0d0_acvf_unit(d, max_lag + 3)
    g0_at = g0[np.abs(lags)]
    c_vals = g0_at * (
        rho**2 * hyp2f1_unit_b(d + lags, 1.0 - d + lags, rho)
        + hyp2f1_unit_b(d - lags, 1.0 - d - lags, rho)
        - 1.0
    )

    def C(k):
        return c_vals[k - lags[0]]

    gamma = (theta * C(-h) + theta * C(2 - h) + (1.0 + theta**2) * C(1 - h)) / (rho * (1.0 - rho**2))
    return AcvfVector(params.sigma2 * gamma, "exact-hypergeometric")


def frac_diff_weights(d: float, size: int) -> np.ndarray:
    """Coefficients of ``(1 - B)^d`` truncated to ``size`` terms."""
    k = np.arange(1, size)
    return np.concatenate(([1.0], np.cumprod((k - 1.0 - d) / k)))


def frac_diff(series, d: float) -> np.ndarray:
    """Apply ``(1 - B)^d`` with pre-sample values taken as zero."""
    y = np.asarray(series, dtype=float)
    if d == 0.0:
        return y.copy()
    return np.convolve(y, frac_diff_weights(d, y.size))[: y.size]


def arma_filter(series, phi: float, theta: float) -> np.ndarray:
    """``z_t = y_t - phi y_{t-1} - theta z_{t-1}`` from zero initial conditions."""
    y = np.asarray(series, dtype=float)
    return signal.lfilter([1.0, -phi], [1.0, theta], y)


def arma_unfilter(series, phi: float, theta: float) -> np.ndarray:
    """Inverse of :func:`arma_filter`."""
    z = np.asarray(series, dtype=float)
    return signal.lfilter([1.0, theta], [1.0, -phi], z)


def simulate_arfima(params: ArfimaParams, n: int, seed=None, method: str = "levinson") -> np.ndarray:
    """Draw ``y ~ N(0, sigma2 Sigma_n)`` exactly.

    ``method="levinson"`` generates ``L e`` for the lower Cholesky factor L
    through the Durbin-Levinson one-step predictors in O(n^2);
    ``method="cholesky"`` factorizes the dense Toeplitz matrix in O(n^3).
    Both consume the same standard normal vector, so a seed gives the same
    series either way up to rounding.
    """
    n = int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    gamma = _kernels.arfima_acvf_unit(params.d, params.ar, params.ma, n)
    scale = math.sqrt(params.sigma2)
    if method == "levinson":
        y = _kernels.levinson_extend(gamma, np.empty(0), e, scale)
        if np.isnan(y[0]):
            raise NumericalError("Toeplitz covariance is not positive definite")
        return y
    if method == "cholesky":
        try:
            L = linalg.cholesky(linalg.toeplitz(gamma), lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError("Toeplitz covariance is not positive definite") from exc
        return scale * (L @ e)
    raise ValueError(f"unknown simulation method {method!r}")

