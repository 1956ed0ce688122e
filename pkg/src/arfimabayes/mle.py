"""Exact Gaussian maximum likelihood for ARFIMA and ARMA orders.

The optimizer works on logit-scaled coordinates so every trial point is
inside the open stationarity box, and sigma2 is profiled out in closed form.
A compiled Whittle fitter is provided for the high-volume ABC summaries.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from . import _kernels
from .errors import NumericalError
from .likelihood import LOG_2PI
from .model import ArfimaParams, frac_diff, order_names, parse_order
from .spectral import gph_estimate, periodogram, whittle_frequencies

log = logging.getLogger(__name__)

_BOUNDS = {"d": (-0.5, 0.5), "phi": (-1.0, 1.0), "theta": (-1.0, 1.0)}
_START_CLIP = {"d": 0.45, "phi": 0.9, "theta": 0.9}
HESSIAN_STEP = 1e-4


@dataclass(frozen=True)
class MleFit:
    """Optimum, asymptotic covariance and optimizer diagnostics.

    ``cov`` is indexed by ``names``, which lists the free (d, phi, theta)
    parameters of the order followed by ``sigma2``.
    """

    params: ArfimaParams
    cov: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    names: tuple[str, ...]

    def se(self) -> dict[str, float]:
        return dict(zip(self.names, np.sqrt(np.clip(np.diag(self.cov), 0.0, None))))

    def arma_cov(self) -> np.ndarray:
        """Covariance block of the (d, phi, theta) parameters alone."""
        k = len(self.names) - 1
        return self.cov[:k, :k]


def _to_unconstrained(x, names):
    out = np.empty(len(names))
    for i, name in enumerate(names):
        lo, hi = _BOUNDS[name]
        p = (x[i] - lo) / (hi - lo)
        out[i] = math.log(p / (1.0 - p))
    return out


def _to_constrained(u, names):
    out = np.empty(len(names))
    for i, name in enumerate(names):
        lo, hi = _BOUNDS[name]
        out[i] = lo + (hi - lo) * 0.5 * (1.0 + math.tanh(0.5 * u[i]))
    return out


def _unpack(x, names, fixed_d=0.0):
    vals = dict(d=fixed_d, phi=0.0, theta=0.0)
    vals.update(zip(names, x))
    return vals["d"], vals["phi"], vals["theta"]


def _quad_logdet(y, d, phi, theta, arma_only):
    if arma_only:
        return _kernels.arma11_quad_logdet(phi, theta, y)
    return _kernels.levinson_quad_logdet(_kernels.arfima_acvf_unit(d, phi, theta, y.size), y)


def _profile_nll(x, y, names, arma_only):
    q, ld = _quad_logdet(y, *_unpack(x, names), arma_only)
    if not np.isfinite(q) or q <= 0.0:
        return np.inf
    n = y.size
    return 0.5 * (n * (LOG_2PI + math.log(q / n) + 1.0) + ld)


def _full_nll(z, y, names, arma_only):
    """Negative log-likelihood at ``z = (free params..., sigma2)``."""
    *x, s2 = z
    if s2 <= 0.0:
        return np.inf
    q, ld = _quad_logdet(y, *_unpack(x, names), arma_only)
    if not np.isfinite(q):
        return np.inf
    return 0.5 * (y.size * (LOG_2PI + math.log(s2)) + ld + q / s2)


def start_point(series, order: str, arma_only: bool = False) -> dict[str, float]:
    """GPH estimate for d, lag-1 moment estimate for phi, zero for theta."""
    y = np.asarray(series, dtype=float)
    d0 = 0.0 if arma_only else float(np.clip(gph_estimate(y), -_START_CLIP["d"], _START_CLIP["d"]))
    u = frac_diff(y, d0) if d0 != 0.0 else y
    rho1 = float(u[1:] @ u[:-1] / (u @ u)) if u @ u > 0 else 0.0
    return {"d": d0, "phi": float(np.clip(rho1, -_START_CLIP["phi"], _START_CLIP["phi"])), "theta": 0.0}


def _hessian(f, z, steps):
    k = z.size
    h = np.empty((k, k))
    f0 = f(z)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = steps[i]
        fp, fm = f(z + ei), f(z - ei)
        h[i, i] = (fp - 2.0 * f0 + fm) / steps[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = steps[j]
            h[i, j] = h[j, i] = (
                f(z + ei + ej) - f(z + ei - ej) - f(z - ei + ej) + f(z - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    return h


def _invert_hessian(h):
    try:
        c = linalg.cho_factor(h)
        return linalg.cho_solve(c, np.eye(h.shape[0]))
    except (linalg.LinAlgError, ValueError):
        log.warning("observed information is not positive definite; using a pseudo-inverse")
        w, v = linalg.eigh(0.5 * (h + h.T))
        w = np.abs(w)
        inv = np.where(w > 1e-12 * max(w.max(), 1e-300), 1.0 / np.where(w > 0, w, 1.0), 0.0)
        return (v * inv) @ v.T


def _fit(series, order: str, arma_only: bool, maxiter: int, fatol: float) -> MleFit:
    order = parse_order(order)
    y = np.asarray(series, dtype=float)
    names = tuple(nm for nm in order_names(order) if not (arma_only and nm == "d"))
    start = start_point(y, order, arma_only)

    if names:
        u0 = _to_unconstrained(np.array([start[nm] for nm in names]), names)
        simplex = np.vstack([u0] + [u0 + 0.5 * e for e in np.eye(u0.size)])

        def objective(u):
            return _profile_nll(_to_constrained(u, names), y, names, arma_only)

        res = optimize.minimize(
            objective, u0, method="Nelder-Mead",
            options=dict(maxiter=maxiter, fatol=fatol, xatol=1e-8, initial_simplex=simplex),
        )
        x = _to_constrained(res.x, names)
        converged, iterations = bool(res.success), int(res.nit)
        if not converged:
            log.warning("MLE did not converge in %d iterations (%s)", maxiter, res.message)
    else:
        x = np.empty(0)
        converged, iterations = True, 0

    d, phi, theta = _unpack(x, names)
    q, _ = _quad_logdet(y, d, phi, theta, arma_only)
    if not np.isfinite(q):
        raise NumericalError("covariance not positive definite at the MLE")
    s2 = q / y.size
    z = np.append(x, s2)

    # keep finite-difference points strictly inside the open box
    steps = np.empty(z.size)
    for i, nm in enumerate(names):
        lo, hi = _BOUNDS[nm]
        steps[i] = min(HESSIAN_STEP, 0.45 * (x[i] - lo), 0.45 * (hi - x[i]))
    steps[-1] = HESSIAN_STEP * s2
    hess = _hessian(lambda zz: _full_nll(zz, y, names, arma_only), z, steps)
    cov = _invert_hessian(hess)
    cov = 0.5 * (cov + cov.T)

    params = ArfimaParams.from_order(order, d, phi, theta, s2)
    return MleFit(params, cov, -_full_nll(z, y, names, arma_only), converged, iterations,
                  names + ("sigma2",))


def fit_mle(series, order: str = "1d1", maxiter: int = 2000, fatol: float = 1e-8) -> MleFit:
    """Exact ARFIMA maximum likelihood by Nelder-Mead with profiled sigma2.

    Parameters
    ----------
    series : array_like
        Demeaned observations.
    order : str
        One of ``"0d0"``, ``"1d0"``, ``"0d1"``, ``"1d1"``.

    Returns
    -------
    MleFit
        The best point found. ``converged`` is False if the iteration cap
        was hit; the point is still returned.
    """
    return _fit(series, order, False, maxiter, fatol)


def fit_arma_mle(series, order: str = "1d1", maxiter: int = 2000, fatol: float = 1e-8) -> MleFit:
    """As :func:`fit_mle` with d fixed at zero (plain ARMA fit)."""
    return _fit(series, order, True, maxiter, fatol)


def fit_whittle(series, order: str = "1d1", start=None, fixed_d: float | None = None,
                maxiter: int = 200, ftol: float = 1e-8) -> np.ndarray:
    """Fast Whittle estimate of ``(d, phi, theta)``; absent terms are 0.

    ``fixed_d`` holds d at a given value and fits only the ARMA terms.
    """
    order = parse_order(order)
    y = np.asarray(series, dtype=float)
    ordinates = periodogram(y).ordinates
    idx, l4, cosl = whittle_frequencies(y.size)
    free = np.array([fixed_d is None, order[0] == "1", order[2] == "1"])
    if start is None:
        s = start_point(y, order)
        start = [s["d"], s["phi"] if free[1] else 0.0, 0.0]
    x0 = np.asarray(start, dtype=float).copy()
    if fixed_d is not None:
        x0[0] = fixed_d
    x, _ = _kernels.whittle_fit(x0, free, ordinates[idx], l4, cosl, maxiter, ftol)
    return x
