"""Posterior-predictive forecasts from the conditional Gaussian of future values."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from ._out import open_output
from . import _kernels
from .draws import PosteriorDraws, fmt17
from .errors import NumericalError
from .model import ArfimaParams


def _unit_acvf(params: ArfimaParams, size: int) -> np.ndarray:
    return _kernels.arfima_acvf_unit(params.d, params.ar, params.ma, size)


def conditional_predictive(series, params: ArfimaParams, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the next ``b`` values given the observed series.

    Partitioning the joint ``(n+b)``-dimensional covariance into the observed
    block ``S11``, the cross block ``S21`` and the future block ``S22`` gives
    ``mean = S21 S11^-1 y`` and ``cov = S22 - S21 S11^-1 S12``. The solves
    against the Toeplitz ``S11`` use Levinson recursions, not an inverse.
    """
    if b < 1:
        raise ValueError("forecast horizon b must be at least 1")
    y = np.asarray(series, dtype=float)
    n = y.size
    g = _unit_acvf(params, n + b)
    col = g[:n]
    # S21[k, t] = gamma(n + k - t)
    lags = n + np.arange(b)[:, None] - np.arange(n)[None, :]
    s21 = g[lags]
    solved = linalg.solve_toeplitz(col, np.column_stack([y, s21.T]))
    mean = s21 @ solved[:, 0]
    s22 = linalg.toeplitz(g[:b])
    cov = params.sigma2 * (s22 - s21 @ solved[:, 1:])
    cov = 0.5 * (cov + cov.T)
    try:
        linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("conditional covariance is not positive definite") from exc
    return mean, cov


def sample_conditional_path(series, params: ArfimaParams, b: int, rng) -> np.ndarray:
    """One exact draw of the next ``b`` values, by sequential one-step conditionals."""
    y = np.asarray(series, dtype=float)
    g = _unit_acvf(params, y.size + b)
    path = _kernels.levinson_extend(g, y, rng.standard_normal(b), np.sqrt(params.sigma2))[y.size:]
    if not np.all(np.isfinite(path)):
        raise NumericalError("covariance not positive definite while sampling a forecast path")
    return path


@dataclass
class ForecastDraws:
    """Sampled future paths (one per posterior draw) and per-step summaries."""

    paths: np.ndarray
    level: float = 0.90

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.paths.mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.paths.std(axis=0, ddof=1) if self.paths.shape[0] > 1 else np.zeros(self.horizon)

    @property
    def lb(self) -> np.ndarray:
        return np.quantile(self.paths, (1.0 - self.level) / 2.0, axis=0)

    @property
    def ub(self) -> np.ndarray:
        return np.quantile(self.paths, 1.0 - (1.0 - self.level) / 2.0, axis=0)

    def covered(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (truth >= self.lb) & (truth <= self.ub)

    def to_csv(self, path, include_paths: bool = False) -> None:
        with open_output(path) as fh:
            w = csv.writer(fh)
            head = ["step", "mean", "lb", "ub"]
            if include_paths:
                head += [f"path{i + 1}" for i in range(self.paths.shape[0])]
            w.writerow(head)
            for k in range(self.horizon):
                row = [k + 1, fmt17(self.mean[k]), fmt17(self.lb[k]), fmt17(self.ub[k])]
                if include_paths:
                    row += [fmt17(v) for v in self.paths[:, k]]
                w.writerow(row)

    def to_json_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "paths": int(self.paths.shape[0]),
            "steps": [
                {"step": k + 1, "mean": float(m), "lb": float(lo), "ub": float(hi)}
                for k, (m, lo, hi) in enumerate(zip(self.mean, self.lb, self.ub))
            ],
        }


def posterior_predictive_paths(series, draws: PosteriorDraws, b: int, rng=None,
                               level: float = 0.90) -> ForecastDraws:
    """One forecast path of length ``b`` per posterior draw."""
    if len(draws) == 0:
        raise ValueError("need at least one posterior draw")
    if b < 1:
        raise ValueError("forecast horizon b must be at least 1")
    rng = np.random.default_rng(rng)
    paths = np.empty((len(draws), b))
    for i in range(len(draws)):
        paths[i] = sample_conditional_path(series, draws.params(i), b, rng)
    return ForecastDraws(paths, level)


def plug_in_interval(series, params: ArfimaParams, b: int, level: float = 0.90):
    """Gaussian point forecast and equal-tailed interval at fixed parameters."""
    mean, cov = conditional_predictive(series, params, b)
    sd = np.sqrt(np.diag(cov))
    z = stats.norm.ppf(0.5 + level / 2.0)
    return mean, sd, mean - z * sd, mean + z * sd
