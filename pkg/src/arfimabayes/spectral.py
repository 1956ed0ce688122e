"""Periodogram-based summaries: raw ordinates, pooled log-periodogram, GPH."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Periodogram:
    """Ordinates ``I(k_j)`` at ``k_j = 2 pi (j - 1) / n`` for ``j = 1..floor(n/2)``."""

    ordinates: np.ndarray
    frequencies: np.ndarray
    n: int

    def __len__(self):
        return self.ordinates.size


def periodogram(series, full: bool = False) -> Periodogram:
    """``I(k_j) = |sum_t y_t exp(-i t k_j)|^2 / n`` via the FFT.

    Only the first ``floor(n/2)`` ordinates are returned (starting at the zero
    frequency) unless ``full`` is set, in which case all ``n`` are.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    power = np.abs(np.fft.fft(y)) ** 2 / n
    m = n if full else n // 2
    return Periodogram(power[:m], 2.0 * np.pi * np.arange(m) / n, n)


def periodogram_ordinates(batch: np.ndarray) -> np.ndarray:
    """First ``floor(n/2)`` ordinates for each row of a 2-D batch of series."""
    n = batch.shape[-1]
    return np.abs(np.fft.rfft(batch, axis=-1)[..., : n // 2]) ** 2 / n


def pooled_indices(n: int, J: int = 2, ell: int = 0, m: int | None = None) -> np.ndarray:
    """The index set ``{ell + J, ell + 2J, ..., m}`` (1-based)."""
    m = n // 2 if m is None else m
    if J < 1 or ell < 0:
        raise ValueError("need J >= 1 and ell >= 0")
    if m > n // 2:
        raise ValueError("m cannot exceed n/2")
    return np.arange(ell + J, m + 1, J)


def pooled_log_periodogram(series, J: int = 2, ell: int = 0, m: int | None = None,
                           ordinates: np.ndarray | None = None) -> np.ndarray:
    """``P_i = log sum_{j=1..J} I(k_{i+j-J})`` for ``i`` in the pooled index set.

    Indices whose pooled sum is zero (e.g. the lone zero-frequency ordinate of
    a demeaned series when ``J = 1``) are dropped with a warning.
    """
    if ordinates is None:
        ordinates = periodogram(series).ordinates
        n = np.asarray(series).size
    else:
        n = 2 * ordinates.size
    idx = pooled_indices(n, J, ell, m)
    # 1-based I(k_{i+j-J}), j = 1..J  ->  0-based i - J .. i - 1
    sums = np.zeros(idx.size)
    for j in range(J):
        sums += ordinates[idx - J + j]
    keep = sums > 0.0
    if not keep.all():
        log.warning("dropping %d pooled log-periodogram indices with zero sum", int((~keep).sum()))
    return np.log(sums[keep])


def gph_estimate(series, bandwidth: float = 0.5) -> float:
    """Geweke-Porter-Hudak log-periodogram regression estimate of d.

    Regresses ``log I(lambda_j)`` on ``log(4 sin^2(lambda_j / 2))`` over the
    first ``floor(n**bandwidth)`` positive Fourier frequencies; ``d = -slope``.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    m = max(3, int(n**bandwidth))
    m = min(m, n // 2 - 1)
    logp = pooled_log_periodogram(y, J=1, ell=1, m=m + 1)
    lam = 2.0 * np.pi * np.arange(1, m + 1) / n
    x = np.log(4.0 * np.sin(lam / 2.0) ** 2)
    if logp.size != x.size:
        return 0.0
    slope = np.polyfit(x, logp, 1)[0]
    return float(-slope)


def whittle_frequencies(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Positive non-Nyquist Fourier frequencies for Whittle fitting.

    Returns ``(index, log(4 sin^2(lambda/2)), cos(lambda))`` where ``index``
    selects the matching entries of the full ``floor(n/2)`` ordinate vector.
    """
    idx = np.arange(1, (n - 1) // 2 + 1)
    idx = idx[idx < n // 2]
    lam = 2.0 * np.pi * idx / n
    return idx, np.log(4.0 * np.sin(lam / 2.0) ** 2), np.cos(lam)
