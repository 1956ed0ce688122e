"""Rejection ABC for ARFIMA with periodogram-based long-memory summaries.

Every simulation draws (d, phi, theta, sigma2) from the prior, simulates an
exact Gaussian path, and scores it with three distances: a long-memory
distance (full periodogram, first 20 ordinates, or pooled log-periodogram),
a distance between fitted ARMA coefficients, and a sample-variance
distance. Thresholds are quantiles of those distances over all M records.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .draws import PosteriorDraws
from .errors import WorkerError
from .likelihood import STUDY_PRIORS, Priors
from .mle import fit_mle, fit_whittle
from .model import parse_order
from .spectral import periodogram, periodogram_ordinates, pooled_indices, whittle_frequencies

log = logging.getLogger(__name__)

VARIANT_LABELS = {1: "fp", 2: "20p", 3: "logp"}
ARMA_SUMMARIES = ("whittle", "exact", "filtered")
N_FIRST = 20
RECORD_DTYPE = np.dtype("<f8")
RECORD_WIDTH = 7  # d, phi, theta, sigma2, H_h, H_arma, H_sigma2
# internal chunk layout: params, H1, H2, H3, H_arma, H_sigma2
_H = {1: 4, 2: 5, 3: 6}
_ARMA, _S2 = 7, 8


@dataclass
class AbcConfig:
    """Settings for one ABC run.

    ``arma_summary`` selects how (phi, theta) summaries are estimated:
    ``"whittle"`` (compiled Whittle fit of the full ARFIMA order, default),
    ``"exact"`` (exact-likelihood MLE, far slower), or ``"filtered"``
    (Whittle ARMA fit with d held at the proposal value).
    """

    M: int = 100_000
    q: float = 0.01
    q_sigma2: float = 0.5
    variant: int = 2
    order: str = "1d1"
    priors: Priors = field(default_factory=lambda: STUDY_PRIORS)
    seed: Optional[int] = None
    workers: int = 1
    chunk_size: int = 500
    arma_summary: str = "whittle"
    fit_maxiter: int = 200
    J: int = 2
    ell: int = 0
    m: Optional[int] = None
    scratch_path: Optional[str] = None

    def __post_init__(self):
        self.order = parse_order(self.order)
        if self.M < 0:
            raise ValueError("M must be non-negative")
        if not 0.0 < self.q <= 1.0 or not 0.0 < self.q_sigma2 <= 1.0:
            raise ValueError("quantiles must lie in (0, 1]")
        if self.variant not in VARIANT_LABELS:
            raise ValueError("variant must be 1, 2 or 3")
        if self.arma_summary not in ARMA_SUMMARIES:
            raise ValueError(f"arma_summary must be one of {ARMA_SUMMARIES}")
        if self.workers < 1 or self.chunk_size < 1:
            raise ValueError("workers and chunk_size must be positive")
        if self.seed is None:
            self.seed = int(np.random.SeedSequence().entropy % 2**63)
            log.warning("no seed given; drew seed %d", self.seed)

    @property
    def provenance(self) -> str:
        return f"abc-{VARIANT_LABELS[self.variant]}"


@dataclass(frozen=True)
class SummaryStats:
    """Summaries of one series used by the ABC distances."""

    periodogram: np.ndarray
    pooled_logperiodogram: np.ndarray
    arma_mle: np.ndarray
    sample_variance: float


@dataclass(frozen=True)
class AbcRecord:
    proposal: np.ndarray
    distances: tuple[float, float, float]


@dataclass
class AbcRun:
    """All M records of a run plus the observed summaries."""

    records: np.ndarray  # (M, 9): params, H1, H2, H3, H_arma, H_sigma2
    observed: SummaryStats
    config: AbcConfig

    def variant_records(self, variant: Optional[int] = None) -> np.ndarray:
        """(M, 7) records for one distance variant, in the scratch-file layout."""
        v = self.config.variant if variant is None else variant
        return self.records[:, [0, 1, 2, 3, _H[v], _ARMA, _S2]]


def _arma_mask(order):
    return np.array([order[0] == "1", order[2] == "1"])


def _pooled_from_ordinates(ordinates, n, J, ell, m):
    idx = pooled_indices(n, J, ell, m)
    sums = np.zeros(ordinates.shape[:-1] + (idx.size,))
    for j in range(J):
        sums += ordinates[..., idx - J + j]
    with np.errstate(divide="ignore"):
        return np.log(sums)


def _batch_starts(ordinates, y, n, free_d, free_phi):
    """GPH d and lag-1 moment phi for each row of a batch, theta = 0."""
    b = y.shape[0]
    starts = np.zeros((b, 3))
    mg = min(max(3, int(math.sqrt(n))), n // 2 - 1)
    lam = 2.0 * np.pi * np.arange(1, mg + 1) / n
    x = np.log(4.0 * np.sin(lam / 2.0) ** 2)
    xc = x - x.mean()
    with np.errstate(divide="ignore", invalid="ignore"):
        ly = np.log(np.maximum(ordinates[:, 1 : mg + 1], 1e-300))
        slope = (ly - ly.mean(axis=1, keepdims=True)) @ xc / (xc @ xc)
        rho = np.einsum("ij,ij->i", y[:, 1:], y[:, :-1]) / np.einsum("ij,ij->i", y, y)
    if free_d:
        starts[:, 0] = np.clip(np.nan_to_num(-slope), -0.45, 0.45)
    if free_phi:
        starts[:, 1] = np.clip(np.nan_to_num(rho), -0.9, 0.9)
    return starts


def _arma_estimates(ordinates, y, order, mode, fit_maxiter, fixed_d=None):
    """(phi_hat, theta_hat) for each row, via the compiled Whittle fitter."""
    n = y.shape[1]
    idx, l4, cosl = whittle_frequencies(n)
    filtered = mode == "filtered"
    starts = _batch_starts(ordinates, y, n, not filtered, order[0] == "1")
    if filtered:
        starts[:, 0] = fixed_d
    free = np.array([not filtered, order[0] == "1", order[2] == "1"])
    est = _kernels.whittle_fit_batch(starts, free, np.ascontiguousarray(ordinates[:, idx]), l4, cosl,
                                     fit_maxiter, 1e-8)
    return est[:, 1:3]


def observed_summaries(series, config: AbcConfig) -> SummaryStats:
    """Summaries of the observed series, computed once per run."""
    y = np.asarray(series, dtype=float)
    y = y - y.mean()
    n = y.size
    ordinates = periodogram(y).ordinates
    pooled = _pooled_from_ordinates(ordinates, n, config.J, config.ell, config.m)
    order = config.order
    if order[0] == "0" and order[2] == "0":
        arma = np.zeros(2)
    elif config.arma_summary == "exact":
        p = fit_mle(y, order).params
        arma = np.array([p.ar, p.ma])
    elif config.arma_summary == "filtered":
        d_hat = fit_whittle(y, order)[0]
        arma = _arma_estimates(ordinates[None, :], y[None, :], order, "filtered",
                               config.fit_maxiter, fixed_d=d_hat)[0]
    else:
        arma = _arma_estimates(ordinates[None, :], y[None, :], order, "whittle", config.fit_maxiter)[0]
    return SummaryStats(ordinates, pooled, arma, float(y.var(ddof=1)))


def abc_distances(obs: SummaryStats, sim: SummaryStats, variant: int = 2) -> tuple[float, float, float]:
    """``(H_h, H_arma, H_sigma2)`` between two summary sets."""
    if obs.periodogram.shape != sim.periodogram.shape or obs.pooled_logperiodogram.shape != sim.pooled_logperiodogram.shape:
        raise ValueError("summaries come from series of different lengths")
    if variant == 1:
        h = np.linalg.norm(obs.periodogram - sim.periodogram)
    elif variant == 2:
        h = np.linalg.norm(obs.periodogram[:N_FIRST] - sim.periodogram[:N_FIRST])
    elif variant == 3:
        h = np.linalg.norm(obs.pooled_logperiodogram - sim.pooled_logperiodogram)
    else:
        raise ValueError("variant must be 1, 2 or 3")
    h_arma = np.linalg.norm(np.asarray(obs.arma_mle) - np.asarray(sim.arma_mle))
    return float(h), float(h_arma), abs(obs.sample_variance - sim.sample_variance)


def _chunk_seed(seed: int, chunk: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(chunk,))


def simulate_chunk(chunk: int, count: int, n: int, obs: SummaryStats, config: AbcConfig) -> np.ndarray:
    """Prior draws, simulations and all distances for one chunk, as a (count, 9) array."""
    rng = np.random.default_rng(_chunk_seed(config.seed, chunk))
    order = config.order
    pr = config.priors
    params = np.zeros((count, 4))
    params[:, 0] = rng.uniform(*pr.d_bounds, size=count)
    if order[0] == "1":
        params[:, 1] = rng.uniform(*pr.phi_bounds, size=count)
    if order[2] == "1":
        params[:, 2] = rng.uniform(*pr.theta_bounds, size=count)
    params[:, 3] = pr.beta / rng.gamma(pr.alpha, 1.0, size=count)
    normals = rng.standard_normal((count, n))

    y = _kernels.simulate_batch(params, normals)
    y -= y.mean(axis=1, keepdims=True)
    ok = np.all(np.isfinite(y), axis=1)
    y[~ok] = 0.0
    ordinates = periodogram_ordinates(y)
    pooled = _pooled_from_ordinates(ordinates, n, config.J, config.ell, config.m)

    out = np.empty((count, 9))
    out[:, :4] = params
    out[:, 4] = np.sqrt(((ordinates - obs.periodogram) ** 2).sum(axis=1))
    out[:, 5] = np.sqrt(((ordinates[:, :N_FIRST] - obs.periodogram[:N_FIRST]) ** 2).sum(axis=1))
    with np.errstate(invalid="ignore"):
        out[:, 6] = np.sqrt(((pooled - obs.pooled_logperiodogram) ** 2).sum(axis=1))
    mask = _arma_mask(order)
    if mask.any():
        if config.arma_summary == "exact":
            est = np.zeros((count, 2))
            for i in np.flatnonzero(ok):
                p = fit_mle(y[i], order, maxiter=config.fit_maxiter).params
                est[i] = (p.ar, p.ma)
        else:
            est = _arma_estimates(ordinates, y, order, config.arma_summary, config.fit_maxiter,
                                  fixed_d=params[:, 0])
        out[:, 7] = np.sqrt((((est - obs.arma_mle) * mask) ** 2).sum(axis=1))
    else:
        out[:, 7] = 0.0
    out[:, 8] = np.abs(y.var(axis=1, ddof=1) - obs.sample_variance)
    out[~ok, 4:] = np.inf
    out[:, 4:] = np.where(np.isnan(out[:, 4:]), np.inf, out[:, 4:])
    return out


def _chunks(M, size):
    return [(c, min(size, M - c * size)) for c in range(math.ceil(M / size))] if M > 0 else []


def _run_chunk(args):
    chunk, count, n, obs, config = args
    return simulate_chunk(chunk, count, n, obs, config)


def iter_record_chunks(series, config: AbcConfig, obs: Optional[SummaryStats] = None) -> Iterator[np.ndarray]:
    """Yield (count, 9) record blocks in global simulation order.

    Chunks are seeded from ``(seed, chunk index)`` alone, so the merged
    stream is the same for any worker count.
    """
    y = np.asarray(series, dtype=float)
    obs = observed_summaries(y, config) if obs is None else obs
    jobs = [(c, k, y.size, obs, config) for c, k in _chunks(config.M, config.chunk_size)]
    if not jobs:
        return
    if config.workers == 1:
        for job in jobs:
            yield _run_chunk(job)
        return
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        try:
            yield from pool.map(_run_chunk, jobs)
        except Exception as exc:
            pool.shutdown(wait=False, cancel_futures=True)
            raise WorkerError(f"ABC worker failed: {exc}") from exc


def abc_parallel_driver(series, config: AbcConfig, obs: Optional[SummaryStats] = None) -> Iterator[AbcRecord]:
    """Stream :class:`AbcRecord` objects in canonical (simulation-index) order."""
    h = _H[config.variant]
    for block in iter_record_chunks(series, config, obs):
        for row in block:
            yield AbcRecord(row[:4].copy(), (float(row[h]), float(row[_ARMA]), float(row[_S2])))


def simulate_records(series, config: AbcConfig) -> AbcRun:
    """Run all M simulations; optionally stream records to ``config.scratch_path``.

    The scratch file holds fixed 56-byte little-endian records (4 parameters
    then the 3 distances of the configured variant). If a worker fails, the
    records written so far stay on disk and :class:`WorkerError` propagates.
    """
    y = np.asarray(series, dtype=float)
    obs = observed_summaries(y, config)
    blocks = []
    fh = open(config.scratch_path, "wb") if config.scratch_path else None
    try:
        h = _H[config.variant]
        for block in iter_record_chunks(y, config, obs):
            blocks.append(block)
            if fh is not None:
                fh.write(block[:, [0, 1, 2, 3, h, _ARMA, _S2]].astype(RECORD_DTYPE).tobytes())
    finally:
        if fh is not None:
            fh.close()
    records = np.vstack(blocks) if blocks else np.empty((0, 9))
    return AbcRun(records, obs, config)


def read_scratch(path) -> np.ndarray:
    """Load a scratch file as an (M, 7) array."""
    raw = np.fromfile(path, dtype=RECORD_DTYPE)
    if raw.size % RECORD_WIDTH:
        raise ValueError(f"{path}: truncated record file")
    return raw.reshape(-1, RECORD_WIDTH)


def nearest_rank_quantile(x, q: float) -> float:
    """Type-1 (nearest-rank) quantile; ``q >= 1`` means no threshold (inf)."""
    x = np.asarray(x, dtype=float)
    if q >= 1.0 or x.size == 0:
        return math.inf
    k = max(1, math.ceil(q * x.size))
    return float(np.partition(x, k - 1)[k - 1])


def accept(records7: np.ndarray, order: str, q: float, q_sigma2: float,
           provenance: str = "abc", index_offset: int = 1) -> PosteriorDraws:
    """Joint quantile-threshold acceptance over (M, 7) records.

    A record is kept when all its distances are strictly below their
    thresholds. For orders without ARMA terms the ARMA distance is ignored.
    """
    order = parse_order(order)
    h, h_arma, h_s2 = records7[:, 4], records7[:, 5], records7[:, 6]
    eps_h = nearest_rank_quantile(h, q)
    eps_s2 = nearest_rank_quantile(h_s2, q_sigma2)
    keep = (h < eps_h) & (h_s2 < eps_s2)
    if _arma_mask(order).any():
        eps_arma = nearest_rank_quantile(h_arma, q)
        keep &= h_arma < eps_arma
    else:
        eps_arma = math.inf
    idx = np.flatnonzero(keep)
    meta = {
        "M": int(records7.shape[0]),
        "accepted": int(idx.size),
        "q": q,
        "q_sigma2": q_sigma2,
        "eps_h": eps_h,
        "eps_arma": eps_arma,
        "eps_sigma2": eps_s2,
    }
    if idx.size == 0:
        meta["diagnostic"] = "no record fell below all thresholds"
        log.warning("ABC accepted no draws (M=%d, q=%g)", records7.shape[0], q)
    return PosteriorDraws(records7[idx, :4], order, provenance, idx + index_offset,
                          {"accepted_fraction": idx.size / max(1, records7.shape[0])}, meta)


def run_abc(series, config: AbcConfig) -> PosteriorDraws:
    """Simulate M prior draws and keep those within all three tolerances."""
    run = simulate_records(series, config)
    draws = accept(run.variant_records(), config.order, config.q, config.q_sigma2, config.provenance)
    draws.meta.update(seed=config.seed, variant=config.variant, arma_summary=config.arma_summary)
    return draws


def default_workers() -> int:
    """``ARFIMA_WORKERS`` if set, else 1."""
    try:
        return max(1, int(os.environ.get("ARFIMA_WORKERS", "1")))
    except ValueError:
        return 1
