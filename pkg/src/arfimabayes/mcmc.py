"""Metropolis-within-Gibbs samplers for ARFIMA(p<=1, d, q<=1) posteriors.

Two schemes share the same truncated-normal random-walk machinery:

* simultaneous: one block update of (d, phi, theta) against the
  sigma2-integrated posterior, then a conjugate draw of sigma2;
* filtered: d is updated against the ARFIMA(0,d,0) posterior of the
  ARMA-filtered series, (phi, theta) against the ARMA posterior of the
  fractionally differenced series, then sigma2 as above.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, special, stats

from . import _kernels
from .draws import COLUMNS, PosteriorDraws
from .errors import NumericalError
from .likelihood import STUDY_PRIORS, Priors, draw_inverse_gamma, integrated_from_parts, log_likelihood
from .mle import MleFit, fit_arma_mle, fit_mle, start_point
from .model import ArfimaParams, arma_filter, frac_diff, order_names, parse_order

log = logging.getLogger(__name__)

FALLBACK_SD = {"d": 0.02, "phi": 0.05, "theta": 0.05}
# beyond this many SDs from every face the box mass is 1 to double precision
_FAR = 8.0


@dataclass
class McmcConfig:
    """Chain length, thinning and proposal settings.

    ``proposal_cov`` replaces the MLE covariance of the (d, phi, theta)
    block (simultaneous) or the (phi, theta) block (filtered).
    ``prior_only`` swaps the likelihood for a constant, which is how the
    samplers are checked against their prior.
    """

    iterations: int = 10_000
    thin: int = 50
    burn_in: int = 0
    order: str = "1d1"
    algorithm: str = "simultaneous"
    sigma_d: float = 0.025
    priors: Priors = field(default_factory=lambda: STUDY_PRIORS)
    seed: Optional[int] = None
    proposal_cov: Optional[np.ndarray] = None
    proposal_scale: float = 1.0
    prior_only: bool = False
    mle_fit: Optional[MleFit] = None

    def __post_init__(self):
        self.order = parse_order(self.order)
        if self.algorithm not in ("simultaneous", "filtered"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.thin < 1 or self.iterations < self.thin:
            raise ValueError("need iterations >= thin >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if not self.sigma_d > 0 or not self.proposal_scale > 0:
            raise ValueError("proposal scales must be positive")


class TruncatedNormalProposal:
    """Random walk ``N(center, cov)`` restricted to the open box ``(lo, hi)``."""

    def __init__(self, cov, lo, hi):
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.chol = linalg.cholesky(self.cov, lower=True)
        self.sd = np.sqrt(np.diag(self.cov))
        off = self.cov - np.diag(np.diag(self.cov))
        self.diagonal = not np.any(off)

    def draw(self, center, rng, max_tries: int = 100_000) -> np.ndarray:
        k = self.lo.size
        for _ in range(max_tries):
            x = center + self.chol @ rng.standard_normal(k)
            if np.all(x > self.lo) and np.all(x < self.hi):
                return x
        raise NumericalError("truncated-normal proposal rejected every candidate")

    def log_mass(self, center) -> float:
        """``log P(N(center, cov) in box)``, the proposal's normalizing constant."""
        z_lo = (self.lo - center) / self.sd
        z_hi = (self.hi - center) / self.sd
        if np.all(z_lo < -_FAR) and np.all(z_hi > _FAR):
            return 0.0
        if self.diagonal:
            mass = special.ndtr(z_hi) - special.ndtr(z_lo)
            return float(np.log(mass).sum())
        mass = stats.multivariate_normal.cdf(self.hi, mean=center, cov=self.cov, lower_limit=self.lo)
        return math.log(max(mass, 1e-300))


def _box(names, priors):
    b = priors.bounds()
    return np.array([b[nm][0] for nm in names]), np.array([b[nm][1] for nm in names])


def _fallback_cov(names):
    return np.diag([FALLBACK_SD[nm] ** 2 for nm in names])


def _usable_cov(cov, k):
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (k, k) or not np.all(np.isfinite(cov)):
        return False
    try:
        linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        return False
    return True


def _resolve_proposal(cov_source, names, config, what):
    """Pick the proposal covariance: override, else MLE, else diagonal fallback."""
    k = len(names)
    if config.proposal_cov is not None:
        cov = np.atleast_2d(np.asarray(config.proposal_cov, dtype=float))
    elif cov_source is not None and _usable_cov(cov_source, k):
        cov = cov_source
    else:
        log.warning("%s covariance unavailable; falling back to a diagonal proposal", what)
        cov = _fallback_cov(names)
    if not _usable_cov(cov, k):
        raise ValueError(f"proposal covariance for {names} must be a positive-definite {k}x{k} matrix")
    return config.proposal_scale * cov


def _full_vector(names, x, base=(0.0, 0.0, 0.0)):
    full = list(base)
    for nm, v in zip(names, x):
        full[COLUMNS.index(nm)] = float(v)
    return full


class _Recorder:
    def __init__(self, config):
        self.config = config
        count = (config.iterations - config.burn_in) // config.thin
        self.samples = np.empty((count, 4))
        self.iterations = np.empty(count, dtype=np.int64)
        self.k = 0

    def offer(self, i, d, phi, theta, s2):
        c = self.config
        if i >= c.burn_in and (i - c.burn_in + 1) % c.thin == 0:
            self.samples[self.k] = (d, phi, theta, s2)
            self.iterations[self.k] = i + 1
            self.k += 1


def _sigma2_draw(q, n, priors, prior_only, rng):
    if prior_only:
        return draw_inverse_gamma(priors.alpha, priors.beta, rng)
    return draw_inverse_gamma(0.5 * n + priors.alpha, 0.5 * (q + 2.0 * priors.beta), rng)


def _mle_or_none(y, order, config):
    if config.mle_fit is not None:
        return config.mle_fit
    try:
        return fit_mle(y, order)
    except (NumericalError, ValueError, FloatingPointError) as exc:
        log.warning("ARFIMA MLE failed (%s)", exc)
        return None


def run_simultaneous_mcmc(series, config: McmcConfig) -> PosteriorDraws:
    """Block random-walk Metropolis on (d, phi, theta) with a Gibbs step for sigma2.

    The proposal is a truncated multivariate normal with the MLE covariance;
    the Metropolis-Hastings ratio carries the ratio of truncation masses at
    the two centers, since the truncated walk is not symmetric.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    priors = config.priors
    names = order_names(config.order)
    lo, hi = _box(names, priors)
    rng = np.random.default_rng(config.seed)

    fit = _mle_or_none(y, config.order, config)
    if fit is not None:
        center0 = np.array([getattr(fit.params, nm) for nm in names])
        cov_source = fit.arma_cov()
    else:
        s = start_point(y, config.order)
        center0 = np.array([s[nm] for nm in names])
        cov_source = None
    proposal = TruncatedNormalProposal(_resolve_proposal(cov_source, names, config, "MLE"), lo, hi)

    def target(x):
        if config.prior_only:
            return 0.0, math.nan
        d, phi, theta = _full_vector(names, x)
        q, ld = _kernels.levinson_quad_logdet(_kernels.arfima_acvf_unit(d, phi, theta, n), y)
        if not np.isfinite(q):
            return -math.inf, math.nan
        return integrated_from_parts(q, ld, n, priors), q

    for _ in range(100):
        x = proposal.draw(center0, rng)
        lp, q = target(x)
        if np.isfinite(lp):
            break
    else:
        raise NumericalError("could not find an initial point with finite posterior density")
    lz = proposal.log_mass(x)

    rec = _Recorder(config)
    accepted = 0
    for i in range(config.iterations):
        xp = proposal.draw(x, rng)
        lpp, qp = target(xp)
        u = rng.random()
        if np.isfinite(lpp):
            lzp = proposal.log_mass(xp)
            if math.log(u) < lpp - lp + lz - lzp:
                x, lp, q, lz = xp, lpp, qp, lzp
                accepted += 1
        s2 = _sigma2_draw(q, n, priors, config.prior_only, rng)
        rec.offer(i, *_full_vector(names, x), s2)

    rates = {"+".join(names): accepted / config.iterations}
    return PosteriorDraws(rec.samples, config.order, "mcmc-simultaneous", rec.iterations, rates,
                          meta={"proposal_cov": proposal.cov.tolist(), "seed": config.seed})


def run_filtered_mcmc(series, config: McmcConfig) -> PosteriorDraws:
    """Alternate a long-memory step on the ARMA-filtered series and an ARMA step
    on the fractionally differenced series, then draw sigma2 from its full
    conditional under the joint ARFIMA covariance."""
    y = np.asarray(series, dtype=float)
    n = y.size
    priors = config.priors
    order = config.order
    arma_names = tuple(nm for nm in order_names(order) if nm != "d")
    rng = np.random.default_rng(config.seed)
    (d_lo,), (d_hi,) = _box(("d",), priors)
    d_prop = TruncatedNormalProposal([[config.sigma_d**2]], [d_lo], [d_hi])

    fit = _mle_or_none(y, order, config)
    d_center = fit.params.d if fit is not None else start_point(y, order)["d"]
    d = float(d_prop.draw(np.array([d_center]), rng)[0])

    phi = theta = 0.0
    arma_prop = None
    if arma_names:
        lo, hi = _box(arma_names, priors)
        u0 = frac_diff(y, d)
        try:
            afit = fit_arma_mle(u0, order)
            a_center = np.array([getattr(afit.params, nm) for nm in arma_names])
            cov_source = afit.arma_cov()
        except (NumericalError, ValueError, FloatingPointError) as exc:
            log.warning("ARMA MLE of the differenced series failed (%s)", exc)
            s = start_point(u0, order, arma_only=True)
            a_center = np.array([s[nm] for nm in arma_names])
            cov_source = None
        arma_prop = TruncatedNormalProposal(_resolve_proposal(cov_source, arma_names, config, "ARMA MLE"), lo, hi)
        a = arma_prop.draw(a_center, rng)
        _, phi, theta = _full_vector(arma_names, a)

    cache_z: dict = {}
    cache_u: dict = {}

    def filtered_z(ph, th):
        key = (ph, th)
        if key not in cache_z:
            cache_z.clear()
            cache_z[key] = arma_filter(y, ph, th) if (ph or th) else y
        return cache_z[key]

    def differenced_u(dd):
        if dd not in cache_u:
            cache_u.clear()
            cache_u[dd] = frac_diff(y, dd)
        return cache_u[dd]

    def log_target_d(dd, z):
        if config.prior_only:
            return 0.0
        q, ld = _kernels.levinson_quad_logdet(_kernels.arfima0d0_acvf_unit(dd, n), z)
        return integrated_from_parts(q, ld, n, priors) if np.isfinite(q) else -math.inf

    def log_target_arma(ph, th, u):
        if config.prior_only:
            return 0.0
        q, ld = _kernels.arma11_quad_logdet(ph, th, u)
        return integrated_from_parts(q, ld, n, priors) if np.isfinite(q) else -math.inf

    cur_d = [None, 0.0]
    cur_a = [None, 0.0]

    def current_d(z):
        key = (d, phi, theta)
        if cur_d[0] != key:
            cur_d[:] = [key, log_target_d(d, z)]
        return cur_d[1]

    def current_arma(ud):
        key = (d, phi, theta)
        if cur_a[0] != key:
            cur_a[:] = [key, log_target_arma(phi, theta, ud)]
        return cur_a[1]

    rec = _Recorder(config)
    acc_d = acc_a = 0
    lz_d = d_prop.log_mass(np.array([d]))
    a_cur = np.array([{"phi": phi, "theta": theta}[nm] for nm in arma_names])
    lz_a = arma_prop.log_mass(a_cur) if arma_prop else 0.0
    for i in range(config.iterations):
        # long-memory block
        z = filtered_z(phi, theta)
        dp = float(d_prop.draw(np.array([d]), rng)[0])
        lp_new = log_target_d(dp, z)
        u = rng.random()
        if np.isfinite(lp_new):
            lz_new = d_prop.log_mass(np.array([dp]))
            if math.log(u) < lp_new - current_d(z) + lz_d - lz_new:
                d, lz_d = dp, lz_new
                cur_d[:] = [(d, phi, theta), lp_new]
                acc_d += 1

        # short-memory block
        if arma_prop is not None:
            ud = differenced_u(d)
            ap = arma_prop.draw(a_cur, rng)
            _, php, thp = _full_vector(arma_names, ap)
            lp_new = log_target_arma(php, thp, ud)
            u = rng.random()
            if np.isfinite(lp_new):
                lz_new = arma_prop.log_mass(ap)
                if math.log(u) < lp_new - current_arma(ud) + lz_a - lz_new:
                    a_cur, phi, theta, lz_a = ap, php, thp, lz_new
                    cur_a[:] = [(d, phi, theta), lp_new]
                    acc_a += 1

        # conjugate sigma2 step under the joint covariance
        if config.prior_only:
            q = math.nan
        else:
            q, _ = _kernels.levinson_quad_logdet(_kernels.arfima_acvf_unit(d, phi, theta, n), y)
            if not np.isfinite(q):
                raise NumericalError(f"joint covariance not positive definite at d={d}, phi={phi}, theta={theta}")
        s2 = _sigma2_draw(q, n, priors, config.prior_only, rng)
        rec.offer(i, d, phi, theta, s2)

    rates = {"d": acc_d / config.iterations}
    if arma_prop is not None:
        rates["+".join(arma_names)] = acc_a / config.iterations
    meta = {"seed": config.seed, "sigma_d": config.sigma_d}
    if arma_prop is not None:
        meta["arma_proposal_cov"] = arma_prop.cov.tolist()
    return PosteriorDraws(rec.samples, order, "mcmc-filtered", rec.iterations, rates, meta=meta)


def run_mcmc(series, config: McmcConfig) -> PosteriorDraws:
    if config.algorithm == "filtered":
        return run_filtered_mcmc(series, config)
    return run_simultaneous_mcmc(series, config)


def autocorrelation(x, max_lag: Optional[int] = None) -> np.ndarray:
    """Sample autocorrelations of a chain via the FFT (biased normalization)."""
    x = np.asarray(x, dtype=float)
    m = x.size
    xc = x - x.mean()
    size = 1 << (2 * m - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:m] / m
    if acov[0] <= 0:
        return np.ones(1 if max_lag is None else max_lag + 1)
    rho = acov / acov[0]
    return rho if max_lag is None else rho[: max_lag + 1]


def effective_sample_size(draws) -> float:
    """ESS with Geyer's initial positive sequence truncation.

    Consecutive autocorrelation pairs ``rho_{2k} + rho_{2k+1}`` are summed
    while positive. A constant chain has ESS 1.
    """
    x = np.asarray(draws, dtype=float)
    m = x.size
    if m < 2 or np.ptp(x) == 0.0:
        return 1.0
    rho = autocorrelation(x)
    tau = -1.0
    for k in range(0, m - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    return float(m / max(tau, 1e-12))


def _clamp_interior(v, priors):
    b = priors.bounds()
    out = v.copy()
    for i, nm in enumerate(("d", "phi", "theta")):
        lo, hi = b[nm]
        eps = 1e-6 * (hi - lo)
        if not lo < out[i] < hi:
            log.warning("posterior mean of %s=%g outside support; clamping", nm, out[i])
            out[i] = min(max(out[i], lo + eps), hi - eps)
    out[3] = max(out[3], 1e-12)
    return out


def dic(series, draws, order: Optional[str] = None, priors: Priors = STUDY_PRIORS) -> float:
    """Deviance information criterion ``D_bar + p_D`` with ``p_D = D_bar - D(psi_bar)``.

    ``draws`` is a :class:`PosteriorDraws` or an array whose first four
    columns are (d, phi, theta, sigma2); extra columns are ignored.
    """
    if isinstance(draws, PosteriorDraws):
        order = draws.order
        samples = draws.samples
    else:
        samples = np.atleast_2d(np.asarray(draws, dtype=float))[:, :4]
        order = parse_order(order or "1d1")
    if samples.shape[0] == 0:
        raise ValueError("DIC needs at least one draw")
    y = np.asarray(series, dtype=float)

    def deviance(v):
        return -2.0 * log_likelihood(y, ArfimaParams.from_order(order, *v))

    dbar = float(np.mean([deviance(row) for row in samples]))
    psi_bar = _clamp_interior(samples.mean(axis=0), priors)
    p_d = dbar - deviance(psi_bar)
    return dbar + p_d
