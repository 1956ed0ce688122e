"""Compiled inner loops: Durbin-Levinson recursions and the ARFIMA ACVF.

Everything here works on the *unit innovation variance* scale, i.e. on the
matrix Sigma_n with ``Cov(y) = sigma2 * Sigma_n``. Callers rescale.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def arfima0d0_acvf_unit(d, n_lags):
    """gamma_0(h) / sigma2 for h = 0..n_lags-1 by the gamma-ratio recursion."""
    g = np.empty(n_lags)
    g[0] = math.exp(math.lgamma(1.0 - 2.0 * d) - 2.0 * math.lgamma(1.0 - d))
    for h in range(1, n_lags):
        g[h] = g[h - 1] * (h - 1.0 + d) / (h - d)
    return g


@njit(cache=True)
def arfima_acvf_unit(d, phi, theta, n_lags, tol=1e-14, max_terms=20_000_000):
    """ARFIMA(1,d,1) autocovariances / sigma2 for lags 0..n_lags-1.

    The ARMA(1,1) part is folded in through its own autocovariance
    ``r(m) = sum_j psi_j psi_{j+|m|}``, which is geometric for |m| >= 1:

        gamma(h) = r0 g0(h) + r1 * sum_{m>=1} phi^(m-1) [g0(h+m) + g0(|h-m|)]

    Both tail sums obey first-order recursions in h, so the whole vector costs
    O(n_lags + K) where K is the number of geometric terms kept before
    |phi|^K drops under ``tol``.
    """
    one_m_phi2 = 1.0 - phi * phi
    r0 = (1.0 + 2.0 * phi * theta + theta * theta) / one_m_phi2
    r1 = (1.0 + phi * theta) * (phi + theta) / one_m_phi2

    g0 = arfima0d0_acvf_unit(d, n_lags + 1)
    out = np.empty(n_lags)
    if r1 == 0.0:
        for h in range(n_lags):
            out[h] = r0 * g0[h]
        return out

    aphi = abs(phi)
    if aphi == 0.0:
        n_terms = 1
    else:
        n_terms = int(math.ceil(math.log(tol) / math.log(aphi))) + 1
        if n_terms < 1:
            n_terms = 1
        if n_terms > max_terms:
            n_terms = max_terms

    # upper tail S+(h) = sum_{m>=1} phi^(m-1) g0(h+m), seeded at h = n_lags-1
    last = n_lags - 1
    g = g0[n_lags]
    lag = float(n_lags)
    s_plus_last = g
    w = 1.0
    for m in range(2, n_terms + 1):
        g = g * (lag + d) / (lag + 1.0 - d)
        lag += 1.0
        w *= phi
        s_plus_last += w * g

    s_plus = np.empty(n_lags)
    s_plus[last] = s_plus_last
    for h in range(last - 1, -1, -1):
        s_plus[h] = g0[h + 1] + phi * s_plus[h + 1]

    # lower part S-(h) = sum_{m>=1} phi^(m-1) g0(|h-m|), with S-(0) = S+(0)
    s_minus = s_plus[0]
    out[0] = r0 * g0[0] + r1 * 2.0 * s_plus[0]
    for h in range(1, n_lags):
        s_minus = g0[h - 1] + phi * s_minus
        out[h] = r0 * g0[h] + r1 * (s_plus[h] + s_minus)
    return out


@njit(cache=True)
def arma11_acvf_unit(phi, theta, n_lags):
    g = np.empty(n_lags)
    one_m_phi2 = 1.0 - phi * phi
    g[0] = (1.0 + 2.0 * phi * theta + theta * theta) / one_m_phi2
    if n_lags > 1:
        g[1] = (1.0 + phi * theta) * (phi + theta) / one_m_phi2
    for h in range(2, n_lags):
        g[h] = phi * g[h - 1]
    return g


@njit(cache=True, fastmath={"reassoc", "contract"})
def levinson_quad_logdet(gamma, y):
    """Return (y' S^-1 y, log|S|) for S = toeplitz(gamma[:n]).

    Returns (nan, nan) when S is not numerically positive definite.
    """
    n = y.shape[0]
    coef = np.zeros(n)
    v = gamma[0]
    if not v > 0.0:
        return np.nan, np.nan
    quad = y[0] * y[0] / v
    logdet = math.log(v)
    for t in range(1, n):
        acc = gamma[t]
        for j in range(t - 1):
            acc -= coef[j] * gamma[t - 1 - j]
        k = acc / v
        # in-place symmetric update of the order-(t-1) coefficients
        lo = 0
        hi = t - 2
        while lo < hi:
            a = coef[lo]
            b = coef[hi]
            coef[lo] = a - k * b
            coef[hi] = b - k * a
            lo += 1
            hi -= 1
        if lo == hi:
            coef[lo] = coef[lo] * (1.0 - k)
        coef[t - 1] = k
        v = v * (1.0 - k * k)
        if not v > 0.0:
            return np.nan, np.nan
        pred = 0.0
        for j in range(t):
            pred += coef[j] * y[t - 1 - j]
        e = y[t] - pred
        quad += e * e / v
        logdet += math.log(v)
    return quad, logdet


@njit(cache=True, fastmath={"reassoc", "contract"})
def levinson_extend(gamma, y_prefix, normals, scale):
    """Sequentially draw the continuation of a zero-mean Gaussian series.

    ``gamma`` must hold at least ``len(y_prefix) + len(normals)`` lags. The
    first ``len(y_prefix)`` values are taken as observed; each further value
    is its one-step predictor plus ``scale * sqrt(v_t) * normals[i]``. With an
    empty prefix this is exactly ``L @ normals`` for the lower Cholesky factor
    L of ``scale**2 * toeplitz(gamma)``.

    Returns the full series (prefix + draws), or an all-nan array if the
    recursion breaks down.
    """
    n_obs = y_prefix.shape[0]
    n = n_obs + normals.shape[0]
    y = np.empty(n)
    for t in range(n_obs):
        y[t] = y_prefix[t]
    coef = np.zeros(n)
    v = gamma[0]
    if not v > 0.0:
        y[:] = np.nan
        return y
    if n_obs == 0:
        y[0] = scale * math.sqrt(v) * normals[0]
    for t in range(1, n):
        acc = gamma[t]
        for j in range(t - 1):
            acc -= coef[j] * gamma[t - 1 - j]
        k = acc / v
        lo = 0
        hi = t - 2
        while lo < hi:
            a = coef[lo]
            b = coef[hi]
            coef[lo] = a - k * b
            coef[hi] = b - k * a
            lo += 1
            hi -= 1
        if lo == hi:
            coef[lo] = coef[lo] * (1.0 - k)
        coef[t - 1] = k
        v = v * (1.0 - k * k)
        if not v > 0.0:
            y[:] = np.nan
            return y
        if t >= n_obs:
            pred = 0.0
            for j in range(t):
                pred += coef[j] * y[t - 1 - j]
            y[t] = pred + scale * math.sqrt(v) * normals[t - n_obs]
    return y


# --- Whittle approximation, used for the per-simulation ABC summaries ---

_LO = np.array([-0.5, -1.0, -1.0])
_HI = np.array([0.5, 1.0, 1.0])


@njit(cache=True)
def _whittle_unpack(u, free, fixed):
    x = fixed.copy()
    k = 0
    for i in range(3):
        if free[i]:
            x[i] = _LO[i] + (_HI[i] - _LO[i]) / (1.0 + math.exp(-u[k]))
            k += 1
    return x


@njit(cache=True)
def whittle_objective(x, ordinates, log4s2, cosl):
    """Profiled Whittle contrast ``m log(mean I/g) + sum log g`` at (d, phi, theta)."""
    d = x[0]
    phi = x[1]
    th = x[2]
    m = ordinates.shape[0]
    s_ratio = 0.0
    s_logg = 0.0
    for j in range(m):
        c = cosl[j]
        num = 1.0 + 2.0 * th * c + th * th
        den = 1.0 - 2.0 * phi * c + phi * phi
        if num <= 0.0 or den <= 0.0:
            return np.inf
        logg = -d * log4s2[j] + math.log(num) - math.log(den)
        s_logg += logg
        s_ratio += ordinates[j] * math.exp(-logg)
    if not s_ratio > 0.0:
        return np.inf
    return m * math.log(s_ratio / m) + s_logg


@njit(cache=True)
def whittle_fit(x0, free, ordinates, log4s2, cosl, maxiter, ftol):
    """Nelder-Mead minimization of the Whittle contrast over the free coordinates.

    ``x0`` holds (d, phi, theta); entries with ``free[i] == False`` stay fixed.
    The search runs on logit-scaled coordinates. Returns ``(x, iterations)``.
    """
    k = 0
    for i in range(3):
        if free[i]:
            k += 1
    fixed = x0.copy()
    if k == 0:
        return fixed, 0
    u0 = np.empty(k)
    j = 0
    for i in range(3):
        if free[i]:
            p = (x0[i] - _LO[i]) / (_HI[i] - _LO[i])
            p = min(max(p, 1e-6), 1.0 - 1e-6)
            u0[j] = math.log(p / (1.0 - p))
            j += 1

    sim = np.empty((k + 1, k))
    fs = np.empty(k + 1)
    for r in range(k + 1):
        for c in range(k):
            sim[r, c] = u0[c]
        if r > 0:
            sim[r, r - 1] += 0.5
        fs[r] = whittle_objective(_whittle_unpack(sim[r], free, fixed), ordinates, log4s2, cosl)

    xbar = np.empty(k)
    xr = np.empty(k)
    xe = np.empty(k)
    xc = np.empty(k)
    it = 0
    while it < maxiter:
        it += 1
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        spread = 0.0
        for r in range(1, k + 1):
            spread = max(spread, abs(fs[r] - fs[0]))
        if spread <= ftol:
            break
        for c in range(k):
            acc = 0.0
            for r in range(k):
                acc += sim[r, c]
            xbar[c] = acc / k
        for c in range(k):
            xr[c] = 2.0 * xbar[c] - sim[k, c]
        fr = whittle_objective(_whittle_unpack(xr, free, fixed), ordinates, log4s2, cosl)
        if fr < fs[0]:
            for c in range(k):
                xe[c] = 3.0 * xbar[c] - 2.0 * sim[k, c]
            fe = whittle_objective(_whittle_unpack(xe, free, fixed), ordinates, log4s2, cosl)
            if fe < fr:
                sim[k] = xe
                fs[k] = fe
            else:
                sim[k] = xr
                fs[k] = fr
        elif fr < fs[k - 1]:
            sim[k] = xr
            fs[k] = fr
        else:
            if fr < fs[k]:
                for c in range(k):
                    xc[c] = xbar[c] + 0.5 * (xr[c] - xbar[c])
                fc = whittle_objective(_whittle_unpack(xc, free, fixed), ordinates, log4s2, cosl)
                ok = fc <= fr
            else:
                for c in range(k):
                    xc[c] = xbar[c] + 0.5 * (sim[k, c] - xbar[c])
                fc = whittle_objective(_whittle_unpack(xc, free, fixed), ordinates, log4s2, cosl)
                ok = fc < fs[k]
            if ok:
                sim[k] = xc
                fs[k] = fc
            else:
                for r in range(1, k + 1):
                    for c in range(k):
                        sim[r, c] = sim[0, c] + 0.5 * (sim[r, c] - sim[0, c])
                    fs[r] = whittle_objective(_whittle_unpack(sim[r], free, fixed), ordinates, log4s2, cosl)
    best = np.argmin(fs)
    return _whittle_unpack(sim[best], free, fixed), it


@njit(cache=True)
def whittle_fit_batch(starts, free, ordinates, log4s2, cosl, maxiter, ftol):
    """Row-wise ``whittle_fit``; rows with non-finite ordinates come back as nan."""
    b = starts.shape[0]
    out = np.empty((b, 3))
    for i in range(b):
        bad = False
        for j in range(ordinates.shape[1]):
            if not np.isfinite(ordinates[i, j]):
                bad = True
                break
        if bad:
            out[i, :] = np.nan
            continue
        x, _ = whittle_fit(starts[i], free, ordinates[i], log4s2, cosl, maxiter, ftol)
        out[i] = x
    return out


@njit(cache=True)
def simulate_batch(params, normals):
    """One exact Gaussian ARFIMA path per row of ``params`` = (d, phi, theta, sigma2)."""
    b, n = normals.shape
    out = np.empty((b, n))
    empty = np.empty(0)
    for i in range(b):
        gamma = arfima_acvf_unit(params[i, 0], params[i, 1], params[i, 2], n)
        out[i] = levinson_extend(gamma, empty, normals[i], math.sqrt(params[i, 3]))
    return out


@njit(cache=True)
def arma11_quad_logdet(phi, theta, y):
    """Exact ``(y' S^-1 y, log|S|)`` for a unit-variance ARMA(1,1) in O(n).

    Innovations algorithm on the transformed process: with
    ``r_0 = gamma(0)`` and ``r_t = 1 + theta^2 - theta^2 / r_{t-1}``, the
    one-step predictor is ``phi y_t + (theta / r_{t-1}) (y_t - yhat_t)``.
    """
    n = y.shape[0]
    r = (1.0 + 2.0 * phi * theta + theta * theta) / (1.0 - phi * phi)
    if not r > 0.0:
        return np.nan, np.nan
    e = y[0]
    quad = e * e / r
    logdet = math.log(r)
    r_prev = r
    e_prev = e
    th2 = theta * theta
    for t in range(1, n):
        r = 1.0 + th2 - th2 / r_prev
        pred = phi * y[t - 1] + theta / r_prev * e_prev
        e = y[t] - pred
        quad += e * e / r
        logdet += math.log(r)
        r_prev = r
        e_prev = e
    return quad, logdet
