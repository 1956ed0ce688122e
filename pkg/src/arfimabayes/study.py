"""Replicated simulation study: simulate, fit with every estimator, aggregate.

Each (cell, rep) job simulates ``n + b`` points, fits on the first ``n``
and keeps the last ``b`` as forecast targets. Jobs are seeded from
``(seed, cell index, rep index)`` so any cell can be re-run on its own, and
aggregation folds the jobs in (cell, rep) order, so the output does not
depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .abc import AbcConfig, accept, simulate_records
from .draws import PosteriorDraws, fmt17
from .errors import InputError, NumericalError
from .forecast import plug_in_interval, posterior_predictive_paths
from .likelihood import Priors
from .mcmc import McmcConfig, effective_sample_size, run_mcmc
from .mle import fit_mle
from .model import ArfimaParams, order_names, parse_order, simulate_arfima

log = logging.getLogger(__name__)

ESTIMATORS = ("mle", "mcmc", "mcmc-filter", "abc-fp", "abc-20p", "abc-logp", "truth")
_ABC_VARIANT = {"abc-fp": 1, "abc-20p": 2, "abc-logp": 3}
LABELS = {
    "mle": "Frequentist",
    "mcmc": "MCMC",
    "mcmc-filter": "MCMC Filter",
    "abc-fp": "ABC FP",
    "abc-20p": "ABC 20P",
    "abc-logp": "ABC LogP",
    "truth": "True parameters",
}


@dataclass(frozen=True)
class Cell:
    """One parameter combination of the study grid."""

    order: str
    d: float
    phi: float = 0.0
    theta: float = 0.0
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "order", parse_order(self.order))
        self.params  # validates

    @property
    def params(self) -> ArfimaParams:
        return ArfimaParams.from_order(self.order, self.d, self.phi, self.theta, self.sigma2)

    @property
    def label(self) -> str:
        p, q = self.order[0], self.order[2]
        parts = [f"d={self.d:g}"]
        if p == "1":
            parts.append(f"phi={self.phi:g}")
        if q == "1":
            parts.append(f"theta={self.theta:g}")
        return f"ARFIMA({p},d,{q}) " + " ".join(parts)


def table1_grid(orders=("1d1", "1d0", "0d1")) -> list[Cell]:
    """The 30 cells of the published design: d in {.05,.1,.2,.3,.4} x ARMA in {.2,.5}."""
    cells = []
    for order in orders:
        for d in (0.05, 0.1, 0.2, 0.3, 0.4):
            for a in (0.2, 0.5):
                cells.append(Cell(order, d, a if order[0] == "1" else 0.0, a if order[2] == "1" else 0.0))
    return cells


def _default_mcmc():
    return {"iterations": 10_000, "thin": 10, "burn_in": 0, "sigma_d": 0.025}


def _default_abc():
    return {"M": 100_000, "q": [0.01], "q_sigma2": 0.5, "arma_summary": "whittle", "chunk_size": 500}


@dataclass
class StudyConfig:
    """Grid, replication and per-estimator settings.

    Desk-scale defaults; the published scale is 200 reps, 50 000 MCMC
    iterations thinned by 50 and 1.5e7 ABC simulations.
    """

    cells: list = field(default_factory=lambda: [Cell("0d1", 0.2, theta=0.2)])
    reps: int = 20
    n: int = 1000
    b: int = 15
    estimators: tuple = ("mcmc",)
    mcmc: dict = field(default_factory=_default_mcmc)
    abc: dict = field(default_factory=_default_abc)
    alpha: float = 28.0
    beta: float = 30.0
    seed: int = 0
    workers: int = 1
    level: float = 0.90
    truth_draws: int = 1000

    def __post_init__(self):
        self.cells = [c if isinstance(c, Cell) else Cell(**c) for c in self.cells]
        if not self.cells:
            raise InputError("study needs at least one cell")
        if self.reps < 1 or self.n < 2 or self.b < 0:
            raise InputError("need reps >= 1, n >= 2 and b >= 0")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise InputError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        self.estimators = tuple(self.estimators)
        self.mcmc = {**_default_mcmc(), **self.mcmc}
        self.abc = {**_default_abc(), **self.abc}
        q = self.abc["q"]
        self.abc["q"] = [float(v) for v in (q if isinstance(q, (list, tuple)) else [q])]

    @property
    def priors(self) -> Priors:
        return Priors(alpha=self.alpha, beta=self.beta)

    @classmethod
    def from_dict(cls, raw: dict) -> "StudyConfig":
        raw = dict(raw)
        if "grid" in raw:
            grid = raw.pop("grid")
            raw["cells"] = [c.__dict__ for c in table1_grid()] if grid == "table1" else grid
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown study config keys {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path) -> "StudyConfig":
        return cls.from_dict(load_config_file(path))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["cells"] = [asdict(c) for c in self.cells]
        out["estimators"] = list(self.estimators)
        return out


def load_config_file(path) -> dict:
    """Read a TOML or JSON configuration file into a dict."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except FileNotFoundError as exc:
        raise InputError(f"no such config file: {path}") from exc
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            return tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"{path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from exc


@dataclass
class RepResult:
    """What one estimator produced on one replicate series."""

    cell: int
    rep: int
    estimator: str
    summary: dict  # name -> {mean, sd, lb, ub}
    ess: dict = field(default_factory=dict)
    accepted: Optional[int] = None
    forecast_err: Optional[np.ndarray] = None
    forecast_sd: Optional[np.ndarray] = None
    forecast_cov: Optional[np.ndarray] = None


@dataclass
class MetricsRow:
    cell: str
    estimator: str
    parameter: str
    truth: float
    mean: float
    lb: float
    ub: float
    coverage: float
    sd: float
    rmse: float
    ess_or_m: float
    reps: int
    flagged: bool = False


@dataclass
class ForecastRow:
    cell: str
    estimator: str
    rmse: float
    sd: float
    coverage: float
    reps: int
    flagged: bool = False


def _rep_seed(seed, cell, rep, *extra) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(cell, rep) + tuple(extra))


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0] % 2**63)


def _forecast_from_draws(y, future, draws, b, rng, level):
    f = posterior_predictive_paths(y, draws, b, rng, level)
    return f.mean - future, f.sd, f.covered(future)


def _mle_result(c, r, y, future, cell, b, level, with_forecast, fit):
    z = stats.norm.ppf(0.5 + level / 2.0)
    se = fit.se()
    summary = {}
    for nm in order_names(cell.order) + ("sigma2",):
        m = getattr(fit.params, nm)
        summary[nm] = {"mean": m, "sd": se[nm], "lb": m - z * se[nm], "ub": m + z * se[nm]}
    res = RepResult(c, r, "mle", summary)
    if with_forecast and b > 0:
        mean, sd, lo, hi = plug_in_interval(y, fit.params, b, level)
        res.forecast_err, res.forecast_sd = mean - future, sd
        res.forecast_cov = (future >= lo) & (future <= hi)
    return res


def _draws_result(c, r, name, draws: PosteriorDraws, y, future, b, rng, level, with_forecast):
    res = RepResult(c, r, name, draws.summary(level))
    if draws.provenance.startswith("mcmc"):
        res.ess = {nm: effective_sample_size(draws.column(nm)) for nm in draws.names}
    elif draws.provenance.startswith("abc"):
        res.accepted = len(draws)
    if with_forecast and b > 0 and len(draws) > 0:
        res.forecast_err, res.forecast_sd, res.forecast_cov = _forecast_from_draws(y, future, draws, b, rng, level)
    return res


def run_rep(config: StudyConfig, c: int, r: int, with_forecast: bool = False) -> list[RepResult]:
    """All estimators on replicate ``r`` of cell ``c``; failures are logged and skipped."""
    cell = config.cells[c]
    full = simulate_arfima(cell.params, config.n + config.b, seed=_rep_seed(config.seed, c, r))
    y_raw = full[: config.n]
    mu = y_raw.mean()
    y, future = y_raw - mu, full[config.n :] - mu
    out = []
    fit = None
    abc_run = None
    for e_idx, name in enumerate(config.estimators):
        rng = np.random.default_rng(_rep_seed(config.seed, c, r, e_idx, 1))
        try:
            if name in ("mle", "mcmc", "mcmc-filter") and fit is None:
                fit = fit_mle(y, cell.order)
            if name == "mle":
                out.append(_mle_result(c, r, y, future, cell, config.b, config.level, with_forecast, fit))
            elif name in ("mcmc", "mcmc-filter"):
                mc = McmcConfig(order=cell.order, algorithm="filtered" if name == "mcmc-filter" else "simultaneous",
                                priors=config.priors, seed=_int_seed(_rep_seed(config.seed, c, r, e_idx)),
                                mle_fit=fit, **config.mcmc)
                out.append(_draws_result(c, r, name, run_mcmc(y, mc), y, future, config.b, rng,
                                         config.level, with_forecast))
            elif name in _ABC_VARIANT:
                if abc_run is None:
                    ac = {k: v for k, v in config.abc.items() if k != "q"}
                    abc_cfg = AbcConfig(order=cell.order, priors=config.priors, variant=_ABC_VARIANT[name],
                                        q=config.abc["q"][0], workers=1,
                                        seed=_int_seed(_rep_seed(config.seed, c, r, len(ESTIMATORS))), **ac)
                    abc_run = simulate_records(y, abc_cfg)
                for q in config.abc["q"]:
                    draws = accept(abc_run.variant_records(_ABC_VARIANT[name]), cell.order, q,
                                   config.abc["q_sigma2"], name)
                    label = name if len(config.abc["q"]) == 1 else f"{name}-q{q:g}"
                    if len(draws) == 0:
                        log.warning("cell %d rep %d estimator %s accepted no draws", c, r, label)
                        continue
                    out.append(_draws_result(c, r, label, draws, y, future, config.b, rng,
                                             config.level, with_forecast))
            elif name == "truth":
                draws = PosteriorDraws.point_mass(cell.params, config.truth_draws)
                out.append(_draws_result(c, r, name, draws, y, future, config.b, rng, config.level, with_forecast))
        except (NumericalError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.warning("cell %d rep %d estimator %s failed: %s", c, r, name, exc)
    return out


def _job(args):
    config, c, r, with_forecast = args
    return run_rep(config, c, r, with_forecast)


def run_reps(config: StudyConfig, with_forecast: bool = False) -> list[RepResult]:
    jobs = [(config, c, r, with_forecast) for c in range(len(config.cells)) for r in range(config.reps)]
    results: list[RepResult] = []
    if config.workers <= 1:
        for job in jobs:
            results.extend(_job(job))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for block in pool.map(_job, jobs):
                results.extend(block)
    return results


def _estimator_labels(results):
    seen = []
    for res in results:
        if res.estimator not in seen:
            seen.append(res.estimator)
    return seen


def aggregate(config: StudyConfig, results: list[RepResult]) -> list[MetricsRow]:
    rows = []
    for c, cell in enumerate(config.cells):
        truth = cell.params
        for est in _estimator_labels(results):
            reps = [res for res in results if res.cell == c and res.estimator == est]
            flagged = len(reps) < 0.9 * config.reps
            if flagged:
                log.warning("%s / %s: %d of %d reps failed", cell.label, est, config.reps - len(reps), config.reps)
            if not reps:
                continue
            for nm in order_names(cell.order) + ("sigma2",):
                got = [res for res in reps if nm in res.summary]
                if not got:
                    continue
                t = getattr(truth, nm)
                means = np.array([res.summary[nm]["mean"] for res in got])
                lbs = np.array([res.summary[nm]["lb"] for res in got])
                ubs = np.array([res.summary[nm]["ub"] for res in got])
                sds = np.array([res.summary[nm]["sd"] for res in got])
                if got[0].ess:
                    extra = float(np.mean([res.ess[nm] for res in got]))
                elif got[0].accepted is not None:
                    extra = float(np.mean([res.accepted for res in reps]))
                else:
                    extra = math.nan
                rows.append(MetricsRow(
                    cell.label, est, nm, t, float(means.mean()), float(lbs.mean()), float(ubs.mean()),
                    float(np.mean((lbs <= t) & (t <= ubs))), float(sds.mean()),
                    float(np.sqrt(np.mean((means - t) ** 2))), extra, len(got), flagged,
                ))
    return rows


def aggregate_forecasts(config: StudyConfig, results: list[RepResult]) -> list[ForecastRow]:
    rows = []
    for c, cell in enumerate(config.cells):
        for est in _estimator_labels(results):
            reps = [res for res in results if res.cell == c and res.estimator == est
                    and res.forecast_err is not None]
            if not reps:
                continue
            err = np.concatenate([res.forecast_err for res in reps])
            sd = np.concatenate([res.forecast_sd for res in reps])
            cov = np.concatenate([res.forecast_cov for res in reps])
            rows.append(ForecastRow(cell.label, est, float(np.sqrt(np.mean(err**2))), float(sd.mean()),
                                    float(cov.mean()), len(reps), len(reps) < 0.9 * config.reps))
    return rows


@dataclass
class StudyResult:
    config: StudyConfig
    reps: list
    metrics: list
    forecasts: list = field(default_factory=list)

    def by(self, estimator: str, parameter: str, cell: int = 0) -> MetricsRow:
        label = self.config.cells[cell].label
        for row in self.metrics:
            if row.cell == label and row.estimator == estimator and row.parameter == parameter:
                return row
        raise KeyError((estimator, parameter, cell))

    def rep_values(self, estimator: str, parameter: str, key: str = "mean", cell: int = 0) -> np.ndarray:
        """Per-rep summary values (``mean``/``sd``/``lb``/``ub``) in rep order."""
        return np.array([res.summary[parameter][key] for res in self.reps
                         if res.cell == cell and res.estimator == estimator])


def run_study(config: StudyConfig) -> StudyResult:
    """Parameter-recovery metrics for every cell and estimator."""
    results = run_reps(config, with_forecast=False)
    return StudyResult(config, results, aggregate(config, results))


def forecast_study(config: StudyConfig) -> StudyResult:
    """Forecast RMSE, predictive SD and interval coverage, pooled over steps and reps."""
    if config.b < 1:
        raise InputError("forecast study needs b >= 1")
    results = run_reps(config, with_forecast=True)
    return StudyResult(config, results, aggregate(config, results), aggregate_forecasts(config, results))


METRIC_FIELDS = ("cell", "estimator", "parameter", "truth", "mean", "lb", "ub", "coverage", "sd", "rmse",
                 "ess_or_m", "reps", "flagged")
FORECAST_FIELDS = ("cell", "estimator", "rmse", "sd", "coverage", "reps", "flagged")


def _csv_text(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        vals = []
        for f in fields:
            v = getattr(row, f)
            vals.append(fmt17(v) if isinstance(v, float) else str(v))
        w.writerow(vals)
    return buf.getvalue()


def metrics_csv(rows: list[MetricsRow]) -> str:
    return _csv_text(rows, METRIC_FIELDS)


def forecasts_csv(rows: list[ForecastRow]) -> str:
    return _csv_text(rows, FORECAST_FIELDS)


def metrics_markdown(rows: list[MetricsRow]) -> str:
    """Markdown tables grouped by cell, one line per parameter and estimator."""
    out = []
    for cell in dict.fromkeys(r.cell for r in rows):
        out.append(f"### {cell}\n")
        out.append("| Par | Model | Mean | LB | UB | Coverage | SD | RMSE | ESS/m |")
        out.append("|---|---|---:|---:|---:|---:|---:|---:|---:|")
        for r in (r for r in rows if r.cell == cell):
            mark = " (flagged)" if r.flagged else ""
            extra = "" if math.isnan(r.ess_or_m) else f"{r.ess_or_m:.0f}"
            out.append(f"| {r.parameter} | {LABELS.get(r.estimator, r.estimator)}{mark} | {r.mean:.5f} | "
                       f"{r.lb:.5f} | {r.ub:.5f} | {100 * r.coverage:.0f}% | {r.sd:.5f} | {r.rmse:.5f} | {extra} |")
        out.append("")
    return "\n".join(out)


def forecasts_markdown(rows: list[ForecastRow]) -> str:
    out = []
    for cell in dict.fromkeys(r.cell for r in rows):
        out.append(f"### {cell}\n")
        out.append("| Method | RMSE | SD | Coverage |")
        out.append("|---|---:|---:|---:|")
        for r in (r for r in rows if r.cell == cell):
            out.append(f"| {LABELS.get(r.estimator, r.estimator)} | {r.rmse:.5f} | {r.sd:.5f} | {r.coverage:.5f} |")
        out.append("")
    return "\n".join(out)


def best_counts(rows: list[MetricsRow], metric: str = "rmse") -> dict[str, int]:
    """How often each estimator attains the smallest ``metric`` across (cell, parameter)."""
    wins: dict[str, int] = {}
    groups: dict = {}
    for r in rows:
        if r.estimator != "truth":
            groups.setdefault((r.cell, r.parameter), []).append(r)
    for group in groups.values():
        best = min(group, key=lambda r: getattr(r, metric))
        wins[best.estimator] = wins.get(best.estimator, 0) + 1
    return wins
