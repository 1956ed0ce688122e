"""Command-line entry point: ``arfima-bayes <subcommand> [options]``.

Exit codes: 0 success, 1 input error, 2 numerical or worker failure,
3 ABC run with no accepted draws.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .abc import AbcConfig, run_abc
from .draws import PosteriorDraws
from .errors import InputError, NumericalError, WorkerError
from .forecast import posterior_predictive_paths
from .io import envelope, gnp_transform, ingest_csv, read_column, write_json, write_series_csv, write_table_csv
from .likelihood import GNP_PRIORS, STUDY_PRIORS, Priors, log_posterior_grid, ridge_correlation
from .mcmc import McmcConfig, dic, effective_sample_size, run_mcmc
from .mle import fit_mle
from .model import ArfimaParams, Series, parse_order, simulate_arfima
from .study import (
    StudyConfig,
    forecast_study,
    forecasts_csv,
    forecasts_markdown,
    load_config_file,
    metrics_csv,
    metrics_markdown,
    run_study,
)

log = logging.getLogger("arfimabayes")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_EMPTY = 0, 1, 2, 3
STOCHASTIC = {"simulate", "fit-mcmc", "fit-abc", "forecast", "gnp"}
_VARIANTS = {"1": 1, "2": 2, "3": 3, "fp": 1, "20p": 2, "logp": 3}


def _grid_spec(text: str) -> np.ndarray:
    """``start:stop:num`` to an inclusive linspace."""
    try:
        start, stop, num = text.split(":")
        return np.linspace(float(start), float(stop), int(num))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:num, got {text!r}") from None


def _variant(text: str) -> int:
    try:
        return _VARIANTS[str(text).lower()]
    except KeyError:
        raise argparse.ArgumentTypeError("variant must be 1/2/3 or fp/20p/logp") from None


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file whose keys mirror the long flags")
    common.add_argument("-o", "--output", help="output path; .json gives a JSON envelope, else CSV (default stdout)")
    common.add_argument("--seed", type=int, help="RNG seed (required for stochastic subcommands)")
    common.add_argument("--workers", type=int, help="worker processes (default $ARFIMA_WORKERS or 1)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--order", default="1d1", help="0d0, 1d0, 0d1 or 1d1")
    model.add_argument("--alpha", type=float, help="inverse-gamma shape (default 28)")
    model.add_argument("--beta", type=float, help="inverse-gamma rate (default 30)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("-i", "--input", help="CSV file with the observed series")
    data.add_argument("--column", help="column name or 0-based index (default: last column)")

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--d", type=float, default=0.0)
    point.add_argument("--phi", type=float, default=0.0)
    point.add_argument("--theta", type=float, default=0.0)
    point.add_argument("--sigma2", type=float, default=1.0)

    mcmc = argparse.ArgumentParser(add_help=False)
    mcmc.add_argument("--algorithm", choices=("simultaneous", "filtered"), default="simultaneous")
    mcmc.add_argument("--iterations", type=int, default=50_000)
    mcmc.add_argument("--thin", type=int, default=50)
    mcmc.add_argument("--burn-in", type=int, default=0)
    mcmc.add_argument("--sigma-d", type=float, default=0.025)
    mcmc.add_argument("--proposal-scale", type=float, default=1.0)

    abc = argparse.ArgumentParser(add_help=False)
    abc.add_argument("--variant", type=_variant, default=2, help="1/fp, 2/20p or 3/logp")
    abc.add_argument("-M", "--simulations", type=int, default=100_000)
    abc.add_argument("--q", type=float, default=0.01)
    abc.add_argument("--q-sigma2", type=float, default=0.5)
    abc.add_argument("--arma-summary", choices=("whittle", "exact", "filtered"), default="whittle")
    abc.add_argument("--chunk-size", type=int, default=500)
    abc.add_argument("--scratch", help="binary record file (56-byte little-endian records)")

    parser = argparse.ArgumentParser(prog="arfima-bayes", description="Bayesian ARFIMA estimation by MCMC and ABC.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, parents, help_text):
        subs[name] = sub.add_parser(name, parents=[common] + parents, help=help_text)
        return subs[name]

    s = add("simulate", [model, point], "simulate a Gaussian ARFIMA series")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--method", choices=("levinson", "cholesky"), default="levinson")

    add("fit-mle", [model, data], "exact maximum likelihood")
    add("fit-mcmc", [model, data, mcmc], "MCMC posterior draws")
    add("fit-abc", [model, data, abc], "ABC rejection posterior draws")

    s = add("forecast", [model, data, point], "posterior-predictive forecast paths")
    s.add_argument("--draws", help="draws CSV; without it the --d/--phi/--theta/--sigma2 point is used")
    s.add_argument("--b", type=int, default=15, help="forecast horizon")
    s.add_argument("--point-draws", type=int, default=1000, help="paths to sample for a point-mass forecast")
    s.add_argument("--paths", action="store_true", help="include every sampled path in the CSV")

    s = add("grid", [model, data], "integrated log-posterior on a (d, phi) grid")
    s.add_argument("--d-grid", type=_grid_spec, default=_grid_spec("0:0.4:41"),
                   help="d values as start:stop:num (default 0:0.4:41)")
    s.add_argument("--phi-grid", type=_grid_spec, default=_grid_spec("0:0.9:46"),
                   help="phi values as start:stop:num (default 0:0.9:46)")
    s.add_argument("--theta", type=float, default=0.0, help="fixed MA coefficient")

    for name in ("study", "forecast-study"):
        s = add(name, [], "run the replicated simulation study" if name == "study" else "forecast study")
        s.add_argument("--reps", type=int)
        s.add_argument("--n", type=int)
        s.add_argument("--markdown", help="also write a Markdown table here")

    add("gnp-transform", [data], "GNP levels to demeaned percent log-returns")

    s = add("dic", [model, data], "deviance information criterion of a draws file")
    s.add_argument("--draws", help="draws CSV from fit-mcmc or fit-abc")

    s = add("gnp", [data, mcmc, abc], "fit the GNP log-return series")
    s.add_argument("--model", default="1d1", help="ARFIMA order")
    s.add_argument("--method", default="mcmc",
                   choices=("mcmc", "mcmc-filter", "abc-fp", "abc-20p", "abc-logp", "mle"))
    s.add_argument("--returns", action="store_true", help="input already holds log-returns")
    s.add_argument("--alpha", type=float, help="inverse-gamma shape (default 33)")
    s.add_argument("--beta", type=float, help="inverse-gamma rate (default 45)")
    return parser, subs


def _apply_config(args, argv, parser, subs):
    """Re-parse with config-file values as defaults, so explicit flags still win."""
    if args.command in ("study", "forecast-study") or not args.config:
        return args
    raw = load_config_file(args.config)
    sub = subs[args.command]
    dests = {a.dest for a in sub._actions}
    values = {}
    for key, val in raw.items():
        dest = key.replace("-", "_")
        if dest not in dests or dest == "config":
            raise InputError(f"config key {key!r} is not an option of {args.command}")
        values[dest] = val
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    try:
        return max(1, int(os.environ.get("ARFIMA_WORKERS", "1")))
    except ValueError:
        raise InputError("ARFIMA_WORKERS must be an integer") from None


def _priors(args, default: Priors) -> Priors:
    return Priors(alpha=args.alpha if args.alpha is not None else default.alpha,
                  beta=args.beta if args.beta is not None else default.beta)


def _series(args) -> Series:
    if not args.input:
        raise InputError("--input is required")
    col = args.column
    if isinstance(col, str) and col.isdigit():
        col = int(col)
    return ingest_csv(args.input, col)


def _is_json(path) -> bool:
    return path is not None and str(path).lower().endswith(".json")


def _emit_draws(args, draws: PosteriorDraws, config: dict):
    if _is_json(args.output):
        write_json(args.output, envelope("draws", draws.to_json_dict(), args.seed, config))
    else:
        draws.to_csv(args.output)
    for name, s in draws.summary().items():
        log.info("%s: mean %.5f sd %.5f 90%% [%.5f, %.5f]", name, s["mean"], s["sd"], s["lb"], s["ub"])


def _table(args, header, rows, kind, config):
    if _is_json(args.output):
        write_json(args.output, envelope(kind, [dict(zip(header, r)) for r in rows], args.seed, config))
    else:
        write_table_csv(args.output, header, rows)


def cmd_simulate(args):
    params = ArfimaParams.from_order(args.order, args.d, args.phi, args.theta, args.sigma2)
    y = simulate_arfima(params, args.n, seed=args.seed, method=args.method)
    cfg = {"order": params.order, "d": args.d, "phi": args.phi, "theta": args.theta, "sigma2": args.sigma2,
           "n": args.n, "method": args.method}
    if _is_json(args.output):
        write_json(args.output, envelope("series", y, args.seed, cfg))
    else:
        write_series_csv(args.output, y)
    return EXIT_OK


def cmd_fit_mle(args):
    y = _series(args)
    fit = fit_mle(y.values, args.order)
    se = fit.se()
    rows = [(nm, getattr(fit.params, nm), se[nm]) for nm in fit.names]
    if _is_json(args.output):
        payload = {"params": {nm: getattr(fit.params, nm) for nm in fit.names}, "se": se,
                   "cov": fit.cov, "names": fit.names, "loglik": fit.loglik,
                   "converged": fit.converged, "iterations": fit.iterations}
        write_json(args.output, envelope("fit", payload, args.seed, {"order": args.order}))
    else:
        write_table_csv(args.output, ("parameter", "estimate", "se"), rows)
    if not fit.converged:
        log.warning("optimizer hit its iteration cap")
    return EXIT_OK


def _mcmc_config(args, order, priors):
    return McmcConfig(iterations=args.iterations, thin=args.thin, burn_in=args.burn_in, order=order,
                      algorithm=args.algorithm, sigma_d=args.sigma_d, priors=priors, seed=args.seed,
                      proposal_scale=args.proposal_scale)


def cmd_fit_mcmc(args):
    y = _series(args)
    cfg = _mcmc_config(args, args.order, _priors(args, STUDY_PRIORS))
    draws = run_mcmc(y.values, cfg)
    log.info("acceptance rates %s; ESS(d) %.0f", draws.acceptance_rates, effective_sample_size(draws.column("d")))
    _emit_draws(args, draws, vars(args))
    return EXIT_OK


def _abc_config(args, order, priors):
    return AbcConfig(M=args.simulations, q=args.q, q_sigma2=args.q_sigma2, variant=args.variant, order=order,
                     priors=priors, seed=args.seed, workers=_workers(args), chunk_size=args.chunk_size,
                     arma_summary=args.arma_summary, scratch_path=args.scratch)


def cmd_fit_abc(args):
    y = _series(args)
    draws = run_abc(y.values, _abc_config(args, args.order, _priors(args, STUDY_PRIORS)))
    _emit_draws(args, draws, vars(args))
    log.info("accepted %d of %d", len(draws), args.simulations)
    if len(draws) == 0:
        print(f"error: no ABC draws accepted ({draws.meta.get('diagnostic')})", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_forecast(args):
    y = _series(args)
    if args.draws:
        draws = PosteriorDraws.from_csv(args.draws)
    else:
        params = ArfimaParams.from_order(args.order, args.d, args.phi, args.theta, args.sigma2)
        draws = PosteriorDraws.point_mass(params, args.point_draws)
    fc = posterior_predictive_paths(y.values, draws, args.b, np.random.default_rng(args.seed))
    if _is_json(args.output):
        write_json(args.output, envelope("forecast", fc.to_json_dict(), args.seed, {"b": args.b}))
    else:
        fc.to_csv(args.output, include_paths=args.paths)
    return EXIT_OK


def cmd_grid(args):
    y = _series(args)
    priors = _priors(args, STUDY_PRIORS)
    values = log_posterior_grid(y.values, args.d_grid, args.phi_grid, args.theta, priors)
    corr = ridge_correlation(values, args.d_grid, args.phi_grid)
    rows = [(d, p, values[i, j]) for i, d in enumerate(args.d_grid) for j, p in enumerate(args.phi_grid)]
    if _is_json(args.output):
        write_json(args.output, envelope("grid", {"cells": [dict(d=d, phi=p, logpost=v) for d, p, v in rows],
                                                  "ridge_correlation": corr}, args.seed, {"theta": args.theta}))
    else:
        write_table_csv(args.output, ("d", "phi", "logpost"), rows)
    log.info("d-phi correlation within 2 log-units of the maximum: %.3f", corr)
    return EXIT_OK


def _study(args, forecast: bool):
    if not args.config:
        raise InputError("--config is required for study runs")
    raw = load_config_file(args.config)
    for key in ("reps", "n", "seed", "workers"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    if "workers" not in raw:
        raw["workers"] = _workers(args)
    cfg = StudyConfig.from_dict(raw)
    res = forecast_study(cfg) if forecast else run_study(cfg)
    table = forecasts_csv(res.forecasts) if forecast else metrics_csv(res.metrics)
    if _is_json(args.output):
        key = "forecast" if forecast else "metrics"
        write_json(args.output, envelope(key, res.forecasts if forecast else res.metrics, cfg.seed, cfg.to_dict()))
    elif args.output:
        Path(args.output).write_text(table)
    else:
        sys.stdout.write(table)
    if args.markdown:
        md = forecasts_markdown(res.forecasts) if forecast else metrics_markdown(res.metrics)
        Path(args.markdown).write_text(md + "\n")
    return EXIT_OK


def cmd_gnp_transform(args):
    if not args.input:
        raise InputError("--input is required")
    col = int(args.column) if isinstance(args.column, str) and args.column.isdigit() else args.column
    r = gnp_transform(read_column(args.input, col))
    if _is_json(args.output):
        write_json(args.output, envelope("series", r, None, {}))
    else:
        write_series_csv(args.output, r, column="log_return")
    return EXIT_OK


def cmd_dic(args):
    y = _series(args)
    if not args.draws:
        raise InputError("--draws is required")
    draws = PosteriorDraws.from_csv(args.draws)
    value = dic(y.values, draws)
    write_json(args.output, envelope("dic", {"dic": value, "order": draws.order, "draws": len(draws)}, None, {}))
    return EXIT_OK


def cmd_gnp(args):
    if not args.input:
        raise InputError("--input is required")
    col = int(args.column) if isinstance(args.column, str) and args.column.isdigit() else args.column
    raw = read_column(args.input, col)
    y = raw - raw.mean() if args.returns else gnp_transform(raw)
    order = parse_order(args.model)
    priors = _priors(args, GNP_PRIORS)
    payload = {"n": int(y.size), "sample_variance": float(np.var(y, ddof=1)), "order": order, "method": args.method}
    if args.method == "mle":
        fit = fit_mle(y, order)
        payload["mle"] = {"params": {nm: getattr(fit.params, nm) for nm in fit.names}, "se": fit.se()}
    else:
        if args.method.startswith("mcmc"):
            args.algorithm = "filtered" if args.method == "mcmc-filter" else "simultaneous"
            draws = run_mcmc(y, _mcmc_config(args, order, priors))
            payload["ess"] = {nm: effective_sample_size(draws.column(nm)) for nm in draws.names}
        else:
            args.variant = _VARIANTS[args.method.split("-")[1]]
            draws = run_abc(y, _abc_config(args, order, priors))
            if len(draws) == 0:
                print("error: no ABC draws accepted", file=sys.stderr)
                return EXIT_EMPTY
        payload["summary"] = draws.summary()
        payload["accepted"] = len(draws)
        payload["acceptance_rates"] = draws.acceptance_rates
        payload["dic"] = dic(y, draws)
    write_json(args.output, envelope("gnp", payload, args.seed, {"alpha": priors.alpha, "beta": priors.beta}))
    return EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "fit-mle": cmd_fit_mle,
    "fit-mcmc": cmd_fit_mcmc,
    "fit-abc": cmd_fit_abc,
    "forecast": cmd_forecast,
    "grid": cmd_grid,
    "study": lambda a: _study(a, False),
    "forecast-study": lambda a: _study(a, True),
    "gnp-transform": cmd_gnp_transform,
    "dic": cmd_dic,
    "gnp": cmd_gnp,
}


def main(argv=None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _apply_config(args, argv, parser, subs)
        if args.command in STOCHASTIC and args.seed is None and not (args.command == "gnp" and args.method == "mle"):
            raise InputError(f"--seed is required for {args.command}")
        return HANDLERS[args.command](args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, WorkerError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
