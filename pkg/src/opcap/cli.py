"""Command-line entry point.

Every subcommand accepts ``--config file.json`` whose keys are option names
(dashes or underscores); flags given on the command line override the file.
Stochastic subcommands require ``--seed``. Exit codes: 0 success, 2 bad
configuration or usage, 3 numerical or output failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from opcap import calibration as cal
from opcap import io, sma, studies
from opcap.distributions import InfiniteMeanError
from opcap.lda import SLA_VARIANTS, CompoundPoissonModel, mc_var, models_from_spec, sla_var
from opcap.regression import RegressionDataset, ols_fit, power_model_fit
from opcap.rootfind import NoRootError
from opcap.streams import substream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


def _int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _floats(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x.strip()]


def _ints(v):
    return [_int(x) for x in (v if isinstance(v, (list, tuple)) else str(v).split(",")) if str(x).strip()]


def _strs(v):
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [x.strip() for x in str(v).split(",") if x.strip()]


def _bool(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


# option name -> (converter, default, help); a default of None means optional
COMMON = {
    "config": (str, None, "JSON file with option values"),
    "threads": (_int, None, "worker threads (default: OPCAP_THREADS or 1)"),
    "out": (str, None, "output file"),
}
SEED = {"seed": (_int, None, "master random seed (required)")}
LOGNORMAL = {
    "lambda": (float, 10.0, "Poisson rate"),
    "mu": (float, 14.0, "Lognormal mu (log of Euro)"),
    "sigma": (float, 2.0, "Lognormal sigma"),
    "model": (str, None, "JSON file or string: [{rate, family, params}, ...] (overrides lambda/mu/sigma)"),
}
INSTABILITY = {
    "horizon": (_int, 1000, "years of capital ratios"),
    "window": (_int, 10, "trailing LC window in years"),
    "burn_in": (_int, 10, "simulated years before the first ratio"),
}

COMMANDS = {
    "sma": (
        "SMA capital from BI and LC (or a loss history CSV with columns year,amount)",
        {
            "bi": (float, None, "business indicator, Euro million"),
            "lc": (float, None, "loss component, Euro million"),
            "losses": (str, None, "CSV of individual losses (year,amount in Euro million)"),
            "L": (float, sma.DEFAULT_L, "first LC threshold"),
            "H": (float, sma.DEFAULT_H, "second LC threshold"),
        },
    ),
    "lda-var": (
        "annual-loss VaR (Euro million) by single-loss approximation or Monte Carlo",
        {
            **LOGNORMAL,
            "alpha": (float, 0.999, "quantile level"),
            "method": (str, "sla", "sla or mc"),
            "variant": (str, "corrected", "SLA variant: " + ", ".join(SLA_VARIANTS)),
            "years": (_int, 1_000_000, "Monte Carlo years"),
            **SEED,
        },
    ),
    "implied-bi": (
        "BI (Euro billion) equating long-run SMA capital with the model VaR",
        {
            **LOGNORMAL,
            "alpha": (float, 0.999, "quantile level"),
            "method": (str, "sla", "sla or mc"),
            "years": (_int, 1_000_000, "Monte Carlo years"),
            "grid_table": (_bool, False, "emit the (mu, sigma) grid for lambda as CSV"),
            "mus": (_floats, list(studies.GRID_MUS), "grid mu values"),
            "sigmas": (_floats, list(studies.GRID_SIGMAS), "grid sigma values"),
            **SEED,
        },
    ),
    "instability": (
        "yearly SMA capital over its long-run value for the test-case banks",
        {
            "test_case": (str, "tc1", "tc1 (sigma 2.5) or tc2 (sigma 2.8)"),
            "sizes": (_strs, ["small", "medium", "large"], "bank sizes"),
            "bi": (float, 2000.0, "business indicator, Euro million"),
            **INSTABILITY,
            "summary": (str, None, "JSON summary file"),
            **SEED,
        },
    ),
    "sensitivity": (
        "ratio boxplot statistics per Lognormal sigma for the large bank",
        {
            "sigmas": (_floats, list(studies.SENSITIVITY_SIGMAS), "sigma values"),
            "bi": (float, None, "business indicator (default: implied BI per sigma)"),
            **INSTABILITY,
            **SEED,
        },
    ),
    "split": (
        "super-additivity benefit and under-capitalization of an m-way split",
        {
            "lambda": (float, 10.0, "Poisson rate"),
            "mu": (float, 14.0, "Lognormal mu"),
            "sigmas": (_floats, [2.0], "Lognormal sigma values"),
            "m": (_ints, [2], "numbers of entities"),
            "alpha": (float, 0.999, "quantile level"),
        },
    ),
    "superadd-region": (
        "implied BI of entity 1 (Euro billion) where a two-way split is super-additive",
        {
            "joint_lambda": (float, 10.0, "joint Poisson rate"),
            "joint_mu": (float, 12.0, "joint Lognormal mu"),
            "joint_sigma": (float, 2.5, "joint Lognormal sigma"),
            "mu1": (_floats, [8, 9, 10, 11, 12, 13], "entity 1 mu grid"),
            "mu2": (_floats, [8, 9, 10, 11, 12, 13], "entity 2 mu grid"),
            "lambda1": (float, 10.0, "entity 1 rate"),
            "lambda2": (float, 10.0, "entity 2 rate"),
            "sigma1": (float, 2.5, "entity 1 sigma"),
            "sigma2": (float, 2.5, "entity 2 sigma"),
            "alpha": (float, 0.999, "quantile level"),
        },
    ),
    "calibrate": (
        "grid-search severity calibration from summary statistics (amounts in Euro)",
        {
            "stats": (str, None, "CSV with columns year,n_tilde,n,S,M"),
            "demo": (str, None, "'table4': repeated calibration of simulated blocks"),
            "family": (str, "lognormal", "severity family"),
            "grid": (str, "grid1", "grid1, grid2 or 'lo1:hi1:lo2:hi2:step'"),
            "objective": (str, "sum", "sum (sum of squares) or pareto"),
            "condition": (str, "percentile", "first condition: " + ", ".join(cal.FIRST_CONDITIONS)),
            "tie_break": (str, "relative", "Pareto-set tie-break: relative or absolute"),
            "u": (float, cal.U_DEFAULT, "upper reporting threshold"),
            "u_tilde": (float, cal.U_TILDE_DEFAULT, "lower reporting threshold"),
            "blocks": (_int, 200, "demo: simulated blocks"),
            "years": (_int, 5, "demo: years per block"),
            "summary": (str, None, "demo: JSON summary file"),
            "seed": (_int, None, "master random seed (required for --demo)"),
        },
    ),
    "sla-accuracy": (
        "Monte Carlo VaR against the single-loss approximation (raw amounts)",
        {
            "lambdas": (_floats, [1000.0, 100.0, 10.0], "Poisson rates"),
            "sigmas": (_floats, [1.0, 2.0], "Lognormal sigmas"),
            "mu": (float, 3.0, "Lognormal mu"),
            "alpha": (float, 0.999, "quantile level"),
            "years": (_int, 10_000_000, "Monte Carlo years"),
            **SEED,
        },
    ),
    "regress": (
        "linear or power-coefficient regression on a CSV dataset",
        {
            "data": (str, None, "CSV with a header row"),
            "response": (str, "y", "response column"),
            "covariates": (_strs, None, "covariate columns (default: all)"),
            "kind": (str, "ols", "ols or power"),
            "objective": (str, "least_squares", "power model: least_squares or quantile"),
            "tau": (float, 0.5, "quantile level for the quantile objective"),
            "weights": (str, None, "ols: column of observation weights"),
            "no_intercept": (_bool, False, "ols: omit the intercept"),
        },
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opcap", description="Operational-risk capital toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, (help_text, options) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        for key, (_, default, h) in {**COMMON, **options}.items():
            flag = "--" + key.replace("_", "-")
            if default is False:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=argparse.SUPPRESS, help=h)
            else:
                extra = f" (default: {default})" if default is not None else ""
                p.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=h + extra)
    return parser


def resolve_options(command: str, cli: dict) -> dict:
    """Merge defaults, the --config file and explicit flags, converting types."""
    options = {**COMMON, **COMMANDS[command][1]}
    values = {k: d for k, (_, d, _) in options.items()}
    if cli.get("config"):
        try:
            with open(cli["config"], encoding="utf-8") as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cli['config']}: {exc}") from None
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        for raw_key, v in file_values.items():
            key = raw_key.replace("-", "_")
            if key not in options or key == "config":
                raise ConfigError(f"unknown config key {raw_key!r} for {command}")
            values[key] = v
    values.update({k: v for k, v in cli.items() if k != "command"})
    out = {}
    for key, v in values.items():
        conv = options[key][0]
        if v is None:
            out[key] = None
            continue
        try:
            out[key] = conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"--{key.replace('_', '-')}: {exc}") from None
    return out


def _require(opts, *keys):
    for k in keys:
        if opts.get(k) is None:
            raise ConfigError(f"--{k.replace('_', '-')} is required")


def _model(opts) -> CompoundPoissonModel:
    try:
        if opts.get("model"):
            text = opts["model"]
            path = Path(text)
            spec = json.loads(path.read_text(encoding="utf-8") if path.exists() else text)
            return models_from_spec(spec)
        return _lognormal(opts["lambda"], opts["mu"], opts["sigma"])
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid model: {exc}") from None


def _lognormal(rate, mu, sigma) -> CompoundPoissonModel:
    try:
        return CompoundPoissonModel.poisson_lognormal(rate, mu, sigma)
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from None


def _choice(value, allowed, name):
    if value not in allowed:
        raise ConfigError(f"--{name} must be one of {', '.join(allowed)}; got {value!r}")
    return value


def _fmt(x) -> str:
    return f"{x:.10g}"


def cmd_sma(o):
    _require(o, "bi")
    if (o["lc"] is None) == (o["losses"] is None):
        raise ConfigError("give exactly one of --lc or --losses")
    if o["lc"] is not None:
        lc = o["lc"]
    else:
        try:
            rows = np.genfromtxt(o["losses"], delimiter=",", names=True, dtype=float, ndmin=1)
            year, amount = rows["year"], rows["amount"]
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read losses: {exc}") from None
        years = [amount[year == y] for y in np.unique(year)]
        lc = sma.loss_component(years, o["L"], o["H"])
    try:
        inp = sma.SmaInput(o["bi"], lc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    k = inp.capital
    if o["out"]:
        io.emit_json({"bi": inp.bi, "lc": inp.lc, "bucket": sma.bucket(inp.bi), "bic": sma.bic(inp.bi), "k_sma": k}, o["out"])
    return _fmt(k)


def cmd_lda_var(o):
    model = _model(o)
    _choice(o["method"], ("sla", "mc"), "method")
    _choice(o["variant"], SLA_VARIANTS, "variant")
    if o["method"] == "mc":
        _require(o, "seed")
        res = mc_var(model, o["alpha"], o["years"], o["seed"], threads=o["threads"])
        out = {"method": "mc", "alpha": o["alpha"], "years": o["years"], "seed": o["seed"], "var": res.value, "stderr": res.stderr}
        line = f"{_fmt(res.value)} (se {_fmt(res.stderr)})"
    else:
        v = sla_var(model, o["alpha"], o["variant"])
        out = {"method": "sla", "variant": o["variant"], "alpha": o["alpha"], "var": v}
        line = _fmt(v)
    if o["out"]:
        io.emit_json(out, o["out"])
    return line


def cmd_implied_bi(o):
    _choice(o["method"], ("sla", "mc"), "method")
    if o["method"] == "mc":
        _require(o, "seed")
    if o["grid_table"]:
        if o["method"] != "sla":
            raise ConfigError("--grid-table uses the single-loss approximation only")
        rows = studies.implied_bi_grid(o["lambda"], o["mus"], o["sigmas"], o["alpha"])
        grid = []
        for mu in o["mus"]:
            row = {"mu": mu}
            row.update({_fmt(r["sigma"]): r["implied_bi_bn"] for r in rows if r["mu"] == mu})
            grid.append(row)
        if o["out"]:
            io.emit_table(grid, o["out"], ["mu"] + [_fmt(s) for s in o["sigmas"]])
        return f"{len(rows)} cells"
    model = _model(o)
    bi = studies.implied_bi(model, o["alpha"], o["method"], years=o["years"], seed=o["seed"], threads=o["threads"])
    if o["out"]:
        io.emit_json({"method": o["method"], "implied_bi_bn": bi / 1000.0, "implied_bi": bi, "bucket": sma.bucket(bi)}, o["out"])
    return f"{bi / 1000.0:.6g}"


def _instability_spec_check(o):
    _require(o, "seed")
    if not o["horizon"] > o["window"] >= 1 or o["burn_in"] < o["window"] - 1:
        raise ConfigError("need horizon > window >= 1 and burn-in >= window - 1")


def cmd_instability(o):
    _instability_spec_check(o)
    _choice(o["test_case"], tuple(studies.TEST_CASES), "test-case")
    for s in o["sizes"]:
        _choice(s, ("small", "medium", "large"), "sizes")
    series = studies.instability_by_bank_size(
        studies.TEST_CASES[o["test_case"]],
        o["seed"],
        bi=o["bi"],
        horizon=o["horizon"],
        window=o["window"],
        burn_in=o["burn_in"],
        threads=o["threads"],
    )
    rows, summary = [], {}
    for size in o["sizes"]:
        s = series[size]
        rows += [{"bank": size, **r} for r in s.rows()]
        summary[size] = {"long_term_lc": s.long_term_lc, "long_term_capital": s.long_term_capital, **studies.summarize_ratios(s.ratio)}
    if o["out"]:
        io.emit_table(rows, o["out"], ["bank", "year", "lc", "k_sma", "ratio"])
    if o["summary"]:
        io.emit_json(summary, o["summary"])
    return " ".join(f"{k}: max ratio {_fmt(round(v['max'], 4))}" for k, v in summary.items())


def cmd_sensitivity(o):
    _instability_spec_check(o)
    rows = studies.sensitivity_boxplot_data(
        o["sigmas"], o["seed"], bi=o["bi"], horizon=o["horizon"], window=o["window"], burn_in=o["burn_in"], threads=o["threads"]
    )
    if o["out"]:
        io.emit_table(rows, o["out"])
    return " ".join(f"sigma {_fmt(r['sigma'])}: max {r['max']:.3f}" for r in rows)


SPLIT_COLUMNS = ["sigma", "m", "bi_joint", "sma_joint", "lda_joint", "sma_entity_total", "lda_entity_total",
                 "delta", "relative_delta", "under_capitalization", "relative_under_capitalization"]


def cmd_split(o):
    if any(m < 1 for m in o["m"]):
        raise ConfigError("--m values must be positive integers")
    models = [(sigma, _lognormal(o["lambda"], o["mu"], sigma)) for sigma in o["sigmas"]]
    rows = []
    for sigma, model in models:
        for m in o["m"]:
            r = studies.split_analysis(studies.SplitSpec(model, m), o["alpha"])
            rows.append({
                "sigma": sigma, "m": m, "bi_joint": r["bi_joint"], "sma_joint": r["sma_joint"], "lda_joint": r["lda_joint"],
                "sma_entity_total": math.fsum(r["sma_entities"]), "lda_entity_total": math.fsum(r["lda_entities"]),
                "delta": r["delta"], "relative_delta": r["relative_delta"],
                "under_capitalization": r["under_capitalization"],
                "relative_under_capitalization": r["relative_under_capitalization"],
            })
    if o["out"]:
        io.emit_table(rows, o["out"], SPLIT_COLUMNS)
    first = rows[0]
    return f"delta {first['delta']:.1f} under-capitalization {first['under_capitalization']:.1f} (sigma {_fmt(first['sigma'])}, m {first['m']})"


def cmd_superadd_region(o):
    joint = _lognormal(o["joint_lambda"], o["joint_mu"], o["joint_sigma"])
    for rate, sigma in ((o["lambda1"], o["sigma1"]), (o["lambda2"], o["sigma2"])):
        _lognormal(rate, 10.0, sigma)
    rows = studies.superadditive_region(
        joint, o["mu1"], o["mu2"], rates=(o["lambda1"], o["lambda2"]), sigmas=(o["sigma1"], o["sigma2"]), alpha=o["alpha"]
    )
    if o["out"]:
        io.emit_table(rows, o["out"], ["mu1", "mu2", "bi1_bn", "bi2_bn", "gap"])
    feasible = sum(r["bi1_bn"] is not None for r in rows)
    return f"{feasible} of {len(rows)} cells super-additive"


def _grid(text):
    if text in cal.GRIDS:
        return cal.GRIDS[text]
    try:
        lo1, hi1, lo2, hi2, step = (float(v) for v in text.split(":"))
        return cal.GridSpec((lo1, hi1), (lo2, hi2), step, step)
    except ValueError:
        raise ConfigError(f"--grid must be grid1, grid2 or lo1:hi1:lo2:hi2:step; got {text!r}") from None


OBJECTIVE_ALIASES = {"sum": "sum_of_squares", "1": "sum_of_squares", "sum_of_squares": "sum_of_squares",
                     "pareto": "pareto_optimal", "2": "pareto_optimal", "pareto_optimal": "pareto_optimal"}


def cmd_calibrate(o):
    grid = _grid(o["grid"])
    objective = OBJECTIVE_ALIASES.get(o["objective"])
    if objective is None:
        raise ConfigError(f"--objective must be sum or pareto; got {o['objective']!r}")
    _choice(o["condition"], cal.FIRST_CONDITIONS, "condition")
    _choice(o["tie_break"], cal.TIE_BREAKS, "tie-break")
    if (o["stats"] is None) == (o["demo"] is None):
        raise ConfigError("give exactly one of --stats or --demo")
    if o["demo"] is not None:
        _choice(o["demo"], ("table4",), "demo")
        _require(o, "seed")
        if o["family"] != "lognormal" or o["condition"] != "percentile":
            raise ConfigError("the table4 demo calibrates a lognormal with the percentile condition")
        res = cal.calibration_study(o["seed"], blocks=o["blocks"], years=o["years"], grid=grid, tie_break=o["tie_break"], threads=o["threads"])
        tag = "obj1" if objective == "sum_of_squares" else "obj2"
        rows = [
            {"block": r["block"], "lambda_u_tilde": r["lambda_u_tilde"], "lambda_u": r["lambda_u"], "mu_u": r["mu_u"],
             "mu_hat": r[f"mu_{tag}"], "sigma_hat": r[f"sigma_{tag}"], "lambda_hat": r[f"lambda_{tag}"], "var_hat": r[f"var_{tag}"]}
            for r in res["rows"]
        ]
        if o["out"]:
            io.emit_table(rows, o["out"])
        if o["summary"]:
            io.emit_json({"objective": objective, "truth": res["truth"], **res["summary"]}, o["summary"])
        s = res["summary"]
        return (f"mean mu {s[f'mu_{tag}']['mean']:.3f} sigma {s[f'sigma_{tag}']['mean']:.3f} "
                f"lambda {s[f'lambda_{tag}']['mean']:.1f} over {len(rows)} blocks")
    try:
        stats = cal.QisBankStatistics.from_csv(o["stats"], u=o["u"], u_tilde=o["u_tilde"])
        agg = cal.aggregate_statistics(stats)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot use statistics: {exc}") from None
    result = cal.grid_search_calibrate(agg, o["family"], grid, objective, first_condition=o["condition"], tie_break=o["tie_break"])
    if o["out"]:
        io.emit_json(result.to_dict(), o["out"])
    if not result.converged:
        raise ArithmeticError("calibration did not converge: every grid residual is infinite")
    return f"params {tuple(round(p, 4) for p in result.params)} lambda {result.lam:.2f}"


def cmd_sla_accuracy(o):
    _require(o, "seed")
    cells = [(lam, sigma, _lognormal(lam, o["mu"], sigma)) for lam in o["lambdas"] for sigma in o["sigmas"]]
    rows = []
    for k, (lam, sigma, model) in enumerate(cells):
        mc = mc_var(model, o["alpha"], o["years"], substream(o["seed"], k), unit=1.0, threads=o["threads"])
        sla = sla_var(model, o["alpha"], "corrected", unit=1.0)
        rows.append({
            "lambda": lam, "mu": o["mu"], "sigma": sigma, "mc_var": mc.value, "mc_stderr": mc.stderr,
            "mc_stderr_pct": 100.0 * mc.stderr / mc.value, "sla_var": sla, "delta_var": sla - mc.value,
            "eps_pct": 100.0 * (sla - mc.value) / mc.value,
        })
    if o["out"]:
        io.emit_table(rows, o["out"])
    return " ".join(f"({_fmt(r['lambda'])},{_fmt(r['sigma'])}) eps {r['eps_pct']:.2f}%" for r in rows)


def cmd_regress(o):
    _require(o, "data")
    _choice(o["kind"], ("ols", "power"), "kind")
    try:
        data = RegressionDataset.from_csv(o["data"], o["response"])
        covs = o["covariates"]
        for c in covs or ():
            data.column(c)
        weights = data.column(o["weights"]) if o["weights"] else None
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot use dataset: {exc}") from None
    if o["kind"] == "ols":
        if o["weights"]:
            covs = [c for c in (covs or data.names) if c != o["weights"]]
        res = ols_fit(data, covs, intercept=not o["no_intercept"], weights=weights)
        out = res.to_dict()
        line = " ".join(f"{n}={_fmt(c)}" for n, c in zip(res.names, res.coef))
    else:
        _choice(o["objective"], ("least_squares", "quantile"), "objective")
        covs = covs or list(data.names)
        if len(covs) != 1:
            raise ConfigError("the power model takes exactly one covariate")
        fit = power_model_fit(data.column(covs[0]), data.y, o["objective"], o["tau"] if o["objective"] == "quantile" else None)
        out = fit.to_dict()
        m = fit.model
        line = f"theta={_fmt(m.theta)} alpha={_fmt(m.alpha)} A={_fmt(m.A)}"
    if o["out"]:
        io.emit_json(out, o["out"])
    return line


HANDLERS = {
    "sma": cmd_sma,
    "lda-var": cmd_lda_var,
    "implied-bi": cmd_implied_bi,
    "instability": cmd_instability,
    "sensitivity": cmd_sensitivity,
    "split": cmd_split,
    "superadd-region": cmd_superadd_region,
    "calibrate": cmd_calibrate,
    "sla-accuracy": cmd_sla_accuracy,
    "regress": cmd_regress,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    cli = vars(ns)
    command = cli["command"]
    try:
        opts = resolve_options(command, cli)
        if opts["threads"] is not None and opts["threads"] < 1:
            raise ConfigError("--threads must be at least 1")
        if opts.get("seed") is not None and opts["seed"] < 0:
            raise ConfigError("--seed must be nonnegative")
        line = HANDLERS[command](opts)
    except ConfigError as exc:
        print(f"opcap {command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, NoRootError, InfiniteMeanError, ValueError, OSError) as exc:
        print(f"opcap {command}: failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
