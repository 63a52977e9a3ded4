"""Command-line interface.

Exit codes: 0 success; 1 a fit did not converge; 2 usage error;
3 the requested power or size is infeasible; 4 input data error;
5 numerical failure (singular matrix, empty risk set and the like).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import cox_subsampling as cox
from . import logistic_balanced as bal
from . import logistic_rare as rare
from . import simgen
from .errors import NotConverged, OptsubError, ParseError, QExceedsN, SchemaError
from .fit import WeightedFit
from .inference import bh_adjust, wald_tests
from .io import DEFAULT_CHUNK_ROWS, CsvStream, ingest_csv, write_csv
from .logistic import fit_logistic, inverse, m_x
from .outofcore import stream_two_step
from .sampling import reservoir_sample_stream
from .sizing import SizingReport
from .survival import fit_cox

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5

DEFAULTS = {
    "criterion": "a",
    "q0": None,
    "qn": None,
    "c0": None,
    "alpha": 0.05,
    "gamma": "0.8",
    "beta_star": None,
    "target_covariate": None,
    "seed": 0,
    "threads": 1,
    "chunk_rows": DEFAULT_CHUNK_ROWS,
    "out": None,
    "mode": "re",
    "re_target": None,
    "q_grid": None,
    "design": "rare",
    "plot": False,
    "stream": False,
    "reps": None,
    "scale": 1.0,
    "q": None,
    "weight_column": None,
    "schema": "survival",
}
CASTS = {
    "q0": int,
    "qn": int,
    "c0": float,
    "alpha": float,
    "beta_star": float,
    "seed": int,
    "threads": int,
    "chunk_rows": int,
    "re_target": float,
    "reps": int,
    "scale": float,
    "q": int,
    "plot": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
    "stream": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Flat ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise UsageError(f"config line without a separator: {raw!r}")
        key = key.strip().lstrip("-").replace("-", "_")
        out[key] = value.strip()
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options: flags first, then the config file, then built-in defaults."""
    config = read_config(args.config) if getattr(args, "config", None) else {}
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            value = config.get(key, default)
            if value is not None and key in CASTS and isinstance(value, str):
                value = CASTS[key](value)
            setattr(args, key, value)
    return args


def _common(p: argparse.ArgumentParser, sizing: bool = True) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--input", "-i", help="input CSV file")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help="worker processes for replicated runs")
    g.add_argument("--chunk-rows", type=int, dest="chunk_rows")
    g.add_argument("--out", "-o", help="JSON report path (curves go next to it as CSV)")
    g.add_argument("--config", help="flat key=value file; flags take precedence")
    g.add_argument("--plot", action="store_const", const=True, help="also render PNG figures next to the CSV curves")
    if sizing:
        g.add_argument("--criterion", choices=["a", "l", "uniform", "A", "L"])
        g.add_argument("--q0", type=int)
        g.add_argument("--qn", type=int)
        g.add_argument("--c0", type=float)
        g.add_argument("--alpha", type=float)
        g.add_argument("--gamma", help="nominal power, or comma-separated list")
        g.add_argument("--beta-star", type=float, dest="beta_star")
        g.add_argument("--target-covariate", dest="target_covariate", help="covariate name or 1-based position")
        g.add_argument("--mode", choices=["re", "power"])
        g.add_argument("--re-target", type=float, dest="re_target")
        g.add_argument("--q-grid", dest="q_grid", help="comma-separated q values for the RE curve")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optsub", description="Optimal subsampling for Cox and logistic regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cox = sub.add_parser("cox", help="Cox regression")
    cox_sub = p_cox.add_subparsers(dest="action", required=True)
    for action, text in (("fit", "full-data partial-likelihood fit"), ("subsample", "two-step subsample fit"), ("size", "choose the subsample size")):
        p = cox_sub.add_parser(action, help=text)
        _common(p)
        if action == "subsample":
            p.add_argument("--stream", action="store_const", const=True, help="out-of-core multi-pass mode")

    p_logit = sub.add_parser("logit", help="logistic regression")
    logit_sub = p_logit.add_subparsers(dest="action", required=True)
    for action, text in (("fit", "full-data maximum likelihood"), ("subsample", "two-step subsample fit"), ("size", "choose the subsample size")):
        p = logit_sub.add_parser(action, help=text)
        _common(p)
        p.add_argument("--design", choices=["rare", "balanced"])

    p_sim = sub.add_parser("simulate", help="Monte-Carlo tables and synthetic datasets")
    _common(p_sim, sizing=False)
    p_sim.add_argument("--table", choices=sorted(TABLES), help="which experiment table to produce")
    p_sim.add_argument("--scale", type=float, help="fraction of the default replication count")
    p_sim.add_argument("--reps", type=int, help="replications (overrides --scale)")
    p_sim.add_argument("--n", type=int, help="override the dataset size")
    p_sim.add_argument("--gammas", help="comma-separated nominal powers")
    p_sim.add_argument("--settings", help="comma-separated settings or designs")
    p_sim.add_argument("--emit", help="write one synthetic dataset to this CSV and exit")
    p_sim.add_argument("--model", choices=["cox", "logistic"], default="cox")
    p_sim.add_argument("--setting", default="I", help="Cox setting (I, II, III) or logistic design")
    p_sim.add_argument("--beta0", type=float, help="logistic intercept for --emit")
    p_sim.add_argument("--beta-rest", dest="beta_rest", type=float, help="common logistic slope for --emit")
    p_sim.add_argument("--hazard-jump", dest="hazard_jump", type=float, help="Cox baseline hazard after the change point")

    p_sample = sub.add_parser("sample", help="one-pass weighted sampling with replacement")
    _common(p_sample, sizing=False)
    p_sample.add_argument("--schema", choices=["survival", "binary"])
    p_sample.add_argument("--q", type=int, help="number of draws")
    p_sample.add_argument("--weight-column", dest="weight_column", help="column holding sampling weights (default: equal)")
    return parser


# ---------------------------------------------------------------- reporting


class Report:
    def __init__(self, argv, seed):
        self.doc = {"command": list(argv), "seed": seed, "timings": {}, "coefficients": [], "sizing": {}, "diagnostics": {}, "notes": []}
        self.curves = {}
        self._t = time.perf_counter()

    def stage(self, name: str):
        now = time.perf_counter()
        self.doc["timings"][name] = max(now - self._t, 0.0)
        self._t = now

    def coefficients(self, names, beta, cov):
        fit = WeightedFit(np.asarray(beta), np.asarray(cov), True, 0, 0.0, 0, 0)
        z, p = wald_tests(fit)
        adj = bh_adjust(p)
        se = fit.std_errors
        self.doc["coefficients"] = [
            {"name": str(nm), "estimate": float(b), "std_error": float(s), "z": float(zz), "p": float(pp), "adjusted_p": float(a)}
            for nm, b, s, zz, pp, a in zip(names, beta, se, z, p, adj)
        ]

    def curve(self, name: str, header, rows):
        self.curves[name] = (tuple(header), [tuple(r) for r in rows])

    def write(self, out, plot: bool = False):
        text = json.dumps(self.doc, indent=2, default=_json_default)
        if out is None:
            sys.stdout.write(text + "\n")
            return
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, (header, rows) in self.curves.items():
            path = out.with_name(f"{out.stem}.{name}.csv")
            with open(path, "w") as fh:
                fh.write(",".join(header) + "\n")
                for r in rows:
                    fh.write(",".join(_cell(v) for v in r) + "\n")
            paths[name] = str(path)
            if plot:
                paths[name + "_png"] = str(_render(name, header, rows, out.with_name(f"{out.stem}.{name}.png"), self.doc))
        self.doc["curve_files"] = paths
        out.write_text(json.dumps(self.doc, indent=2, default=_json_default) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _render(name, header, rows, path, doc):
    from . import plotting

    cols = list(zip(*rows)) if rows else [[] for _ in header]
    col = dict(zip(header, cols))
    if name == "re":
        plotting.plot_re_curve(col["q"], col["re"], path, target=doc["sizing"].get("re_target"))
    elif name == "power":
        sizes = [math.nan if v is None else v for v in col["q"]]
        plotting.plot_size_curve(col["gamma"], sizes, path, n=doc["diagnostics"].get("n"))
    else:
        plotting.plot_power_table([dict(zip(header, r)) for r in rows], path, title=name)
    return path


# ------------------------------------------------------------------ helpers


def _gammas(spec) -> list[float]:
    return [float(g) for g in str(spec).split(",") if g.strip()]


def _target_index(spec, names, offset: int) -> int | None:
    """Coefficient index for a covariate name or 1-based covariate position."""
    if spec is None:
        return None
    spec = str(spec)
    if offset and spec == "intercept":
        return 0
    if spec in names:
        return names.index(spec) + offset
    try:
        pos = int(spec)
    except ValueError:
        raise UsageError(f"unknown covariate {spec!r}") from None
    if not 1 <= pos <= len(names):
        raise UsageError(f"covariate position {pos} out of range 1..{len(names)}")
    return pos - 1 + offset


def _q_grid(args, scale: int, n: int) -> list[int]:
    if args.q_grid:
        return [int(v) for v in str(args.q_grid).split(",") if v.strip()]
    return [c * scale for c in range(1, 11)]


def _criterion(args) -> str:
    c = str(args.criterion)
    return "uniform" if c.lower() == "uniform" else c.upper()


def _require_input(args):
    if not args.input:
        raise UsageError("--input is required")


def _fit_diagnostics(report: Report, fit) -> bool:
    report.doc["diagnostics"].update(
        {"converged": bool(fit.converged), "iterations": int(fit.iterations), "max_score_norm": float(fit.max_score_norm)}
    )
    return bool(fit.converged)


def _sizing(report: Report, args, s15, scale: int, n: int, re_fn, power_fn, p) -> tuple[bool, int | None]:
    """Fill RE and power curves; return (feasible, chosen q)."""
    grid = _q_grid(args, scale, n)
    sizing = report.doc["sizing"]
    chosen, feasible = None, True
    rep: SizingReport = re_fn(grid)
    report.curve("re", ("q", "re"), [(int(q), float(r)) for q, r in zip(rep.q_grid, rep.re)])
    sizing["re_curve"] = rep.to_dict()
    if args.re_target is not None:
        sizing["re_target"] = args.re_target
        chosen = rep.minimal_q(args.re_target)
        sizing["re_minimal_q"] = chosen
        if chosen is None:
            report.doc["notes"].append("no grid value reaches the RE target; extend --q-grid")
            feasible = False
    if args.mode == "power" or args.beta_star is not None:
        if args.beta_star is None or p is None:
            raise UsageError("power mode needs --beta-star and --target-covariate")
        rows = []
        for g in _gammas(args.gamma):
            ps = power_fn(p, args.beta_star, args.alpha, g)
            rows.append((g, ps.q, bool(ps.feasible)))
        report.curve("power", ("gamma", "q", "feasible"), rows)
        sizing["power"] = [{"gamma": g, "q": q, "feasible": f} for g, q, f in rows]
        first = rows[0]
        if args.mode == "power":
            chosen = first[1] if first[2] else None
            feasible = feasible and first[2]
    return feasible, chosen


# ------------------------------------------------------------------ commands


def cmd_cox(args, report: Report) -> int:
    _require_input(args)
    if args.action == "subsample" and args.stream:
        return cmd_cox_stream(args, report)
    data = ingest_csv(args.input, "survival", args.chunk_rows)
    names = list(data.names)
    report.stage("ingest")
    report.doc["diagnostics"].update({"n": data.n, "events": data.n_e, "censored": data.n_c})
    if args.action == "fit":
        fit = fit_cox(data, strict=False)
        report.stage("fit")
        report.coefficients(names, fit.beta, cox._inverse(fit.information) / data.n)
        return EXIT_OK if _fit_diagnostics(report, fit) else EXIT_NOT_CONVERGED
    crit = _criterion(args)
    q0 = args.q0 or cox.default_q0(data, args.c0 or 2.0)
    pilot = cox.run_pilot(data, q0, crit, args.seed)
    report.stage("pilot")
    s15 = cox.step_15(data, pilot, args.seed)
    report.stage("variance_step")
    p = _target_index(args.target_covariate, names, 0)
    report.doc["sizing"]["q0"] = q0
    feasible, chosen = _sizing(
        report,
        args,
        s15,
        data.n_e,
        data.n,
        lambda grid: cox.re_curve(s15, grid, None),
        lambda pp, b, a, g: cox.qn_for_power(s15, pp, b, a, g),
        p,
    )
    if args.action == "size":
        return EXIT_OK if feasible else EXIT_INFEASIBLE
    if not feasible:
        return EXIT_INFEASIBLE
    q_n = args.qn or chosen or 5 * data.n_e
    fit = cox.fit_subsample(data, pilot.probs_opt, q_n, args.seed, init=pilot.beta_u)
    report.stage("main_fit")
    report.doc["sizing"]["qn"] = q_n
    report.coefficients(names, fit.beta, fit.covariance)
    return EXIT_OK if _fit_diagnostics(report, fit) else EXIT_NOT_CONVERGED


def cmd_cox_stream(args, report: Report) -> int:
    stream = CsvStream(args.input, "survival", args.chunk_rows)
    names = list(stream.names)
    crit = _criterion(args)
    p = _target_index(args.target_covariate, names, 0)
    state = {"feasible": True}

    def choose(s15, n_e):
        feasible, chosen = _sizing(
            report,
            args,
            s15,
            n_e,
            s15.n,
            lambda grid: cox.re_curve(s15, grid, None),
            lambda pp, b, a, g: cox.qn_for_power(s15, pp, b, a, g),
            p,
        )
        state["feasible"] = feasible
        return chosen or 5 * n_e

    q_n = args.qn if args.qn else choose
    res = stream_two_step(stream, args.q0, q_n, crit, args.seed, args.c0 or 2.0, names=tuple(names))
    if args.qn:
        choose(res.step15, res.n_e)
    report.doc["timings"].update(res.timings)
    report.doc["diagnostics"].update({"n": res.n, "events": res.n_e, "censored": res.n_c, "passes": res.passes})
    report.doc["sizing"].update({"q0": res.q0, "qn": res.q_n})
    report.coefficients(names, res.fit.beta, res.fit.covariance)
    converged = _fit_diagnostics(report, res.fit)
    if not converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if state["feasible"] else EXIT_INFEASIBLE


def cmd_logit(args, report: Report) -> int:
    _require_input(args)
    data = ingest_csv(args.input, "binary", args.chunk_rows)
    names = ["intercept", *data.names]
    report.stage("ingest")
    report.doc["diagnostics"].update({"n": data.n, "cases": data.n1, "noncases": data.n0, "design": args.design})
    if args.action == "fit":
        fit = fit_logistic(data, strict=False)
        report.stage("fit")
        report.coefficients(names, fit.beta, inverse(m_x(fit.beta, data)) / data.n)
        return EXIT_OK if _fit_diagnostics(report, fit) else EXIT_NOT_CONVERGED
    crit = _criterion(args)
    p = _target_index(args.target_covariate, list(data.names), 1)
    if args.design == "rare":
        q0 = args.q0 or rare.default_q0(data, args.c0 or 1.0)
        pilot = rare.run_pilot(data, q0, crit, args.seed)
        report.stage("pilot")
        s15 = rare.rare_step_15(data, pilot, args.seed)
        re_fn = lambda grid: rare.rare_re_curve(s15, grid, None)
        power_fn = lambda pp, b, a, g: rare.rare_qn_for_power(s15, pp, b, a, g)
        scale, init = data.n1, pilot.beta_u
        refit = lambda q: rare.fit_subsample(data, pilot.probs_opt, q, args.seed, init=init)
    else:
        q0 = args.q0 or bal.DEFAULT_Q0
        pilot = bal.run_pilot(data, q0, crit, args.seed)
        report.stage("pilot")
        s15 = bal.balanced_step_15(data, pilot, args.seed)
        re_fn = lambda grid: bal.balanced_re_curve(s15, grid)
        power_fn = lambda pp, b, a, g: bal.balanced_qn_for_power(s15, pp, b, a, g)
        scale, init = max(data.n // 100, 1), pilot.beta_prop
        refit = lambda q: bal.fit_subsample(data, pilot.probs_opt, q, args.seed, init=init)
    report.stage("variance_step")
    report.doc["sizing"]["q0"] = q0
    feasible, chosen = _sizing(report, args, s15, scale, data.n, re_fn, power_fn, p)
    if args.action == "size":
        return EXIT_OK if feasible else EXIT_INFEASIBLE
    if not feasible:
        return EXIT_INFEASIBLE
    q_n = args.qn or chosen or 5 * scale
    fit = refit(q_n)
    report.stage("main_fit")
    report.doc["sizing"]["qn"] = q_n
    report.coefficients(names, fit.beta, fit.covariance)
    return EXIT_OK if _fit_diagnostics(report, fit) else EXIT_NOT_CONVERGED


# replications used when --scale is 1
TABLES = {
    "power-cox": 500,
    "power-rare": 500,
    "power-balanced": 500,
    "rmse-rare": 500,
    "re-cox": 50,
    "re-rare": 50,
    "re-balanced": 50,
}
GAMMAS = {
    "power-cox": (0.80, 0.83, 0.85, 0.87, 0.90, 0.91, 0.93, 0.95),
    "power-rare": (0.80, 0.85, 0.90, 0.95),
    "power-balanced": (0.80, 0.85, 0.90, 0.95),
}
POWER_DESIGNS = {
    "power-cox": {"I": 0.005, "II": 0.05, "III": 0.05},
    "power-rare": {"mzNormal": (-3.5, 0.1), "mixNormal": (-4.5, 0.2), "T3": (-3.0, 0.15), "EXP": (-4.0, 0.15)},
    "power-balanced": {"mzNormal": (1.0, 0.1)},
}
RMSE_DESIGNS = {"mzNormal": -6.0, "mixNormal": -5.0, "T3": -5.0, "EXP": -11.0}


def _settings(args, default) -> list[str]:
    return [s.strip() for s in args.settings.split(",")] if args.settings else list(default)


def cmd_simulate(args, report: Report) -> int:
    if args.emit:
        return _emit(args, report)
    if not args.table:
        raise UsageError("simulate needs --table or --emit")
    reps = args.reps or max(int(round(TABLES[args.table] * args.scale)), 1)
    report.doc["diagnostics"]["reps"] = reps
    kind = args.table.split("-")[0]
    if kind == "power":
        header, rows = _power_table(args, reps)
    elif kind == "rmse":
        header, rows = _rmse_table(args, reps)
    else:
        header, rows = _re_table(args, reps)
    report.stage("simulate")
    report.curve(args.table, header, rows)
    report.doc["table"] = [dict(zip(header, r)) for r in rows]
    return EXIT_OK


def _power_table(args, reps):
    table = args.table
    gammas = tuple(_gammas(args.gammas)) if args.gammas else GAMMAS[table]
    model = table.split("-")[1]
    header = ("setting", "nominal_power", "empirical_power_A", "empirical_power_L", "mean_q_A", "sd_q_A", "mean_q_L", "sd_q_L", "infeasible_A", "infeasible_L")
    rows = []
    for setting in _settings(args, POWER_DESIGNS[table]):
        spec = POWER_DESIGNS[table][setting]
        if model == "cox":
            config = simgen.CoxSimConfig(setting, n=args.n or 150_000, hazard_jump=spec, seed=args.seed)
        else:
            config = simgen.LogisticSimConfig(setting, args.n or 100_000, spec[0], (spec[1],) * 6, seed=args.seed)
        by_crit = {}
        for crit in ("A", "L"):
            design = simgen.default_power_design(model, config, crit)
            by_crit[crit] = simgen.power_experiment(design, gammas, args.alpha or 0.05, reps, workers=args.threads)
        for i, g in enumerate(gammas):
            a, l = by_crit["A"][i], by_crit["L"][i]
            rows.append((setting, g, a["empirical_power"], l["empirical_power"], a["mean_q"], a["sd_q"], l["mean_q"], l["sd_q"], a["infeasible"], l["infeasible"]))
    return header, rows


def _rmse_table(args, reps):
    header = ("setting", "method", "rmse_truth", "rmse_mle")
    rows = []
    for design in _settings(args, RMSE_DESIGNS):
        config = simgen.LogisticSimConfig(design, args.n or 100_000, RMSE_DESIGNS[design], seed=args.seed)
        for r in simgen.rmse_experiment(config, 1000, 5000, reps, workers=args.threads):
            rows.append((design, r["method"], r["rmse_truth"], r["rmse_mle"]))
    return header, rows


def _re_table(args, reps):
    model = args.table.split("-")[1]
    header = ("setting", "q", "re_estimated_mean", "re_full_data_mean", "within_10pct_share")
    rows = []
    if model == "cox":
        configs = {s: simgen.CoxSimConfig(s, n=args.n or 15_000, seed=args.seed) for s in _settings(args, ("I", "II", "III"))}
        mult = range(1, 10)
    elif model == "rare":
        configs = {d: simgen.LogisticSimConfig(d, args.n or 100_000, RMSE_DESIGNS[d], seed=args.seed) for d in _settings(args, RMSE_DESIGNS)}
        mult = range(1, 10)
    else:
        configs = {d: simgen.LogisticSimConfig(d, args.n or 100_000, 1.0, (0.1,) * 6, seed=args.seed) for d in _settings(args, ("mzNormal",))}
        mult = range(1000, 10001, 1000)
    for name, config in configs.items():
        res = simgen.re_experiment(model, config, mult, reps, workers=args.threads)
        est = np.array([r["estimated"] for r in res])
        full = np.array([r["full_data"] for r in res])
        close = np.abs(est / full - 1) <= 0.10
        for j in range(est.shape[1]):
            rows.append((name, int(np.mean([r["q"][j] for r in res])), float(est[:, j].mean()), float(full[:, j].mean()), float(close[:, j].mean())))
    return header, rows


def _emit(args, report: Report) -> int:
    if args.model == "cox":
        kwargs = {"hazard_jump": args.hazard_jump} if args.hazard_jump else {}
        data = simgen.gen_cox(simgen.CoxSimConfig(args.setting, n=args.n or 15_000, seed=args.seed, **kwargs))
        report.doc["diagnostics"].update({"n": data.n, "events": data.n_e})
    else:
        config = simgen.LogisticSimConfig(
            args.setting if args.setting in simgen.LOGISTIC_DESIGNS else "mzNormal",
            args.n or 100_000,
            args.beta0 if args.beta0 is not None else -6.0,
            (args.beta_rest if args.beta_rest is not None else 0.5,) * 6,
            seed=args.seed,
        )
        data = simgen.gen_logistic(config)
        report.doc["diagnostics"].update({"n": data.n, "cases": data.n1})
    write_csv(data, args.emit)
    report.doc["emitted"] = args.emit
    return EXIT_OK


def cmd_sample(args, report: Report) -> int:
    _require_input(args)
    if not args.q:
        raise UsageError("--q is required")
    stream = CsvStream(args.input, args.schema, args.chunk_rows)
    canonical = list(stream.layout.key_columns) if args.schema == "binary" else ["entry", "time", "status"]
    canonical += list(stream.layout.covariates)
    if args.weight_column:
        if args.weight_column not in canonical:
            raise UsageError(f"unknown weight column {args.weight_column!r}")
        col = canonical.index(args.weight_column)
        weight_fn = lambda b: b[:, col]
    else:
        weight_fn = lambda b: np.ones(b.shape[0])
    res = reservoir_sample_stream(stream, args.q, weight_fn, seed=args.seed)
    report.stage("sample")
    report.doc["diagnostics"].update({"records_seen": res.records_seen, "batches": res.batches_seen, "total_weight": res.total_weight})
    rows = [(int(o), float(p), *map(float, row)) for o, p, row in zip(res.ordinals, res.probabilities, res.payloads)]
    report.curve("sample", ("source_row", "probability", *canonical), rows)
    return EXIT_OK


COMMANDS = {"cox": cmd_cox, "logit": cmd_logit, "simulate": cmd_simulate, "sample": cmd_sample}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        args = resolve(args)
        report = Report(argv, args.seed)
        code = COMMANDS[args.command](args, report)
    except UsageError as exc:
        print(f"optsub: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SchemaError, FileNotFoundError) as exc:
        print(f"optsub: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except QExceedsN as exc:
        print(f"optsub: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotConverged as exc:
        print(f"optsub: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (OptsubError, ValueError) as exc:
        print(f"optsub: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    report.doc["exit_code"] = code
    report.write(args.out, plot=bool(args.plot))
    return code


if __name__ == "__main__":
    sys.exit(main())
