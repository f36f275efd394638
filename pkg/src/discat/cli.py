"""Command-line interface.

Subcommands: ``fit``, ``celltest``, ``polymat``, ``cfa`` and ``simulate``.
Data go to stdout, diagnostics to stderr. Exit status is 0 on success,
1 on input errors and 2 when estimation or simulation fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .errors import DiscatError, InputError, NonConvergence
from .estimator import FitConfig, fit
from .inference import cell_test, covariance_from_fit
from .models import PoissonModel, PolychoricModel, RaschModel
from .multivariate import PolyMatrix, cronbach_alpha, factor_fit, poly_matrix, reverse_codes
from .parallel import resolve_threads
from .simulate import (
    PolycorDesign,
    SemDesign,
    SimulationFailed,
    manifest as sim_manifest,
    check_failures,
    metrics_csv,
    records_csv,
    run_replications,
    summarize_polycor,
    summarize_sem,
)
from .tables import ContingencyTable, read_raw_csv


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# helpers ------------------------------------------------------------------


def parse_c(text: str) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        v = float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tuning constant {text!r}") from None
    if not v >= 1.0:
        raise argparse.ArgumentTypeError("tuning constant must be >= 1 or 'inf'")
    return v


def parse_float_list(text: str) -> list:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from None


def jnum(v):
    """JSON-safe number: non-finite values become strings."""
    v = float(v)
    if math.isfinite(v):
        return v
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


def fmt17(v) -> str:
    return format(float(v), ".17g")


def read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def digest(path: str) -> str:
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def run_manifest(command: str, args, inputs: list, seed=None, started: float | None = None) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "config"):
            continue
        if isinstance(v, float):
            v = jnum(v)
        cfg[k] = v
    return {
        "command": command,
        "config": cfg,
        "inputs": {p: digest(p) for p in inputs},
        "seed": seed,
        "version": __version__,
        "elapsed_seconds": (time.time() - started) if started is not None else None,
    }


def emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def split_cols(text):
    return [c.strip() for c in text.split(",") if c.strip()] if text else None


# table loading ------------------------------------------------------------


def load_table(args):
    """Return ``(model, table, inputs)`` for fit-like commands."""
    if bool(args.input) == bool(args.raw):
        raise InputError("give exactly one of --input (long-form table) or --raw (observations)")
    if args.input:
        path = args.input
        table = ContingencyTable.read_long_csv(read_text(path))
    else:
        path = args.raw
        codes, _ = read_raw_csv(read_text(path), split_cols(args.cols))
        if codes.shape[0] == 0:
            raise InputError("raw file has no observations")
        if args.model in ("rasch", "poisson"):
            if np.any(codes < 0):
                raise InputError("counts and binary responses must be nonnegative")
            codes = codes + 1  # raw 0-based responses to 1-based cell codes
        if args.model == "rasch" and np.any(codes > 2):
            raise InputError("Rasch responses must be 0 or 1")
        if args.levels:
            levels = tuple(int(x) for x in args.levels.split(","))
        elif args.model == "rasch":
            levels = (2,) * codes.shape[1]
        else:
            levels = tuple(int(x) for x in codes.max(axis=0))
        table = None
        if args.model != "poisson":
            table = ContingencyTable.from_codes(codes, levels)
        else:
            args._codes = codes
    k = table.arity if table is not None else args._codes.shape[1]
    if args.model == "polychoric":
        if k != 2:
            raise InputError(f"polychoric model needs exactly two columns, got {k}")
        model = PolychoricModel(*table.levels)
    elif args.model == "rasch":
        if table.levels != (2,) * k:
            raise InputError("Rasch tables must have two categories per item")
        model = RaschModel(k)
    else:
        periods = parse_periods(args.periods, k)
        if table is None:
            counts0 = args._codes - 1
            zmax = args.zmax if args.zmax else int(counts0.max()) + 10
            if np.any(counts0 > zmax):
                raise InputError(f"observed count exceeds --zmax {zmax}")
            model = PoissonModel(periods, zmax)
            table = ContingencyTable.from_codes(args._codes, model.levels)
        else:
            zmax = table.levels[0] - 1
            if args.zmax:
                if args.zmax < zmax:
                    raise InputError(f"table contains counts above --zmax {args.zmax}")
                zmax = args.zmax
            model = PoissonModel(periods, zmax)
            if table.levels != model.levels:
                dense = np.zeros(model.levels, dtype=np.int64)
                dense[tuple(slice(0, j) for j in table.levels)] = table.counts
                table = ContingencyTable(model.levels, dense)
    return model, table, [path]


def parse_periods(text, k):
    if not text:
        return [(float(j), float(j + 1)) for j in range(k)]
    out = []
    for part in text.split(","):
        try:
            a, b = part.split(":")
            out.append((float(a), float(b)))
        except ValueError:
            raise InputError(f"invalid period {part!r}; use start:end") from None
    if len(out) != k:
        raise InputError(f"{len(out)} periods given for {k} count columns")
    return out


def fit_config(args) -> FitConfig:
    return FitConfig(c=args.c, max_iter=args.max_iter, gtol=args.gtol, n_starts=args.starts, seed=args.seed)


def fit_payload(res, cov, table) -> dict:
    names = res.model.param_names
    out = {
        "model": type(res.model).__name__,
        "c": jnum(res.c),
        "n": res.n,
        "theta": {k: jnum(v) for k, v in zip(names, res.theta)},
        "se": None,
        "covariance": None,
        "residuals": [
            {"cell": list(z), "frequency": jnum(f), "probability": jnum(p), "residual": jnum(x)}
            for z, f, p, x in zip(res.outcomes, res.freqs, res.probs, res.residuals)
        ],
        "downweighted": [list(z) for z in res.downweighted],
        "convergence": {
            "converged": res.converged,
            "iterations": res.iterations,
            "grad_norm": jnum(res.grad_norm),
            "loss": jnum(res.loss),
            "message": res.message,
            "at_kink": res.at_kink,
        },
    }
    if cov is not None:
        out["se"] = {k: jnum(v) for k, v in zip(names, cov.se)}
        out["covariance"] = [[jnum(v) for v in row] for row in cov.Sigma / res.n]
    return out


def try_covariance(res):
    try:
        return covariance_from_fit(res)
    except (DiscatError, np.linalg.LinAlgError) as exc:
        print(f"warning: covariance unavailable: {exc}", file=sys.stderr)
        return None


# commands -----------------------------------------------------------------


def cmd_fit(args) -> int:
    started = time.time()
    model, table, inputs = load_table(args)
    man = run_manifest("fit", args, inputs, seed=args.seed, started=None)
    status = 0
    try:
        res = fit(model, table, fit_config(args))
    except NonConvergence as exc:
        res = getattr(exc, "result", None)
        print(f"error: {exc}", file=sys.stderr)
        status = 2
        if res is None:
            return 2
    cov = try_covariance(res) if status == 0 else None
    payload = fit_payload(res, cov, table)
    man["elapsed_seconds"] = time.time() - started
    payload["manifest"] = man
    emit(dump_json(payload), args.output)
    return status


def cmd_celltest(args) -> int:
    started = time.time()
    model, table, inputs = load_table(args)
    man = run_manifest("celltest", args, inputs, seed=args.seed)
    try:
        res = fit(model, table, fit_config(args))
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cov = covariance_from_fit(res)
    rep = cell_test(res.model, res.theta, table, cov, alpha=args.alpha, adjust=args.adjust)
    man["elapsed_seconds"] = time.time() - started
    if args.format == "csv":
        lines = ["cell,statistic,raw_p,adjusted_p,reject"]
        for z, t, p, a, r in zip(rep.outcomes, rep.statistic, rep.raw_p, rep.adjusted_p, rep.reject):
            lines.append(f"\"{' '.join(map(str, z))}\",{fmt17(t)},{fmt17(p)},{fmt17(a)},{str(bool(r)).lower()}")
        emit("\n".join(lines) + "\n", args.output)
        print("manifest: " + json.dumps(man), file=sys.stderr)
        return 0
    payload = {
        "alpha": rep.alpha,
        "adjust": rep.adjust,
        "m": rep.m,
        "theta": {k: jnum(v) for k, v in zip(res.model.param_names, res.theta)},
        "cells": [
            {
                "cell": list(z),
                "statistic": jnum(t),
                "variance": jnum(v),
                "raw_p": jnum(p),
                "adjusted_p": jnum(a),
                "reject": bool(r),
            }
            for z, t, v, p, a, r in zip(
                rep.outcomes, rep.statistic, rep.variance, rep.raw_p, rep.adjusted_p, rep.reject
            )
        ],
        "excluded": [list(z) for z in rep.excluded],
        "manifest": man,
    }
    emit(dump_json(payload), args.output)
    return 0


def load_items(args):
    codes, names = read_raw_csv(read_text(args.raw), split_cols(args.cols))
    if codes.shape[1] < 2:
        raise InputError("need at least two item columns")
    if codes.shape[0] == 0:
        raise InputError("raw file has no observations")
    if np.any(codes < 1):
        raise InputError("item codes must be 1-based positive integers")
    levels = [int(x) for x in args.levels.split(",")] if args.levels else [int(x) for x in codes.max(axis=0)]
    if len(levels) != codes.shape[1]:
        raise InputError("--levels needs one entry per item")
    rev = split_cols(args.reverse) or []
    for r in rev:
        if r not in names:
            raise InputError(f"reverse-coded column '{r}' is not among the selected items")
    codes = reverse_codes(codes, [names.index(r) for r in rev], levels)
    return codes, names, levels


def estimate_matrix(args):
    codes, names, levels = load_items(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pm = poly_matrix(
            codes, method=args.estimator, c=args.c, levels=levels, threads=args.threads, names=names
        )
    for i, j in pm.fallback:
        print(f"warning: pair ({names[i]}, {names[j]}) did not converge; using Pearson correlation", file=sys.stderr)
    if pm.psd_corrected:
        print(
            f"warning: matrix was not positive semidefinite (min eigenvalue {pm.min_eigenvalue_before:.3g}); projected",
            file=sys.stderr,
        )
    return pm


def matrix_csv(R, names) -> str:
    lines = ["," + ",".join(names)]
    for n, row in zip(names, R):
        lines.append(n + "," + ",".join(fmt17(v) for v in row))
    return "\n".join(lines) + "\n"


def read_matrix_csv(path):
    import csv
    import io

    rows = list(csv.reader(io.StringIO(read_text(path))))
    rows = [r for r in rows if r]
    if not rows:
        raise InputError("empty matrix file")
    try:
        if rows[0][0].strip() == "" or not _is_number(rows[0][0]):
            names = [h.strip() for h in rows[0][1:]] if rows[0][0].strip() == "" else [h.strip() for h in rows[0]]
            body = rows[1:]
            vals = [[float(x) for x in (r[1:] if len(r) == len(names) + 1 else r)] for r in body]
        else:
            vals = [[float(x) for x in r] for r in rows]
            names = [f"V{i + 1}" for i in range(len(vals))]
    except ValueError:
        raise InputError("matrix file contains non-numeric entries") from None
    R = np.asarray(vals)
    if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] != len(names):
        raise InputError("matrix file must hold a square matrix")
    return R, names


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_polymat(args) -> int:
    started = time.time()
    pm = estimate_matrix(args)
    man = run_manifest("polymat", args, [args.raw], started=started)
    emit(matrix_csv(pm.R, pm.names), args.output)
    report = polymat_report(pm)
    report["manifest"] = man
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(dump_json(report))
    else:
        print("manifest: " + json.dumps(man), file=sys.stderr)
    return 2 if pm.fallback else 0


def polymat_report(pm: PolyMatrix) -> dict:
    names = pm.names
    pairs = []
    q = pm.q
    for i in range(q):
        for j in range(i + 1, q):
            ok = bool(pm.converged[i, j]) if pm.converged is not None else True
            pairs.append({"items": [names[i], names[j]], "estimate": jnum(pm.R[i, j]), "converged": ok})
    return {
        "method": pm.method,
        "c": None if pm.c is None else jnum(pm.c),
        "items": names,
        "matrix": [[jnum(v) for v in row] for row in pm.R],
        "psd_corrected": pm.psd_corrected,
        "pairs": pairs,
    }


def cmd_cfa(args) -> int:
    started = time.time()
    if args.factors != 1:
        raise InputError("only --factors 1 is supported")
    if args.from_matrix:
        if args.raw:
            raise InputError("give either --raw or --from-matrix, not both")
        R, names = read_matrix_csv(args.from_matrix)
        if R.shape[0] < 2:
            raise InputError("need at least two items")
        pm = PolyMatrix.from_matrix(R, names)
        rev = split_cols(args.reverse) or []
        s = np.ones(len(names))
        for r in rev:
            if r not in names:
                raise InputError(f"reverse-coded column '{r}' is not in the matrix")
            s[names.index(r)] = -1.0
        pm.R = pm.R * np.outer(s, s)
        inputs = [args.from_matrix]
    else:
        if not args.raw:
            raise InputError("give --raw data or --from-matrix")
        pm = estimate_matrix(args)
        inputs = [args.raw]
    ff = factor_fit(pm.R)
    report = polymat_report(pm)
    report.update(
        {
            "loadings": {n: jnum(v) for n, v in zip(pm.names, ff.loadings.ravel())},
            "uniquenesses": {n: jnum(v) for n, v in zip(pm.names, ff.uniquenesses)},
            "proportion_variance": jnum(ff.proportion_variance),
            "cronbach_alpha": jnum(cronbach_alpha(pm.R)),
            "factor_converged": ff.converged,
            "heywood": [pm.names[j] for j in ff.heywood],
            "non_informative": ff.non_informative,
        }
    )
    report["manifest"] = run_manifest("cfa", args, inputs, started=started)
    emit(dump_json(report), args.output)
    return 2 if pm.fallback else 0


def cmd_simulate(args) -> int:
    started = time.time()
    common = dict(n=args.n, eps=tuple(args.eps), reps=args.reps, seed=args.seed, c=args.c)
    design = PolycorDesign(**common) if args.design == "polycor" else SemDesign(**common)
    records = run_replications(design, threads=args.threads)
    summarize = summarize_polycor if args.design == "polycor" else summarize_sem
    rows = summarize(records, design)
    status = 0
    try:
        check_failures(rows)
    except SimulationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = 2
    text = metrics_csv(rows)
    sys.stdout.write(text)
    man = sim_manifest(design, started)
    man["command"] = "simulate"
    man["threads"] = resolve_threads(args.threads)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "metrics.csv"), "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(os.path.join(args.out_dir, "replications.csv"), "w", encoding="utf-8") as fh:
            fh.write(records_csv(records))
        with open(os.path.join(args.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(dump_json(man))
    else:
        print("manifest: " + json.dumps(man), file=sys.stderr)
    return status


# parser -------------------------------------------------------------------


def _fit_args(p):
    p.add_argument("--input", help="long-form table CSV (c1..ck,count)")
    p.add_argument("--raw", help="raw observation CSV with a header row")
    p.add_argument("--cols", help="comma-separated columns of --raw to use")
    p.add_argument("--model", choices=["polychoric", "rasch", "poisson"], default="polychoric")
    p.add_argument("--levels", help="comma-separated category counts per column")
    p.add_argument("--periods", help="Poisson periods as start:end,start:end (default unit periods)")
    p.add_argument("--zmax", type=int, help="Poisson truncation bound (default max count + 10)")
    p.add_argument("--c", type=parse_c, default=1.6, help="tuning constant, or 'inf' for maximum likelihood")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--gtol", type=float, default=1e-8)
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="write output here instead of stdout")


def _items_args(p):
    p.add_argument("--raw", help="raw observation CSV with one column per item")
    p.add_argument("--cols", help="comma-separated item columns (default all)")
    p.add_argument("--levels", help="comma-separated category counts per item")
    p.add_argument("--estimator", choices=["robust", "mle", "pearson"], default="robust")
    p.add_argument("--c", type=parse_c, default=1.6)
    p.add_argument("--reverse", help="comma-separated items to reverse-code")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", help="write output here instead of stdout")


def build_parser() -> Parser:
    parser = Parser(prog="discat", description="Robust estimation for categorical data models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value file pre-populating flags (flags win)")
    sub = parser.add_subparsers(dest="command", parser_class=Parser)

    p = sub.add_parser("fit", help="fit a model and report estimates, SEs and residuals")
    _fit_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("celltest", help="cellwise misfit tests")
    _fit_args(p)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--adjust", choices=["bh", "none"], default="bh")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_celltest)

    p = sub.add_parser("polymat", help="pairwise correlation matrix")
    _items_args(p)
    p.add_argument("--json", help="also write a JSON report with per-pair convergence")
    p.set_defaults(func=cmd_polymat)

    p = sub.add_parser("cfa", help="one-factor analysis of a correlation matrix")
    _items_args(p)
    p.add_argument("--from-matrix", help="CSV correlation matrix instead of raw data")
    p.add_argument("--factors", type=int, default=1)
    p.set_defaults(func=cmd_cfa)

    p = sub.add_parser("simulate", help="Monte Carlo designs")
    p.add_argument("--design", choices=["polycor", "sem"], default="polycor")
    p.add_argument("--eps", type=parse_float_list, default=[0.0, 0.1, 0.2])
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--c", type=parse_c, default=1.6)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", help="directory for metrics.csv, replications.csv and manifest.json")
    p.set_defaults(func=cmd_simulate)
    return parser


def read_config(path: str) -> dict:
    out = {}
    for lineno, line in enumerate(read_text(path).splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required")
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in cfg.items():
            if k not in known or k in ("help", "func"):
                raise InputError(f"unknown config key '{k}' for {args.command}")
            defaults[k] = v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse(sys.argv[1:] if argv is None else argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DiscatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
