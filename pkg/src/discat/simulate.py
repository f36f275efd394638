"""Monte Carlo harness for the two contamination designs.

Design ``polycor``: one pair of five-category items generated from a
discretized bivariate normal, with a fraction of observations drawn from a
contaminating normal instead. Design ``sem``: four items from a one-factor
model, with a fraction of rows overwritten by an alternating extreme
pattern. Each replication gets its own PCG64 stream spawned from a single
``SeedSequence``, so results do not depend on worker count.
"""

from __future__ import annotations

import csv
import io
import math
import platform
import time
import warnings
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np
import scipy
from scipy.special import ndtr, ndtri

from .errors import DiscatError, InvalidParameter
from .estimator import FitConfig, fit, pearson_sample_corr
from .inference import cell_test, confidence_interval, covariance_from_fit
from .models.polychoric import PolychoricModel
from .multivariate import cronbach_alpha, factor_fit, poly_matrix
from .parallel import pmap
from .tables import ContingencyTable

RNG_ALGORITHM = "numpy.random.PCG64 streams from SeedSequence.spawn (one per eps x replication)"
MAX_FAILURE_RATE = 0.02
THRESHOLDS = (-1.5, -0.5, 0.5, 1.5)
ESTIMATORS = ("robust", "mle", "pearson")


class SimulationFailed(DiscatError):
    """Too many replications failed for the run to be trusted."""


@dataclass(frozen=True)
class PolycorDesign:
    n: int = 1000
    thresholds: tuple = THRESHOLDS
    rho: float = 0.5
    eps: tuple = (0.0, 0.1, 0.2)
    contamination_mean: tuple = (2.0, -2.0)
    contamination_var: tuple = (0.2, 0.2)
    reps: int = 1000
    seed: int = 20240101
    c: float = 1.6
    alpha: float = 0.05
    name: str = field(default="polycor", init=False)

    def __post_init__(self):
        _validate(self.eps, self.reps, self.n)

    @property
    def theta(self) -> np.ndarray:
        t = np.asarray(self.thresholds, float)
        return np.concatenate([[self.rho], t, t])


@dataclass(frozen=True)
class SemDesign:
    n: int = 1000
    q: int = 4
    loading: float = 0.75
    thresholds: tuple = THRESHOLDS
    eps: tuple = (0.0, 0.1, 0.2)
    leverage: tuple = (1, 5, 1, 5)
    reps: int = 1000
    seed: int = 20240101
    c: float = 1.6
    name: str = field(default="sem", init=False)

    def __post_init__(self):
        _validate(self.eps, self.reps, self.n)
        if len(self.leverage) != self.q:
            raise InvalidParameter("leverage pattern must have one entry per item")

    @property
    def sigma(self) -> np.ndarray:
        lam = np.full(self.q, self.loading)
        S = np.outer(lam, lam)
        np.fill_diagonal(S, 1.0)
        return S

    @property
    def alpha_true(self) -> float:
        return cronbach_alpha(self.sigma)


def _validate(eps, reps, n):
    if any(not 0.0 <= e <= 1.0 for e in eps):
        raise InvalidParameter("eps values must lie in [0, 1]")
    if reps < 1 or n < 1:
        raise InvalidParameter("reps and n must be at least 1")


def discretize(values: np.ndarray, thresholds) -> np.ndarray:
    """Code ``j`` when ``t_{j-1} <= value < t_j``."""
    return np.searchsorted(np.asarray(thresholds, float), values, side="right") + 1


def draw_polycor_codes(design: PolycorDesign, eps: float, rng: np.random.Generator) -> np.ndarray:
    """``(N, 2)`` codes; a fixed ``floor(eps N)`` random rows come from the contaminant."""
    n = design.n
    r = design.rho
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    xi = z1
    eta = r * z1 + math.sqrt(1.0 - r * r) * z2
    k = int(math.floor(eps * n + 1e-9))
    bad = rng.permutation(n)[:k]
    if k:
        mu = design.contamination_mean
        sd = np.sqrt(design.contamination_var)
        xi = xi.copy()
        eta = eta.copy()
        xi[bad] = mu[0] + sd[0] * rng.standard_normal(k)
        eta[bad] = mu[1] + sd[1] * rng.standard_normal(k)
    t = design.thresholds
    return np.column_stack([discretize(xi, t), discretize(eta, t)])


def draw_polycor(design: PolycorDesign, eps: float, rng: np.random.Generator) -> ContingencyTable:
    """One contaminated sample, tabulated."""
    j = len(design.thresholds) + 1
    return ContingencyTable.from_codes(draw_polycor_codes(design, eps, rng), (j, j))


def contamination_probs(design: PolycorDesign) -> np.ndarray:
    """Cell probabilities ``h(z)`` of the contaminating distribution (5 x 5)."""
    t = np.concatenate([[-np.inf], design.thresholds, [np.inf]])
    out = []
    for mu, var in zip(design.contamination_mean, design.contamination_var):
        cdf = ndtr((t - mu) / math.sqrt(var))
        out.append(np.diff(cdf))
    return np.outer(out[0], out[1])


def draw_sem(design: SemDesign, eps: float, rng: np.random.Generator) -> np.ndarray:
    """``(N, q)`` code matrix with ``floor(eps N)`` rows set to the leverage pattern."""
    L = np.linalg.cholesky(design.sigma)
    latent = rng.standard_normal((design.n, design.q)) @ L.T
    codes = discretize(latent, design.thresholds)
    k = int(math.floor(eps * design.n + 1e-9))
    if k:
        rows = rng.permutation(design.n)[:k]
        codes[rows] = np.asarray(design.leverage)
    return codes


# replications -------------------------------------------------------------


def _fit_block(table, design, c, want_tests):
    j = len(design.thresholds) + 1
    model = PolychoricModel(j, j)
    res = fit(model, table, FitConfig(c=c))
    cov = covariance_from_fit(res)
    out = {"theta": res.theta, "se": float(cov.se[0])}
    if want_tests:
        rep = cell_test(model, res.theta, table, cov, alpha=0.001, adjust="bh")
        raw = np.full(model.levels[0] * model.levels[1], np.nan)
        adj = np.full_like(raw, np.nan)
        idx = [(x - 1) * model.levels[1] + (y - 1) for x, y in rep.outcomes]
        raw[idx] = rep.raw_p
        adj[idx] = rep.adjusted_p
        out["raw_p"] = raw
        out["adj_p"] = adj
    return out


def polycor_replication(task, design: PolycorDesign, estimators=ESTIMATORS, cell_tests: bool = True) -> dict:
    """Run all estimators on one simulated sample."""
    eps, rep, seed_seq = task
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    codes = draw_polycor_codes(design, eps, rng)
    j = len(design.thresholds) + 1
    table = ContingencyTable.from_codes(codes, (j, j))
    rec = {"eps": eps, "rep": rep}
    for est in estimators:
        try:
            if est == "pearson":
                r = pearson_sample_corr(codes)
                rec[est] = {"theta": np.array([r]), "se": (1.0 - r * r) / math.sqrt(design.n - 3)}
            else:
                c = design.c if est == "robust" else math.inf
                rec[est] = _fit_block(table, design, c, cell_tests and est == "robust")
        except (DiscatError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            rec[est] = {"error": f"{type(exc).__name__}: {exc}"}
    return rec


def sem_replication(task, design: SemDesign, estimators=ESTIMATORS) -> dict:
    eps, rep, seed_seq = task
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    codes = draw_sem(design, eps, rng)
    rec = {"eps": eps, "rep": rep}
    levels = [len(design.thresholds) + 1] * design.q
    for est in estimators:
        try:
            pm = poly_matrix(codes, method=est, c=design.c, levels=levels, threads=1)
            if pm.fallback:
                raise InvalidParameter(f"{len(pm.fallback)} pairwise fits did not converge")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)  # Heywood cases are recorded below
                ff = factor_fit(pm.R)
            rec[est] = {
                "R": pm.R,
                "loadings": ff.loadings.ravel(),
                "alpha": cronbach_alpha(pm.R),
                "psd_corrected": pm.psd_corrected,
                "heywood": bool(ff.heywood),
            }
        except (DiscatError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            rec[est] = {"error": f"{type(exc).__name__}: {exc}"}
    return rec


def _tasks(design) -> list:
    root = np.random.SeedSequence(design.seed)
    per_eps = root.spawn(len(design.eps))
    tasks = []
    for e, ss in zip(design.eps, per_eps):
        for rep, child in enumerate(ss.spawn(design.reps)):
            tasks.append((float(e), rep, child))
    return tasks


def run_replications(design, estimators=ESTIMATORS, threads: int | None = 1, cell_tests: bool = True) -> list:
    """All replication records, ordered by (eps, rep)."""
    if isinstance(design, PolycorDesign):
        func = partial(polycor_replication, design=design, estimators=tuple(estimators), cell_tests=cell_tests)
    elif isinstance(design, SemDesign):
        func = partial(sem_replication, design=design, estimators=tuple(estimators))
    else:
        raise InvalidParameter("unknown design")
    return pmap(func, _tasks(design), threads, chunksize=8)


# aggregation --------------------------------------------------------------


@dataclass
class MetricsRow:
    design: str
    eps: float
    estimator: str
    n_ok: int
    n_failed: int
    mean: float = math.nan
    bias: float = math.nan
    sd: float = math.nan
    coverage: float = math.nan
    ci_length: float = math.nan
    median_se: float = math.nan
    mse_theta: float = math.nan
    rmse_loadings: float = math.nan
    rmse_sigma: float = math.nan
    rmse_alpha: float = math.nan
    mean_alpha: float = math.nan


def pearson_interval(r: float, n: int, alpha: float = 0.05) -> tuple[float, float]:
    """Fisher-z interval for a sample correlation, back-transformed."""
    q = float(ndtri(1.0 - alpha / 2.0))
    z = math.atanh(max(min(r, 1 - 1e-15), -1 + 1e-15))
    h = q / math.sqrt(n - 3)
    return math.tanh(z - h), math.tanh(z + h)


def summarize_polycor(records: list, design: PolycorDesign, estimators=ESTIMATORS) -> list:
    rows = []
    truth = design.theta
    for e in design.eps:
        recs = [r for r in records if r["eps"] == e]
        for est in estimators:
            ok = [r[est] for r in recs if "error" not in r[est]]
            row = MetricsRow(design.name, e, est, len(ok), len(recs) - len(ok))
            if ok:
                est_rho = np.array([o["theta"][0] for o in ok])
                se = np.array([o["se"] for o in ok])
                if est == "pearson":
                    ci = np.array([pearson_interval(r, design.n, design.alpha) for r in est_rho])
                else:
                    ci = np.array([confidence_interval(r, s, design.alpha) for r, s in zip(est_rho, se)])
                    th = np.array([o["theta"] for o in ok])
                    row.mse_theta = float(np.mean(np.sum((th - truth) ** 2, axis=1)))
                row.mean = float(est_rho.mean())
                row.bias = row.mean - design.rho
                row.sd = float(est_rho.std(ddof=1)) if len(ok) > 1 else 0.0
                row.coverage = float(np.mean((ci[:, 0] <= design.rho) & (design.rho <= ci[:, 1])))
                row.ci_length = float(np.mean(ci[:, 1] - ci[:, 0]))
                row.median_se = float(np.median(se))
            rows.append(row)
    return rows


def summarize_sem(records: list, design: SemDesign, estimators=ESTIMATORS) -> list:
    rows = []
    S = design.sigma
    lam = np.full(design.q, design.loading)
    a_true = design.alpha_true
    for e in design.eps:
        recs = [r for r in records if r["eps"] == e]
        for est in estimators:
            ok = [r[est] for r in recs if "error" not in r[est]]
            row = MetricsRow(design.name, e, est, len(ok), len(recs) - len(ok))
            if ok:
                rl = [math.sqrt(np.mean((o["loadings"] - lam) ** 2)) for o in ok]
                rs = [math.sqrt(np.mean((o["R"] - S) ** 2)) for o in ok]
                al = np.array([o["alpha"] for o in ok])
                offdiag = np.array([o["R"][np.triu_indices(design.q, 1)].mean() for o in ok])
                row.mean = float(offdiag.mean())
                row.bias = row.mean - design.loading**2
                row.sd = float(offdiag.std(ddof=1)) if len(ok) > 1 else 0.0
                row.rmse_loadings = float(np.mean(rl))
                row.rmse_sigma = float(np.mean(rs))
                row.rmse_alpha = float(np.mean(np.abs(al - a_true)))
                row.mean_alpha = float(al.mean())
            rows.append(row)
    return rows


def check_failures(rows: list, max_rate: float = MAX_FAILURE_RATE) -> None:
    for r in rows:
        total = r.n_ok + r.n_failed
        if total and r.n_failed / total > max_rate:
            raise SimulationFailed(
                f"{r.estimator} at eps={r.eps}: {r.n_failed}/{total} replications failed"
            )


def run_design(design, estimators=ESTIMATORS, threads: int | None = 1) -> tuple[list, list]:
    """Simulate, aggregate and return ``(metrics_rows, records)``.

    Raises :class:`SimulationFailed` when more than 2% of the replications
    of any estimator fail.
    """
    records = run_replications(design, estimators, threads)
    if isinstance(design, PolycorDesign):
        rows = summarize_polycor(records, design, estimators)
    else:
        rows = summarize_sem(records, design, estimators)
    check_failures(rows)
    return rows, records


# output -------------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def metrics_csv(rows: list) -> str:
    buf = io.StringIO()
    names = list(asdict(rows[0]).keys()) if rows else [f for f in MetricsRow.__dataclass_fields__]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in rows:
        d = asdict(r)
        w.writerow([fmt(d[k]) for k in names])
    return buf.getvalue()


def records_csv(records: list, estimators=ESTIMATORS) -> str:
    """Long per-replication file: one line per (eps, rep, estimator, quantity)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "rep", "estimator", "quantity", "value"])
    for r in records:
        for est in estimators:
            o = r[est]
            if "error" in o:
                w.writerow([fmt(r["eps"]), r["rep"], est, "error", o["error"]])
                continue
            for key, val in o.items():
                if key in ("raw_p", "adj_p", "R"):
                    continue
                arr = np.atleast_1d(val)
                if arr.size == 1:
                    w.writerow([fmt(r["eps"]), r["rep"], est, key, fmt(arr.ravel()[0])])
                else:
                    for i, v in enumerate(arr.ravel()):
                        w.writerow([fmt(r["eps"]), r["rep"], est, f"{key}[{i}]", fmt(v)])
    return buf.getvalue()


def manifest(design, started: float | None = None) -> dict:
    from . import __version__

    d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(design).items()}
    d = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}
    out = {
        "design": d,
        "seed": design.seed,
        "rng": RNG_ALGORITHM,
        "pearson_interval": "Fisher z transform with standard error 1/sqrt(N-3), back-transformed",
        "versions": {
            "discat": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    if started is not None:
        out["elapsed_seconds"] = time.time() - started
    return out
