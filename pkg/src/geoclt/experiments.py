"""CLT experiments: configuration, replication loop, statistics and reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, DataError, GeoCLTError, NumericalError
from .measure import QuadratureSpec
from .sampling import SeedStream

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 1e-3
CSV_COLUMNS = ("n", "replication", "seed_path", "value", "check_value", "flag")


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: str
    body: dict
    n_list: tuple
    reps: int
    master_seed: int
    geometry: dict = field(default_factory=lambda: {"geometry": "euclidean"})
    j: float = 1.0
    T: Optional[dict] = None
    L: Optional[dict] = None
    quadrature: QuadratureSpec = QuadratureSpec()
    hull_backend: Optional[str] = None

    def __post_init__(self):
        from .model import MODELS

        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        d = self.dim
        if not isinstance(d, int) or d < 2:
            raise ConfigError("body dimension must be an integer >= 2")
        if not self.n_list or any(int(n) < d + 1 for n in self.n_list):
            raise ConfigError(f"every n must be at least d + 1 = {d + 1}")
        if self.reps < 2:
            raise ConfigError("reps must be at least 2")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")
        if self.model == "dual_volume" and self.j == 0:
            raise ConfigError("j must be nonzero")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))

    @property
    def dim(self):
        return self.body.get("dim", len(self.body.get("axes", ())))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        exp = dict(data.pop("experiment", {}))
        exp.update({k: v for k, v in data.items() if k not in ("quadrature",)})
        if "master_seed" not in exp:
            raise ConfigError("master_seed is required")
        q = data.get("quadrature", {})
        try:
            quad = QuadratureSpec(**q)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad quadrature spec: {exc}") from None
        allowed = {"name", "model", "body", "n_list", "reps", "master_seed", "geometry", "j", "T", "L",
                   "hull_backend"}
        unknown = set(exp) - allowed
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        try:
            return cls(quadrature=quad, **{"name": "experiment", **exp})
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_list"] = list(self.n_list)
        return d

    @property
    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @property
    def tag(self) -> int:
        """Integer identifying the experiment in seed paths."""
        return int(hashlib.sha256(self.name.encode()).hexdigest()[:8], 16)


# ----------------------------------------------------------------------------
# records and reports
# ----------------------------------------------------------------------------


@dataclass
class ReplicationRecord:
    n: int
    replication: int
    seed_path: str
    value: float
    check_value: float = float("nan")
    flag: int = 0
    attempts: int = 1
    wall_time: float = 0.0

    def csv_row(self):
        return [self.n, self.replication, self.seed_path, f"{self.value:.17g}", f"{self.check_value:.17g}",
                self.flag]


@dataclass
class NSummary:
    n: int
    reps: int
    mean: float
    variance: float
    kolmogorov: float
    failures: int
    retries: int
    flag_rate: float
    standardized: list


@dataclass
class VarianceFit:
    slope: float
    intercept: float
    r2: float
    expected: float
    flagged: bool


@dataclass
class RateFit:
    exponent: float
    covariate_log_n: float
    covariate_loglog_n: float
    below_envelope: bool


@dataclass
class CLTReport:
    name: str
    config: dict
    config_hash: str
    master_seed: int
    per_n: list
    variance_fit: Optional[VarianceFit] = None
    rate: Optional[RateFit] = None
    records: list = field(default_factory=list, repr=False)

    def summary(self, n) -> NSummary:
        return next(s for s in self.per_n if s.n == n)

    def aggregates(self) -> dict:
        return {
            "name": self.name,
            "config": self.config,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "per_n": [asdict(s) for s in self.per_n],
            "variance_fit": asdict(self.variance_fit) if self.variance_fit else None,
            "rate": asdict(self.rate) if self.rate else None,
        }


# ----------------------------------------------------------------------------
# statistics
# ----------------------------------------------------------------------------


def kolmogorov_distance(sample) -> float:
    """sup_x |F_m(x) - Phi(x)| for the empirical CDF of ``sample``."""
    x = np.sort(np.asarray(sample, dtype=float))
    m = len(x)
    if m == 0:
        raise DataError("empty sample")
    cdf = ndtr(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def standardize(values):
    v = np.asarray(values, dtype=float)
    sd = v.std(ddof=1)
    if not sd > 0:
        raise DataError("sample has zero variance")
    w = (v - v.mean()) / sd
    # remove the last rounding residue so mean 0, variance 1 hold tightly
    w -= w.mean()
    return w / w.std(ddof=1)


def _check_rows(ns, ys):
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(np.unique(ns)) < 4 or ns.max() < 10 * ns.min():
        raise DataError("need at least 4 distinct n spanning a decade")
    if np.any(ys <= 0) or np.any(~np.isfinite(ys)):
        raise DataError("entries must be positive and finite")
    return ns, ys


def variance_scaling_fit(rows, d: Optional[int] = None, tol: float = 0.3) -> VarianceFit:
    """Least squares of log variance on log n.  ``rows`` are (n, variance) pairs.

    With ``d`` given, slopes steeper than -(d+3)/(d-1) - tol are flagged.
    """
    ns, vs = _check_rows(*zip(*rows))
    x, y = np.log(ns), np.log(vs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    expected = -(d + 3) / (d - 1) if d else float("nan")
    flagged = bool(d and slope < expected - tol)
    return VarianceFit(float(slope), float(intercept), float(r2), float(expected), flagged)


def rate_curve(rows, d: int = 2, reps: Optional[int] = None) -> RateFit:
    """Regress log d_Kol on log n and log log n; ``rows`` are (n, d_Kol) pairs.

    ``exponent`` is the plain log-log slope.  The fit with the log log n
    covariate is reported alongside; its two coefficients are nearly
    collinear over a desk-scale range of n and are not used for decisions.
    The envelope check anchors
    C n^(-1/2) (log n)^p, p = 2(d+1)/(d-1) + 1, at the smallest n and tests
    that every later distance lies below it up to a 4-sigma noise band.
    """
    ns, ks = _check_rows(*zip(*rows))
    x, lx = np.log(ns), np.log(np.log(ns))
    A = np.column_stack([np.ones_like(x), x, lx])
    coef, *_ = np.linalg.lstsq(A, np.log(ks), rcond=None)
    plain = np.polyfit(x, np.log(ks), 1)[0]
    p = 2.0 * (d + 1) / (d - 1) + 1.0
    g = ns ** -0.5 * np.log(ns) ** p
    C = ks[0] / g[0]
    noise = 4.0 * 0.87 / math.sqrt(reps) if reps else 0.0
    below = bool(np.all(ks <= C * g + noise))
    return RateFit(float(plain), float(coef[1]), float(coef[2]), below)


# ----------------------------------------------------------------------------
# replication loop
# ----------------------------------------------------------------------------

_WORKER = {}


def _worker_init(cfg_dict):
    from .model import Model

    cfg = _config_from_echo(cfg_dict)
    _WORKER["cfg"] = cfg
    _WORKER["model"] = Model.from_config(cfg)


def _config_from_echo(d):
    d = dict(d)
    d["quadrature"] = QuadratureSpec(**d["quadrature"])
    return ExperimentConfig(**d)


def _run_one(model, cfg, n_idx, n, rep):
    t0 = time.perf_counter()
    base = SeedStream(cfg.master_seed, (cfg.tag, n_idx, rep))
    last = None
    for attempt in range(2):
        stream = base if attempt == 0 else base.child(attempt)
        try:
            bp = model.sample(stream, n)
            value, check, flag = model.evaluate(bp)
            if not np.isfinite(value):
                raise NumericalError("non-finite functional value")
            return ReplicationRecord(n, rep, stream.label, float(value), float(check), int(flag), attempt + 1,
                                     time.perf_counter() - t0)
        except (GeoCLTError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            log.warning("replication n=%d rep=%d attempt %d failed: %s", n, rep, attempt, exc)
            last = exc
    return ReplicationRecord(n, rep, base.child(1).label, float("nan"), float("nan"), 0, 2,
                             time.perf_counter() - t0)


def _run_chunk(args):
    n_idx, n, reps = args
    return [_run_one(_WORKER["model"], _WORKER["cfg"], n_idx, n, r) for r in reps]


def thread_count(threads=None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("GEOCLT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"GEOCLT_THREADS must be an integer, got {env!r}") from None
    return 1


def run_experiment(cfg: ExperimentConfig, threads=None, model=None) -> CLTReport:
    """Run all replications and aggregate them.

    The result depends only on (cfg, master_seed): each replication owns the
    stream keyed by (experiment tag, n index, replication).  Raises
    NumericalError when more than 0.1% of replications fail twice.
    """
    from .model import Model

    workers = thread_count(threads)
    tasks = []
    chunk = max(1, min(50, cfg.reps // (4 * workers) or 1))
    for i, n in enumerate(cfg.n_list):
        for lo in range(0, cfg.reps, chunk):
            tasks.append((i, n, range(lo, min(cfg.reps, lo + chunk))))
    if workers == 1:
        model = model or Model.from_config(cfg)
        results = [[_run_one(model, cfg, i, n, r) for r in reps] for i, n, reps in tasks]
    else:
        with ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(cfg.to_dict(),)) as ex:
            results = list(ex.map(_run_chunk, tasks))
    records = [r for chunk_ in results for r in chunk_]
    records.sort(key=lambda r: (cfg.n_list.index(r.n), r.replication))
    return aggregate(cfg, records)


def aggregate(cfg: ExperimentConfig, records) -> CLTReport:
    per_n = []
    total_fail = 0
    d = cfg.dim
    for n in cfg.n_list:
        recs = [r for r in records if r.n == n]
        vals = np.array([r.value for r in recs])
        ok = np.isfinite(vals)
        fails = int((~ok).sum())
        total_fail += fails
        v = vals[ok]
        w = standardize(v)
        per_n.append(NSummary(n, int(ok.sum()), float(v.mean()), float(v.var(ddof=1)), kolmogorov_distance(w),
                              fails, int(sum(r.attempts > 1 for r in recs)),
                              float(np.mean([r.flag for r in recs])), w.tolist()))
    if total_fail > MAX_FAILURE_RATE * len(records):
        raise NumericalError(f"{total_fail} of {len(records)} replications failed (limit 0.1%)")
    report = CLTReport(cfg.name, cfg.to_dict(), cfg.hash, cfg.master_seed, per_n, records=records)
    if len(cfg.n_list) >= 4 and max(cfg.n_list) >= 10 * min(cfg.n_list):
        report.variance_fit = variance_scaling_fit([(s.n, s.variance) for s in per_n], d)
        report.rate = rate_curve([(s.n, s.kolmogorov) for s in per_n], d, cfg.reps)
    return report


# ----------------------------------------------------------------------------
# persistence
# ----------------------------------------------------------------------------


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def _version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def emit_report(report: CLTReport, out_dir, plots: bool = True) -> dict:
    """Write records.csv, report.json and SVG plots into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "records.csv", "json": out / "report.json"}
        paths["csv"].write_text(records_csv(report.records))
        agg = report.aggregates()
        agg["version"] = _version()
        agg["standardization"] = "empirical mean and standard deviation per n"
        paths["json"].write_text(json.dumps(agg, indent=1, sort_keys=True))
        if plots:
            paths.update(_plots(report, out))
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return paths


def load_report(in_dir) -> CLTReport:
    """Reload the aggregates (and records, when present) written by :func:`emit_report`."""
    p = Path(in_dir)
    try:
        agg = json.loads((p / "report.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report from {p}: {exc}") from None
    rep = CLTReport(agg["name"], agg["config"], agg["config_hash"], agg["master_seed"],
                    [NSummary(**s) for s in agg["per_n"]],
                    VarianceFit(**agg["variance_fit"]) if agg.get("variance_fit") else None,
                    RateFit(**agg["rate"]) if agg.get("rate") else None)
    csv_path = p / "records.csv"
    if csv_path.exists():
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rep.records = [ReplicationRecord(int(r["n"]), int(r["replication"]), r["seed_path"], float(r["value"]),
                                         float(r["check_value"]), int(r["flag"])) for r in rows]
    return rep


def _plots(report: CLTReport, out: Path) -> dict:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from scipy.stats import norm

    matplotlib.rcParams["svg.hashsalt"] = "geoclt"
    meta = {"Date": None}
    paths = {}
    last = report.per_n[-1]
    w = np.asarray(last.standardized)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(w, bins=40, density=True, alpha=0.6)
    xs = np.linspace(-4, 4, 400)
    ax.plot(xs, norm.pdf(xs))
    ax.set_title(f"standardized values, n={last.n}")
    paths["histogram"] = out / "histogram.svg"
    fig.savefig(paths["histogram"], metadata=meta)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(4, 4))
    m = len(w)
    ax.plot(norm.ppf((np.arange(1, m + 1) - 0.5) / m), np.sort(w), ".", ms=2)
    ax.plot([-4, 4], [-4, 4], lw=0.8)
    ax.set_xlabel("normal quantile")
    ax.set_ylabel("sample quantile")
    paths["qq"] = out / "qq.svg"
    fig.savefig(paths["qq"], metadata=meta)
    plt.close(fig)

    ns = np.array([s.n for s in report.per_n])
    if len(ns) > 1:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.loglog(ns, [s.variance for s in report.per_n], "o-")
        ax.set_xlabel("n")
        ax.set_ylabel("variance")
        paths["variance"] = out / "variance.svg"
        fig.savefig(paths["variance"], metadata=meta)
        plt.close(fig)

        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.loglog(ns, [s.kolmogorov for s in report.per_n], "o-")
        ax.set_xlabel("n")
        ax.set_ylabel("Kolmogorov distance")
        paths["kolmogorov"] = out / "kolmogorov.svg"
        fig.savefig(paths["kolmogorov"], metadata=meta)
        plt.close(fig)
    return paths
