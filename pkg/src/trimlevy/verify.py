"""Monte Carlo verification harness.

An experiment sweeps a grid of trimming levels, simulates normalized pairs
for each level, and compares them with the matching limit law: marginal
Kolmogorov-Smirnov distances, sample variances and the sample correlation.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .limit_laws import LimitLaw, make_limit_law
from .models import model_from_spec
from .moments import model_c_alpha
from .schemes import TESTED_COLUMNS, ConfigError, Scheme
from .simulate import DEFAULT_REL_TOL, MODES, RngStream, normalize, simulate_batch

SCHEMA_VERSION = 1
KS_NULL_COEF = 1.36
TRENDS = ("decreasing", "non-increasing")


def ks_statistic(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance between the sample and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def _per_r(value, n_r: int, name: str) -> list:
    if isinstance(value, (list, tuple)):
        if len(value) != n_r:
            raise ConfigError(f"{name} list must have one entry per r")
        return [float(v) for v in value]
    return [float(value)] * n_r


@dataclass
class ExperimentConfig:
    model: dict
    scheme: str
    r_grid: list
    n: int
    seed: int
    t: float = 1.0
    rel_tol: float = DEFAULT_REL_TOL
    mode: str = "gaussian-residual"
    ks_threshold: dict = field(default_factory=dict)   # {"col1": x or [per r], ...}
    ks_slack: object = 0.0
    checks: dict = field(default_factory=dict)
    trend: dict = field(default_factory=dict)          # {"col2": "decreasing"} enforced
    c_alpha: Optional[float] = None
    name: str = ""
    description: str = ""
    threads: int = 1

    def __post_init__(self):
        self.scheme = Scheme.parse(self.scheme).value
        self.r_grid = [int(r) for r in self.r_grid]
        if not self.r_grid or any(b <= a for a, b in zip(self.r_grid, self.r_grid[1:])):
            raise ConfigError("r_grid must be a non-empty increasing list")
        if self.n < 100:
            raise ConfigError("n must be >= 100")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        for col, thr in self.ks_threshold.items():
            if col not in ("col1", "col2", "ratio"):
                raise ConfigError(f"unknown KS column {col!r}")
            if any(v <= 0 for v in _per_r(thr, len(self.r_grid), "ks_threshold")):
                raise ConfigError("KS thresholds must be positive")
        if "ratio" in self.ks_threshold and self.scheme != Scheme.NEG_DET_SCALE.value:
            raise ConfigError("the ratio KS check applies to NEG_DET_SCALE only")
        for col, kind in self.trend.items():
            if kind not in TRENDS:
                raise ConfigError(f"trend must be one of {TRENDS}")
        unknown = set(self.checks) - {"var_col1", "var_col2", "corr", "abs_corr_max",
                                      "var_col1_rel", "var_col2_rel", "corr_abs_tol"}
        if unknown:
            raise ConfigError(f"unknown checks: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data.pop("schema_version", None)
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    @property
    def scheme_enum(self) -> Scheme:
        return Scheme(self.scheme)

    def ks_columns(self) -> list:
        if self.ks_threshold:
            return sorted(self.ks_threshold)
        return [f"col{c}" for c in TESTED_COLUMNS[self.scheme_enum]]

    def thresholds(self, col: str) -> list:
        k = len(self.r_grid)
        if col in self.ks_threshold:
            return _per_r(self.ks_threshold[col], k, "ks_threshold")
        slack = _per_r(self.ks_slack, k, "ks_slack")
        return [KS_NULL_COEF / math.sqrt(self.n) + s for s in slack]


@dataclass
class RRecord:
    r: int
    n: int
    ks: dict
    thresholds: dict
    sample_mean_col1: float
    sample_mean_col2: float
    sample_var_col1: float
    sample_var_col2: float
    sample_corr: float
    passes: dict
    mean_truncation_index: float = float("nan")
    max_tail_sd_ratio: float = float("nan")

    @property
    def ks_col1(self):
        return self.ks.get("col1", float("nan"))

    @property
    def ks_col2(self):
        return self.ks.get("col2", float("nan"))

    @property
    def passed(self) -> bool:
        return all(self.passes.values())


def _json_safe(obj):
    """Replace NaN with None so the output is strict JSON."""
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _nan_back(rec: dict) -> dict:
    return {k: (float("nan") if v is None else v) for k, v in rec.items()}


@dataclass(eq=False)
class ExperimentReport:
    config: dict
    law_moments: dict
    records: list
    trends: dict
    verdict: bool
    runtime: float = field(default=0.0, compare=False)
    source: str = "simulator"
    schema_version: int = SCHEMA_VERSION
    samples: dict = field(default_factory=dict, compare=False, repr=False)

    def record(self, r: int) -> RRecord:
        for rec in self.records:
            if rec.r == r:
                return rec
        raise KeyError(r)

    def to_dict(self) -> dict:
        return _json_safe({
            "schema_version": self.schema_version,
            "source": self.source,
            "config": self.config,
            "law_moments": self.law_moments,
            "records": [asdict(rec) for rec in self.records],
            "trends": self.trends,
            "verdict": self.verdict,
            "runtime": self.runtime,
        })

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        a, b = self.to_dict(), other.to_dict()
        a.pop("runtime")
        b.pop("runtime")
        return a == b

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema_version')}")
        return cls(
            config=data["config"], law_moments=data["law_moments"],
            records=[RRecord(**_nan_back(rec)) for rec in data["records"]],
            trends=data["trends"], verdict=data["verdict"], runtime=data.get("runtime", 0.0),
            source=data.get("source", "simulator"),
        )

    def summary_lines(self) -> list:
        lines = []
        for rec in self.records:
            ks = " ".join(f"ks_{k}={v:.4f}" for k, v in sorted(rec.ks.items()))
            flags = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in sorted(rec.passes.items()))
            lines.append(f"r={rec.r} {ks} var1={rec.sample_var_col1:.4f} "
                         f"corr={rec.sample_corr:.4f} [{flags}]")
        for col, tr in self.trends.items():
            lines.append(f"trend {col}: {tr['kind']} values={tr['values']} "
                         f"holds={tr['holds']} enforced={tr['enforced']}")
        lines.append(f"verdict: {'PASS' if self.verdict else 'FAIL'}")
        return lines


def _fsum_mean_var(x: np.ndarray) -> tuple:
    n = x.size
    m = math.fsum(x) / n
    d = x - m
    return m, math.fsum(d * d) / (n - 1)


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    ma, mb = math.fsum(a) / a.size, math.fsum(b) / b.size
    da, db = a - ma, b - mb
    denom = math.sqrt(math.fsum(da * da) * math.fsum(db * db))
    return math.fsum(da * db) / denom if denom > 0 else float("nan")


def _batch_key(config: ExperimentConfig, r: int) -> str:
    return json.dumps([config.model, r, config.t, config.n, config.seed,
                       config.rel_tol, config.mode], sort_keys=True)


def _law_for(config: ExperimentConfig, model) -> LimitLaw:
    scheme = config.scheme_enum
    c_alpha = config.c_alpha
    if c_alpha is None and scheme in (Scheme.RV_DET_CENTER, Scheme.SLOW_DET_CENTER):
        c_alpha = model_c_alpha(model)
    return make_limit_law(scheme, model.gamma, c_alpha=c_alpha, t=config.t)


def evaluate_pairs(pairs: np.ndarray, law: LimitLaw, config: ExperimentConfig, i_r: int,
                   extra: Optional[dict] = None) -> RRecord:
    """Statistics and pass flags for one r-cell of normalized pairs."""
    r = config.r_grid[i_r]
    mom = law.moments()
    ks, thr, passes = {}, {}, {}
    for col in config.ks_columns():
        if col == "ratio":
            # col1 / col2 of NEG_DET_SCALE is exactly N_X in the limit
            value = ks_statistic(pairs[:, 0] / pairs[:, 1], ndtr)
        else:
            comp = int(col[-1])
            value = ks_statistic(pairs[:, comp - 1], lambda x, c=comp: law.marginal_cdf(c, x))
        ks[col] = value
        thr[col] = config.thresholds(col)[i_r]
        passes[f"ks_{col}"] = value <= thr[col]

    c1, c2 = pairs[:, 0], pairs[:, 1]
    has1 = not np.all(np.isnan(c1))
    m1, v1 = _fsum_mean_var(c1) if has1 else (float("nan"), float("nan"))
    m2, v2 = _fsum_mean_var(c2)
    corr = _corr(c1, c2) if has1 else float("nan")

    ch = config.checks
    if "var_col1" in ch:
        lo, hi = ch["var_col1"]
        passes["var_col1"] = lo <= v1 <= hi
    if "var_col2" in ch:
        lo, hi = ch["var_col2"]
        passes["var_col2"] = lo <= v2 <= hi
    if "var_col1_rel" in ch:
        passes["var_col1_rel"] = abs(v1 / mom["var1"] - 1.0) <= ch["var_col1_rel"]
    if "var_col2_rel" in ch:
        passes["var_col2_rel"] = abs(v2 / mom["var2"] - 1.0) <= ch["var_col2_rel"]
    if "corr" in ch:
        lo, hi = ch["corr"]
        passes["corr"] = lo <= corr <= hi
    if "abs_corr_max" in ch:
        passes["abs_corr_max"] = abs(corr) <= ch["abs_corr_max"]
    if "corr_abs_tol" in ch:
        passes["corr_abs_tol"] = abs(corr - mom["corr"]) <= ch["corr_abs_tol"]

    extra = extra or {}
    return RRecord(r=r, n=len(pairs), ks=ks, thresholds=thr,
                   sample_mean_col1=m1, sample_mean_col2=m2,
                   sample_var_col1=v1, sample_var_col2=v2, sample_corr=corr,
                   passes=passes, **extra)


def _trends(config: ExperimentConfig, records: list) -> dict:
    out = {}
    for col in config.ks_columns():
        values = [rec.ks[col] for rec in records]
        kind = config.trend.get(col, "non-increasing")
        if kind == "decreasing":
            holds = all(b < a for a, b in zip(values, values[1:]))
        else:
            holds = all(b <= a for a, b in zip(values, values[1:]))
        out[col] = {"kind": kind, "values": values, "holds": holds,
                    "enforced": col in config.trend}
    return out


def run_experiment(config: ExperimentConfig, source: str = "simulator",
                   cache: Optional[dict] = None, keep_samples: bool = False,
                   base_dir: Optional[Path] = None) -> ExperimentReport:
    """Run every r-cell of ``config`` and assemble the report.

    ``source="limit"`` bypasses the simulator and draws the pairs from the
    limit law itself (null calibration of the thresholds).  ``cache`` maps
    raw-batch keys to simulated batches so several schemes can share one
    simulation.
    """
    if source not in ("simulator", "limit"):
        raise ConfigError("source must be 'simulator' or 'limit'")
    start = time.perf_counter()
    model = model_from_spec(config.model, base_dir=base_dir)
    law = _law_for(config, model)

    records, samples = [], {}
    for i_r, r in enumerate(config.r_grid):
        extra = {}
        if source == "limit":
            pairs = law.sample(RngStream(config.seed, i_r), config.n)
        else:
            key = _batch_key(config, r)
            batch = cache.get(key) if cache is not None else None
            if batch is None:
                batch = simulate_batch(model, r, config.t, config.n, config.seed,
                                       rel_tol=config.rel_tol, mode=config.mode,
                                       threads=config.threads)
                if cache is not None:
                    cache[key] = batch
            pairs = normalize(batch, model, config.scheme_enum, c_alpha=law.c_alpha)
            extra = {"mean_truncation_index": float(np.mean(batch.truncation_index)),
                     "max_tail_sd_ratio": float(np.max(batch.tail_sd / batch.trimmed_x))}
        records.append(evaluate_pairs(pairs, law, config, i_r, extra))
        if keep_samples:
            samples[r] = pairs

    trends = _trends(config, records)
    verdict = records[-1].passed and all(t["holds"] for t in trends.values() if t["enforced"])
    return ExperimentReport(config=config.to_dict(), law_moments=law.moments(), records=records,
                            trends=trends, verdict=bool(verdict),
                            runtime=time.perf_counter() - start, source=source, samples=samples)


# -- serialization ------------------------------------------------------------

RECORD_COLUMNS = ("r", "n", "ks_col1", "ks_col2", "ks_ratio", "sample_mean_col1", "sample_mean_col2",
                  "sample_var_col1", "sample_var_col2", "sample_corr", "passed")
PLOT_COLUMNS = ("r", "component", "x", "empirical_cdf", "limit_cdf")


def _plot_rows(report: ExperimentReport):
    config = ExperimentConfig.from_dict(report.config)
    model = model_from_spec(config.model)
    law = _law_for(config, model)
    for r, pairs in sorted(report.samples.items()):
        for comp in law.components:
            x = np.sort(pairs[:, comp - 1])
            n = x.size
            ecdf = np.arange(1, n + 1) / n
            lim = np.asarray(law.marginal_cdf(comp, x))
            for xi, ei, li in zip(x, ecdf, lim):
                yield (r, comp, repr(float(xi)), repr(float(ei)), repr(float(li)))


def emit_report(report: ExperimentReport, fmt: str = "json") -> str:
    """Serialize a report as ``json``, per-r ``csv`` or ``plotdata`` CSV."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if fmt == "csv":
        writer.writerow(RECORD_COLUMNS)
        for rec in report.records:
            writer.writerow([rec.r, rec.n, rec.ks.get("col1", ""), rec.ks.get("col2", ""),
                             rec.ks.get("ratio", ""), rec.sample_mean_col1, rec.sample_mean_col2,
                             rec.sample_var_col1, rec.sample_var_col2, rec.sample_corr,
                             int(rec.passed)])
        return buf.getvalue()
    if fmt == "plotdata":
        if not report.samples:
            raise ValueError("plotdata needs a report run with keep_samples=True")
        writer.writerow(PLOT_COLUMNS)
        writer.writerows(_plot_rows(report))
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def load_report(text: str) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(text))
