import csv
import io
import json
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr, ndtri

from trimlevy.schemes import ConfigError
from trimlevy.simulate import RngStream
from trimlevy.verify import (ExperimentConfig, emit_report, ks_statistic, load_report,
                             run_experiment)


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def test_ks_hand_value():
    assert ks_statistic([0.25, 0.5, 0.75], uniform_cdf) == pytest.approx(0.25)


def test_ks_midpoint_quantiles():
    n = 257
    x = ndtri((2 * np.arange(1, n + 1) - 1) / (2 * n))
    assert ks_statistic(x, ndtr) == pytest.approx(1 / (2 * n), rel=1e-9)


def test_ks_unsorted_input_and_scipy_agreement():
    x = RngStream(4).generator().standard_normal(3000)
    assert ks_statistic(x, ndtr) == pytest.approx(stats.kstest(x, "norm").statistic, rel=1e-12)


def test_ks_empty():
    with pytest.raises(ValueError):
        ks_statistic([], ndtr)


def test_ks_null_frequency():
    bound = 1.36 / math.sqrt(1e5) * 1.5
    hits = sum(ks_statistic(RngStream(s).generator().standard_normal(100_000), ndtr) < bound
               for s in range(100))
    assert hits >= 99


def _config(**kw):
    base = dict(model={"model": "stable", "alpha": 0.5}, scheme="JOINT_RANDOM", r_grid=[60, 120],
                n=300, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("bad", [
    dict(r_grid=[100, 50]), dict(r_grid=[]), dict(n=50), dict(ks_threshold={"col1": -0.1}),
    dict(ks_threshold={"col3": 0.1}), dict(checks={"foo": 1}), dict(mode="exact"),
    dict(trend={"col1": "up"}), dict(ks_threshold={"ratio": 0.1}), dict(scheme="NOPE"),
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        _config(**bad)


def test_config_unknown_key_and_round_trip(tmp_path):
    c = _config(ks_threshold={"col1": [0.2, 0.1]})
    d = c.to_dict()
    assert d["schema_version"] == 1
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert ExperimentConfig.from_json(p) == c
    d["extra"] = 1
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(d)
    assert c.thresholds("col1") == [0.2, 0.1]
    assert c.thresholds("col2") == [1.36 / math.sqrt(300)] * 2


@pytest.fixture(scope="module")
def report():
    return run_experiment(_config(ks_threshold={"col1": 0.2, "col2": 0.2},
                                  checks={"abs_corr_max": 0.3}), keep_samples=True)


def test_report_contents(report):
    assert [rec.r for rec in report.records] == [60, 120]
    for rec in report.records:
        assert 0 <= rec.ks_col1 <= 1 and 0 <= rec.ks_col2 <= 1
        assert rec.n == 300
        assert rec.max_tail_sd_ratio <= 1e-4
    assert report.verdict == report.records[-1].passed
    assert report.config["scheme"] == "JOINT_RANDOM"


def test_report_matches_direct_ks(report):
    pairs = report.samples[120]
    assert report.record(120).ks_col1 == pytest.approx(stats.kstest(pairs[:, 0], "norm").statistic)


def test_json_round_trip(report):
    text = emit_report(report, "json")
    assert load_report(text) == report
    assert emit_report(load_report(text), "json") != "" and "NaN" not in text


def test_csv_and_plotdata(report):
    rows = list(csv.reader(io.StringIO(emit_report(report, "csv"))))
    assert len(rows) == 1 + 2
    plot = list(csv.DictReader(io.StringIO(emit_report(report, "plotdata"))))
    assert len(plot) == 2 * 300 * 2
    for r in (60, 120):
        for comp in ("1", "2"):
            sel = [row for row in plot if row["r"] == str(r) and row["component"] == comp]
            x = [float(row["x"]) for row in sel]
            e = [float(row["empirical_cdf"]) for row in sel]
            f = [float(row["limit_cdf"]) for row in sel]
            assert x == sorted(x)
            assert all(b >= a for a, b in zip(e, e[1:]))
            assert all(b >= a for a, b in zip(f, f[1:]))


def test_plotdata_needs_samples():
    rep = run_experiment(_config(r_grid=[60], n=100))
    with pytest.raises(ValueError):
        emit_report(rep, "plotdata")


def test_verdict_fails_on_enforced_trend():
    rep = run_experiment(_config(ks_threshold={"col1": 1.0, "col2": 1.0},
                                 trend={"col2": "decreasing"}), source="limit")
    vals = rep.trends["col2"]["values"]
    assert rep.trends["col2"]["holds"] == (vals[1] < vals[0])
    assert rep.verdict == rep.trends["col2"]["holds"]


def test_cache_shares_batches():
    cache = {}
    a = run_experiment(_config(r_grid=[60], n=100, scheme="COND_CLT"), cache=cache)
    assert len(cache) == 1
    b = run_experiment(_config(r_grid=[60], n=100, scheme="G0_DET_SCALE"), cache=cache)
    assert len(cache) == 1
    assert a.records[0].sample_mean_col2 == b.records[0].sample_mean_col2


def test_deterministic_reports():
    c = _config(r_grid=[60], n=100, mode="compensated")
    assert run_experiment(c) == run_experiment(c)


def test_limit_source_passes_null_thresholds():
    c = _config(scheme="RV_DET_CENTER", r_grid=[100], n=2000, seed=11,
                checks={"var_col1_rel": 0.15, "corr_abs_tol": 0.05})
    rep = run_experiment(c, source="limit")
    assert rep.law_moments["var1"] == 4.0
    assert rep.verdict
