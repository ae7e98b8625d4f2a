import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from trimlevy.limit_laws import delta_limit_cdf, limit_sample, make_limit_law, marginal_quantile
from trimlevy.norming import h_fn, h_inverse_fn
from trimlevy.schemes import ConfigError, Scheme
from trimlevy.simulate import RngStream
from trimlevy.verify import ks_statistic

LAWS = [
    ("COND_CLT", 0.0, None), ("JOINT_RANDOM", -0.7, None), ("DELTA_ONLY", -1.0, None),
    ("NEG_DET_SCALE", -1.0, None), ("NEG_DET_CENTER", -1.0, None), ("G0_DET_SCALE", 0.0, None),
    ("RV_DET_CENTER", 0.0, 1 / 3), ("SLOW_DET_CENTER", 0.0, 0.0),
]


def test_delta_limit_cdf_values():
    assert delta_limit_cdf(0.0, 0.0) == 0.5
    assert delta_limit_cdf(0.0, 0.5) == pytest.approx(0.841345, abs=1e-6)
    assert delta_limit_cdf(0.0, 0.5, t=4.0) == pytest.approx(0.977250, abs=1e-6)
    assert delta_limit_cdf(-1.0, -1.0) == 0.0
    assert delta_limit_cdf(-1.0, -5.0) == 0.0


def test_delta_representation_identity():
    # P(h^{-1}(N) <= x) = Phi(h(x)) at 100 probe points
    for g in (0.0, -0.5, -2.0):
        lo = -1 / abs(g) + 1e-6 if g else -3.0
        x = np.linspace(lo, 4.0, 100)
        # h^{-1} is increasing, so P(h^{-1}(N) <= x) = P(N <= h(x))
        assert np.allclose(delta_limit_cdf(g, x), ndtr(h_fn(g, x)), atol=1e-15)
        assert np.allclose(h_inverse_fn(g, h_fn(g, x)), x, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("scheme,gamma,c", LAWS)
def test_self_consistency_ks(scheme, gamma, c):
    law = make_limit_law(scheme, gamma, c_alpha=c)
    draws = law.sample(RngStream(99), 100_000)
    bound = 1.36 / math.sqrt(100_000) * 1.5
    for comp in law.components:
        assert ks_statistic(draws[:, comp - 1], lambda x: law.marginal_cdf(comp, x)) <= bound


@pytest.mark.parametrize("scheme,gamma,c", LAWS)
def test_declared_moments_match_sampler(scheme, gamma, c):
    law = make_limit_law(scheme, gamma, c_alpha=c)
    d = law.sample(RngStream(7), 200_000)
    mom = law.moments()
    for k, comp in ((1, 0), (2, 1)):
        if math.isnan(mom[f"var{k}"]):
            continue
        x = d[:, comp]
        assert x.mean() == pytest.approx(mom[f"mean{k}"], abs=5 * x.std() / math.sqrt(x.size))
        assert x.var() == pytest.approx(mom[f"var{k}"], rel=0.05)
    if not math.isnan(mom["corr"]):
        assert np.corrcoef(d[:, 0], d[:, 1])[0, 1] == pytest.approx(mom["corr"], abs=0.02)


def test_rv_variance_and_correlation():
    law = make_limit_law("RV_DET_CENTER", 0.0, c_alpha=1 / 3)
    mom = law.moments()
    assert mom["var1"] == 4.0
    assert mom["corr"] == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    assert law.marginal_cdf(1, 2.0) == pytest.approx(ndtr(1.0), rel=1e-15)


def test_neg_det_scale_lognormal_marginal():
    law = make_limit_law("NEG_DET_SCALE", -1.0)
    d = law.sample(RngStream(3), 100_000)
    logs = np.log(d[:, 1])
    assert stats.kstest(logs, stats.norm(scale=0.5).cdf).pvalue > 1e-3
    # col1 / col2 recovers N_X exactly
    assert stats.kstest(d[:, 0] / d[:, 1], "norm").pvalue > 1e-3


def test_neg_det_scale_correlation_vs_brute_force():
    # 1e7-draw brute-force oracle computed in chunks without the library
    rng = np.random.default_rng(12345)
    sxy = sx = sy = sxx = syy = 0.0
    n = 0
    for _ in range(10):
        nx, ng = rng.standard_normal((2, 1_000_000))
        e = np.exp(-ng / 2)
        x, y = nx * e, e
        sx += x.sum(); sy += y.sum(); sxy += (x * y).sum()
        sxx += (x * x).sum(); syy += (y * y).sum(); n += x.size
    cov = sxy / n - sx / n * sy / n
    oracle = cov / math.sqrt((sxx / n - (sx / n) ** 2) * (syy / n - (sy / n) ** 2))
    law = make_limit_law("NEG_DET_SCALE", -1.0)
    d = limit_sample(law, RngStream(8), 100_000)
    assert np.corrcoef(d[:, 0], d[:, 1])[0, 1] == pytest.approx(oracle, abs=0.02)
    assert law.moments()["corr"] == pytest.approx(oracle, abs=0.005)


def test_neg_det_center_variance_oracle():
    # 4 (e^{1/2} - e^{1/4}) for gamma = -1
    law = make_limit_law("NEG_DET_CENTER", -1.0)
    assert law.moments()["var1"] == pytest.approx(4 * (math.exp(0.5) - math.exp(0.25)), rel=1e-14)
    assert law.moments()["var1"] == pytest.approx(1.4588, abs=1e-4)


def test_g0_independent():
    law = make_limit_law("G0_DET_SCALE", 0.0)
    d = law.sample(RngStream(17), 100_000)
    assert abs(np.corrcoef(d[:, 0], d[:, 1])[0, 1]) < 0.01
    assert d[:, 1].std() == pytest.approx(0.5, rel=0.01)


def test_marginal_cdf_monotone_bounded():
    for scheme, g, c in LAWS:
        law = make_limit_law(scheme, g, c_alpha=c)
        x = np.linspace(-20, 20, 2001)
        for comp in law.components:
            F = law.marginal_cdf(comp, x)
            assert np.all(np.diff(F) >= -1e-15)
            assert np.all((F >= 0) & (F <= 1 + 1e-12))


def test_quantile_inverts_cdf():
    law = make_limit_law("NEG_DET_SCALE", -1.0)
    p = np.array([0.01, 0.3, 0.5, 0.97])
    for comp in (1, 2):
        q = marginal_quantile(law, comp, p)
        assert np.allclose(law.marginal_cdf(comp, q), p, atol=1e-12)


def test_reproducible_and_errors():
    law = make_limit_law("JOINT_RANDOM", 0.0)
    assert np.array_equal(law.sample(RngStream(1), 10), law.sample(RngStream(1), 10))
    with pytest.raises(ConfigError):
        make_limit_law("RV_DET_CENTER", -1.0, c_alpha=0.3)
    with pytest.raises(ConfigError):
        make_limit_law("RV_DET_CENTER", 0.0)
    with pytest.raises(ConfigError):
        make_limit_law("DELTA_ONLY", 0.0).marginal_cdf(1, 0.0)
    assert make_limit_law("DELTA_ONLY", 0.0, t=4.0).scheme is Scheme.DELTA_ONLY
