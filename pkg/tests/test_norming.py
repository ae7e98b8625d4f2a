import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from trimlevy import DomainError, LogPowerModel, SlowTailModel, StableModel
from trimlevy.moments import truncated_moment
from trimlevy.norming import (DeHaanDiagnostics, H, H_inverse, dehaan_v_check, dehaan_v_limit,
                              empirical_h, h_fn, h_inverse_fn, norming_sequences)


def test_h_values():
    assert h_fn(0.0, 1.5) == 3.0
    assert h_fn(0.0, 0.0) == 0.0
    assert h_fn(-1.0, 1.0) == pytest.approx(2 * math.log(2), rel=1e-15)


def test_h_inverse_values():
    assert h_inverse_fn(0.0, 3.0) == 1.5
    for g in (0.0, -0.3, -1.0, -4.0):
        assert h_inverse_fn(g, 0.0) == 0.0
    assert h_inverse_fn(-1.0, 1.0) == pytest.approx(math.exp(0.5) - 1, rel=1e-15)


def test_h_domain():
    with pytest.raises(DomainError):
        h_fn(-1.0, -1.0)          # 1 - gamma x = 0
    with pytest.raises(DomainError):
        h_fn(-2.0, -0.7)
    with pytest.raises(DomainError):
        h_fn(0.5, 0.1)


@settings(max_examples=100, deadline=None)
@given(g=st.floats(-5.0, 0.0), y=st.floats(-30.0, 30.0))
def test_h_round_trip(g, y):
    # near the lower edge of R_gamma, 1 - gamma x cancels; keep to the well-conditioned range
    assume(abs(g * y) / 2 <= 10)
    x = h_inverse_fn(g, y)
    assert h_fn(g, x) == pytest.approx(y, rel=1e-10, abs=1e-12)


def test_norming_stable():
    ns = norming_sequences(StableModel(0.5), 100)
    assert ns.b_r == pytest.approx(1e-4, rel=1e-15)
    exact = 2 * (90.0 ** -2 - 100.0 ** -2)
    assert ns.a_r == pytest.approx(exact, rel=1e-12)
    assert ns.a_r == pytest.approx(4.69136e-5, rel=1e-5)
    # asymptotic 2 r^(-1/alpha - 1/2) / alpha = 4e-5, gap about 1.5/sqrt(r)
    assert abs(ns.a_r / 4e-5 - 1) < 0.2
    assert ns.regime == 0


def test_norming_logpower():
    ns = norming_sequences(LogPowerModel(-1.0), 100)
    assert ns.b_r == pytest.approx(math.exp(-10), rel=1e-14)
    assert ns.a_r == pytest.approx(math.exp(-10), rel=1e-14)
    ns2 = norming_sequences(LogPowerModel(-2.0), 100)
    assert ns2.a_r == pytest.approx(2 * ns2.b_r, rel=1e-14)


def test_norming_underflow_safe():
    # b_r = exp(-sqrt(1e7)) underflows to 0; the log scale keeps it
    ns = norming_sequences(LogPowerModel(-1.0), 1e7)
    assert ns.log_b == pytest.approx(-math.sqrt(1e7), rel=1e-14)


def test_norming_domain():
    for r in (1.0, 0.5, -3.0):
        with pytest.raises(DomainError):
            norming_sequences(StableModel(0.5), r)


def test_a_over_b_vanishes_at_gamma_zero():
    m = SlowTailModel()
    ratios = [norming_sequences(m, r).a_r / norming_sequences(m, r).b_r for r in (1e2, 1e4, 1e6)]
    assert ratios[0] > ratios[1] > ratios[2]


def test_empirical_h():
    m = StableModel(0.5)
    for r in (10.0, 1e3, 1e6):
        assert empirical_h(m, r, 0.0) == pytest.approx(0.0, abs=1e-9 * math.sqrt(r))
    assert abs(empirical_h(m, 1e6, 1.0) - 2.0) < 0.01
    lp = LogPowerModel(-1.0)
    assert abs(empirical_h(lp, 1e6, 0.5) - h_fn(-1.0, 0.5)) < 0.01
    assert h_fn(-1.0, 0.5) == pytest.approx(2 * math.log(1.5))
    with pytest.raises(DomainError):
        empirical_h(lp, 100.0, -2.0)


def test_H_inverse_identity():
    y = np.logspace(0, 200, 50)
    assert np.allclose(H(H_inverse(y)), y, rtol=1e-10)


def test_V_non_increasing():
    d = DeHaanDiagnostics(StableModel(0.5))
    lv = d.log_V(np.linspace(0.5, 500, 200))
    assert np.all(np.diff(lv) <= 0)


@pytest.mark.parametrize("model", [StableModel(0.5), LogPowerModel(-1.0), SlowTailModel()])
def test_pi_p_matches_truncated_moment(model):
    # int_0^x u^p Pi(du) = pi_p(H(tail(x)))
    d = DeHaanDiagnostics(model)
    for x in (1e-3, 0.05):
        for p in (1.0, 2.0):
            log_t = 2 * math.sqrt(float(model.tail(x)))
            assert d.pi_p(p, log_t=log_t) == pytest.approx(truncated_moment(model, p, x).value,
                                                          rel=1e-8)


def test_dehaan_v_check():
    assert dehaan_v_check(StableModel(0.5), 1.0, 50.0) == 0.0
    v = dehaan_v_check(StableModel(0.5), math.e ** 2, 2000.0)
    assert v == pytest.approx(dehaan_v_limit(0.0, math.e ** 2), rel=0.02)
    assert dehaan_v_limit(0.0, math.e ** 2) == pytest.approx(-1.0)
    # gamma = -1, x = 4: -(1/2)(4**(-1/2) - 1)/(-1/2) = -1/2
    lp = dehaan_v_check(LogPowerModel(-1.0), 4.0, 2000.0)
    assert lp == pytest.approx(dehaan_v_limit(-1.0, 4.0), rel=0.02)
    assert dehaan_v_limit(-1.0, 4.0) == pytest.approx(-0.5)
