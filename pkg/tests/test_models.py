import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trimlevy import (DomainError, LogPowerModel, ModelError, SlowTailModel, StableModel,
                      TabulatedModel, model_from_spec, validate_model)


def test_stable_tail_and_inverse():
    m = StableModel(0.5)
    assert m.tail(0.25) == pytest.approx(2.0, rel=1e-15)
    assert m.tail_inverse(4.0) == pytest.approx(1 / 16, rel=1e-15)
    assert m.gamma == 0
    assert m.c_alpha == pytest.approx(1 / 3, rel=1e-15)


def test_logpower_boundary_and_inverse():
    m = LogPowerModel(-1.0)
    assert m.tail(1.0) == 0.0
    assert m.tail(5.0) == 0.0
    assert m.tail_inverse(100.0) == pytest.approx(math.exp(-10), rel=1e-14)
    assert m.tail(m.tail_inverse(100.0)) == pytest.approx(100.0, rel=1e-12)


def test_slowtail_value():
    assert SlowTailModel().tail(math.exp(-2)) == pytest.approx(16.0, rel=1e-14)


@pytest.mark.parametrize("fn", ["tail", "tail_inverse", "log_tail_inverse"])
@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_domain_errors(fn, bad):
    with pytest.raises(DomainError):
        getattr(StableModel(0.5), fn)(bad)


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(0.05, 0.95), x=st.floats(1e-12, 1e6))
def test_stable_round_trip(alpha, x):
    m = StableModel(alpha)
    assert m.tail_inverse(m.tail(x)) == pytest.approx(x, rel=1e-11)


@settings(max_examples=60, deadline=None)
@given(gamma=st.floats(-3.0, -0.1), y=st.floats(1e-3, 1e8))
def test_logpower_round_trip_on_log_scale(gamma, y):
    m = LogPowerModel(gamma)
    back = m.tail_at_log(m.log_tail_inverse(y))
    assert back == pytest.approx(y, rel=1e-10)


def test_tail_at_log_beyond_underflow():
    # exp(-2000) underflows; the log path must not
    m = SlowTailModel()
    assert m.tail_at_log(-2000.0) == pytest.approx(2000.0 ** 4, rel=1e-14)


def test_vectorized_shapes():
    m = StableModel(0.5)
    x = np.array([[0.25, 1.0], [4.0, 9.0]])
    assert m.tail(x).shape == (2, 2)
    assert isinstance(m.tail(0.25), float)


def test_validate_builtins_pass():
    for m in (StableModel(0.5), LogPowerModel(-1.0), SlowTailModel()):
        rep = validate_model(m)
        assert rep.passed, rep.issues
    assert validate_model(StableModel(0.5)).gamma == 0


def test_validate_rejects_positive_gamma():
    grid = np.logspace(-8, 0, 50)
    m = TabulatedModel(grid, grid ** -0.5, gamma=1.0, extrapolate=True)
    rep = validate_model(m)
    assert not rep.passed
    assert "gamma-positive" in rep.codes()


def test_validate_rejects_finite_activity():
    grid = np.logspace(-8, 0, 50)
    m = TabulatedModel(grid, 2.0 - grid, extrapolate=True)   # bounded at 0
    assert "finite-activity" in validate_model(m).codes()


def test_tabulated_rejects_flat_segment():
    with pytest.raises(ModelError):
        TabulatedModel([0.1, 0.2, 0.3], [5.0, 5.0, 1.0])


def test_tabulated_rejects_repeated_x():
    with pytest.raises(ModelError):
        TabulatedModel([0.1, 0.1, 0.3], [5.0, 4.0, 1.0])


def test_tabulated_matches_stable_and_refuses_extrapolation():
    grid = np.logspace(-10, 2, 200)
    m = TabulatedModel(grid, grid ** -0.5)
    x = np.logspace(-9, 1, 37)
    assert np.allclose(m.tail(x), x ** -0.5, rtol=1e-10)
    assert np.allclose(m.tail_inverse(m.tail(x)), x, rtol=1e-9)
    with pytest.raises(DomainError):
        m.tail(1e-12)
    with pytest.raises(DomainError):
        m.tail_inverse(1e-3)
    ext = TabulatedModel(grid, grid ** -0.5, extrapolate=True)
    assert ext.tail(1e-12) == pytest.approx(1e6, rel=1e-9)


def test_tabulated_csv(tmp_path):
    p = tmp_path / "grid.csv"
    grid = np.logspace(-6, 1, 30)
    p.write_text("x,tail\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(grid.tolist(), (grid ** -0.5).tolist())))
    m = model_from_spec({"model": "tabulated", "path": "grid.csv"}, base_dir=tmp_path)
    assert m.tail(1e-4) == pytest.approx(100.0, rel=1e-9)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ModelError):
        TabulatedModel.from_csv(bad)
    garbled = tmp_path / "garbled.csv"
    garbled.write_text("x,tail\n0.1,abc\n")
    with pytest.raises(ModelError):
        TabulatedModel.from_csv(garbled)


def test_model_from_spec_unknown():
    with pytest.raises(ModelError):
        model_from_spec({"model": "nope"})
