import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from spectral_risk.metrics import (
    DegenerateSeriesError,
    conditional_value_at_risk,
    max_drawdown,
    summarize,
    value_at_risk,
)

returns_lists = st.lists(st.floats(-0.5, 0.5, allow_nan=False), min_size=4, max_size=200)


def mdd_bruteforce(r):
    wealth = np.concatenate([[1.0], np.cumprod(1 + np.asarray(r))])
    worst = 0.0
    for t in range(len(wealth)):
        for s in range(t + 1):
            worst = max(worst, 1 - wealth[t] / wealth[s])
    return worst


def test_constant_series_has_no_sharpe():
    r = np.full(250, 0.001)
    assert r.mean() == pytest.approx(0.001)
    assert r.std(ddof=1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateSeriesError):
        summarize(r)


def test_too_short():
    with pytest.raises(ValueError):
        summarize([0.01, -0.01, 0.02])


def test_linear_losses_tail():
    r = -0.01 * np.arange(1, 101)
    m = summarize(r, alpha=0.01)
    assert m.var_1 == pytest.approx(1.0)
    assert m.cvar_1 == pytest.approx(1.0)


def test_tail_with_several_scenarios():
    r = np.array([-0.05, -0.04, -0.03, 0.0, 0.01, 0.02, 0.0, 0.01, 0.0, 0.02])
    # k = ceil(0.2 * 10) = 2
    assert value_at_risk(r, 0.2) == pytest.approx(0.04)
    assert conditional_value_at_risk(r, 0.2) == pytest.approx(0.045)


def test_moment_conventions():
    r = np.array([0.01, -0.02, 0.03, 0.0, 0.015, -0.005])
    m = summarize(r)
    c = r - r.mean()
    assert m.st_dev == pytest.approx(np.sqrt(np.sum(c**2) / 5))
    assert m.sr == pytest.approx(r.mean() / m.st_dev)
    assert m.sk == pytest.approx(np.mean(c**3) / np.mean(c**2) ** 1.5)
    assert m.k == pytest.approx(np.mean(c**4) / np.mean(c**2) ** 2)


def test_gaussian_moments():
    r = np.random.default_rng(2024).normal(0, 0.01, 1_000_000)
    m = summarize(r)
    assert abs(m.sk) <= 0.01
    assert abs(m.k - 3) <= 0.02


class TestMaxDrawdown:
    def test_no_losses(self):
        assert max_drawdown([0.0, 0.01, 0.02]) == 0.0

    def test_hand_example(self):
        assert max_drawdown([0.1, -0.5, 0.2]) == pytest.approx(0.5)

    def test_single_loss(self):
        assert max_drawdown([-0.2]) == pytest.approx(0.2)

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            r = rng.normal(0, 0.05, rng.integers(1, 80))
            assert max_drawdown(r) == pytest.approx(mdd_bruteforce(r), abs=1e-12)

    def test_path_dependence(self):
        a = [0.1, -0.1, 0.1, -0.1]
        b = [0.1, 0.1, -0.1, -0.1]
        for field in ("a_r", "st_dev", "var_1", "cvar_1", "sk", "k"):
            assert getattr(summarize(a), field) == pytest.approx(getattr(summarize(b), field))
        assert max_drawdown(a) != pytest.approx(max_drawdown(b))


@settings(max_examples=200, deadline=None)
@given(returns_lists, st.floats(0.01, 0.5))
def test_cvar_dominates_var(r, alpha):
    assert conditional_value_at_risk(r, alpha) >= value_at_risk(r, alpha) - 1e-15


@settings(max_examples=100, deadline=None)
@given(returns_lists, st.floats(0.05, 1.0))
def test_leverage_homogeneity(r, lam):
    r = np.asarray(r)
    assume(np.std(r) > 1e-6)
    base, scaled = summarize(r), summarize(lam * r)
    for field in ("a_r", "st_dev", "var_1", "cvar_1"):
        assert getattr(scaled, field) == pytest.approx(lam * getattr(base, field), rel=1e-9, abs=1e-15)
    assert scaled.sr == pytest.approx(base.sr, rel=1e-9, abs=1e-12)
    assert scaled.mdd <= base.mdd + 1e-12


def test_mdd_not_linear_in_leverage():
    r = [0.1, -0.5, 0.2]
    assert max_drawdown(np.multiply(0.5, r)) == pytest.approx(0.25)
    r2 = [-0.3, -0.3]
    # full leverage: 1 - 0.7^2 = 0.51; half leverage: 1 - 0.85^2 = 0.2775, more than half of 0.51
    assert max_drawdown(np.multiply(0.5, r2)) == pytest.approx(0.2775)
    assert max_drawdown(np.multiply(0.5, r2)) > 0.5 * max_drawdown(r2)


def test_permutation_invariance_of_moments():
    rng = np.random.default_rng(4)
    r = rng.normal(0, 0.02, 300)
    a, b = summarize(r), summarize(rng.permutation(r))
    for field in ("a_r", "st_dev", "sr", "var_1", "cvar_1", "sk", "k"):
        assert getattr(a, field) == pytest.approx(getattr(b, field), rel=1e-9)
