import numpy as np
import pytest

from spectral_risk.backtest import run_backtest, turnover
from spectral_risk.market_data import ReturnPanel
from spectral_risk.optimizers import WeightVector
from spectral_risk.spectral import normalized_spectrum, rr_signal
from spectral_risk.strategies import Allocation, StrategySpec


def panel_from(values):
    values = np.asarray(values, dtype=float)
    return ReturnPanel(tuple(f"d{i:04d}" for i in range(len(values))),
                       tuple(f"A{j}" for j in range(values.shape[1])), values)


def random_panel(t=120, n=5, seed=0, vol=0.01):
    return panel_from(np.random.default_rng(seed).normal(0, vol, (t, n)))


def alloc(weights, exposure=1.0):
    return Allocation(WeightVector(np.asarray(weights, dtype=float)), exposure)


class TestTurnover:
    def test_identical_holdings(self):
        a = alloc([0.5, 0.5])
        assert turnover(a, np.zeros(2), a) == 0.0

    def test_full_switch(self):
        t = turnover(alloc([1, 0]), np.zeros(2), alloc([0, 1]))
        assert t == pytest.approx(2.0)
        assert 0.001 * t == pytest.approx(0.002)

    def test_exposure_cut(self):
        n = 4
        t = turnover(alloc(np.full(n, 1 / n)), np.zeros(n), alloc(np.full(n, 1 / n), 0.5))
        assert t == pytest.approx(1.0)

    def test_initial_purchase_from_cash(self):
        assert turnover(None, None, alloc([0.5, 0.5])) == pytest.approx(2.0)
        assert turnover(None, None, alloc([0.5, 0.5]), "half_l1") == pytest.approx(1.0)

    def test_drift_is_accounted(self):
        t = turnover(alloc([0.5, 0.5]), np.array([0.1, -0.1]), alloc([0.5, 0.5]))
        assert t == pytest.approx(0.1)

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            turnover(None, None, alloc([1.0]), "round_trip")


def drift_oracle(values, w, cost_rate):
    """Hand-rolled equal-weight rebalancing with full-L1 costs, written from scratch."""
    n = values.shape[1]
    target = [1.0 / n] * n
    held = [0.0] * n
    cash = 1.0
    nets = []
    for t in range(w, len(values)):
        trades = sum(abs(target[i] - held[i]) for i in range(n)) + abs(0.0 - cash)
        cost = cost_rate * trades
        gross = sum(target[i] * values[t][i] for i in range(n))
        nets.append(gross - cost)
        grown = [target[i] * (1 + values[t][i]) for i in range(n)]
        total = sum(grown)
        held = [g / total for g in grown]
        cash = 0.0
    return np.array(nets)


def test_zero_returns():
    res = run_backtest(panel_from(np.zeros((30, 3)) + 0.0), [0, 1, 2], StrategySpec("one_over_n"), 10, 0.0)
    assert np.all(res.gross == 0)
    assert np.all(res.wealth == 1.0)


def test_zero_returns_turnover_only_on_day_one():
    # all-zero windows have no spectrum, so use one_over_n
    res = run_backtest(panel_from(np.zeros((30, 3))), [0, 1, 2], StrategySpec("one_over_n"), 10, 0.001)
    assert res.cost[0] == pytest.approx(0.002)
    assert np.all(res.cost[1:] == 0)


def test_single_asset():
    p = random_panel(60, 1)
    res = run_backtest(p, [0], StrategySpec("one_over_n"), 20, 0.001)
    expected = p.values[20:, 0].copy()
    expected[0] -= 0.002
    np.testing.assert_allclose(res.net, expected, atol=1e-15)


def test_alternating_returns_cost():
    vals = np.array([[0.1, -0.1], [-0.1, 0.1]] * 20)
    res = run_backtest(panel_from(vals), [0, 1], StrategySpec("one_over_n"), 4, 0.001)
    np.testing.assert_allclose(res.cost[1:], 1e-4, rtol=1e-9)
    np.testing.assert_allclose(res.net, drift_oracle(vals, 4, 0.001), atol=1e-15)


def test_matches_drift_oracle_on_random_data():
    p = random_panel(80, 4, seed=3)
    res = run_backtest(p, [0, 1, 2, 3], StrategySpec("one_over_n"), 10, 0.001)
    np.testing.assert_allclose(res.net, drift_oracle(p.values, 10, 0.001), atol=1e-14)


def test_buy_and_hold_closed_form():
    p = random_panel(100, 3, seed=4)
    res = run_backtest(p, [0, 1, 2], StrategySpec("one_over_n"), 10, 0.0)
    closed = np.prod(1 + p.values[10:] @ np.full(3, 1 / 3))
    assert res.wealth[-1] == pytest.approx(closed, rel=1e-12)


def test_record_invariants():
    res = run_backtest(random_panel(), [0, 2, 4], StrategySpec("rr"), 20, 0.001)
    for rec in res.records:
        assert rec.net_return == pytest.approx(rec.gross_return - rec.cost, abs=1e-12)
        assert rec.cost >= 0
    assert len(res.records) == 100
    assert res.days[0] == 20


def test_rr_gross_equals_one_over_n_when_calm():
    p = random_panel(200, 6, seed=5)
    u = list(range(6))
    rr = run_backtest(p, u, StrategySpec("rr"), 20, 0.001)
    base = run_backtest(p, u, StrategySpec("one_over_n"), 20, 0.001)
    sig = [rr_signal(normalized_spectrum(p.values[t - 20 : t])) for t in range(20, 200)]
    for i in range(1, len(sig)):
        if not sig[i] and not sig[i - 1]:
            assert rr.gross[i] == base.gross[i]


def test_cost_does_not_change_risk_shape():
    p = random_panel(300, 5, seed=6)
    u = list(range(5))
    with_cost = run_backtest(p, u, StrategySpec("rr"), 20, 0.001)
    free = run_backtest(p, u, StrategySpec("rr"), 20, 0.0)
    np.testing.assert_allclose(free.net - with_cost.net, with_cost.cost, atol=1e-15)
    assert abs(np.std(free.net, ddof=1) - np.std(with_cost.net, ddof=1)) < with_cost.cost.mean()


def test_random_control_matches_rr_count():
    p = random_panel(200, 5, seed=7, vol=0.01)
    # crash block so RR actually fires
    vals = p.values.copy()
    vals[100:140] = np.random.default_rng(1).normal(-0.003, 0.03, (40, 1)) + 0.0005 * vals[100:140]
    p = panel_from(vals)
    u = list(range(5))
    rr = run_backtest(p, u, StrategySpec("rr"), 20, 0.001)
    ctrl = run_backtest(p, u, StrategySpec("random_control"), 20, 0.001, np.random.default_rng(3))
    assert rr.reduced_days > 0
    assert ctrl.reduced_days == rr.reduced_days
    with pytest.raises(ValueError):
        run_backtest(p, u, StrategySpec("random_control"), 20, 0.001)


def test_deterministic():
    p = random_panel(150, 4, seed=8)
    a = run_backtest(p, [0, 1, 2, 3], StrategySpec("random_control"), 20, 0.001, np.random.default_rng(1))
    b = run_backtest(p, [0, 1, 2, 3], StrategySpec("random_control"), 20, 0.001, np.random.default_rng(1))
    np.testing.assert_array_equal(a.net, b.net)
    np.testing.assert_array_equal(a.exposure, b.exposure)


def test_wipeout_aborts():
    vals = np.full((30, 2), 0.01)
    vals[15] = [-1.0, -1.0]
    res = run_backtest(panel_from(vals), [0, 1], StrategySpec("one_over_n"), 5, 0.001)
    assert res.wipeout
    assert len(res.net) == 11


def test_too_short_panel():
    with pytest.raises(ValueError):
        run_backtest(random_panel(20, 3), [0, 1, 2], StrategySpec("one_over_n"), 20, 0.001)
