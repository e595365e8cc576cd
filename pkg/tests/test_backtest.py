import math

import numpy as np
import pytest

from oracles import max_drawdown_bruteforce, objective_loop
from statarb.backtest import (
    BacktestConfig,
    BacktestResult,
    BustError,
    EvaluationWindowError,
    compute_metrics,
    holding_cost,
    init_cash,
    max_drawdown,
    run,
    transaction_cost,
    write_metrics,
    write_report,
)
from statarb.ccp import FinderConfig, FixedBand, MovingBand, StatArb, find_stat_arbs
from statarb.market_data import PriceMatrix, SpreadMatrix

FRICTIONLESS = dict(relative_spread=0.0, shorting_rate=0.0, nav_floor_fraction=0.0)


def panel(prices, start=0):
    prices = np.asarray(prices, dtype=float)
    if prices.ndim == 1:
        prices = prices[:, None]
    return PriceMatrix([f"2020-{start + i:04d}" for i in range(prices.shape[0])],
                       [f"A{i}" for i in range(prices.shape[1])], prices)


def statarb(assets, shares, band):
    return StatArb(tuple(assets), np.asarray(shares, float), band, "x", "y", 1.0, 1.0)


def test_init_cash():
    assert init_cash([1, -1], [10, 10], 0.5) == 10.0
    assert init_cash([1, -1], [10, 10], 0.0) == 0.0
    rng = np.random.default_rng(0)
    s, p0 = rng.normal(size=7), rng.uniform(1, 50, 7)
    expected = 0.0
    for a, b in zip(s, p0):
        expected += abs(a) * b
    assert abs(init_cash(s, p0, 0.7) - 0.7 * expected) <= 1e-12 * expected


def test_transaction_cost():
    assert transaction_cost([0, 0], [10, 10], [0.05, 0.05]) == 0.0
    assert transaction_cost([2], [10], [0.05]) == pytest.approx(0.10)
    rng = np.random.default_rng(1)
    for _ in range(20):
        d, mid, half = rng.normal(size=5) * 10, rng.uniform(1, 100, 5), rng.uniform(0, 0.5, 5)
        exec_price = np.where(d > 0, mid + half, mid - half)
        cash_exec = -float(d @ exec_price)
        cash_mid = -float(d @ mid)
        assert transaction_cost(d, mid, half) == pytest.approx(cash_mid - cash_exec, abs=1e-12 * 1e3)


def test_holding_cost():
    assert holding_cost([5, 2], [10, 10], 0.005) == 0.0
    assert holding_cost([-100], [10], 0.005, 250) == pytest.approx(0.02)
    h, p = np.array([3.0, -2.0, -0.5, 4.0]), np.array([10.0, 20.0, 30.0, 40.0])
    expected = sum(-hi * pi for hi, pi in zip(h, p) if hi < 0) * 0.01 / 250
    assert holding_cost(h, p, 0.01) == pytest.approx(expected, rel=1e-12)


def test_profit_identity_hand_example():
    mu = 2.0
    pm = panel([5.0, mu - 1, mu + 1, mu - 1])
    sa = statarb(["A0"], [1.0], FixedBand(mu))
    cfg = BacktestConfig(nu=10, t_max=2, t_exit=1, **FRICTIONLESS)
    res = run(sa, pm, cfg)
    assert compute_metrics(res).profit == pytest.approx(4.0, abs=1e-12)
    assert res.q.tolist() == [1.0, -1.0, 0.0]


def test_profit_identity_on_training_window(coint_panel):
    lo, hi = 1, 301
    arbs = find_stat_arbs(coint_panel, FinderConfig(leverage_limit=10, n_initializations=4),
                          coint_panel.dates[lo], coint_panel.dates[hi - 1])
    assert arbs
    for sa in arbs:
        p = sa.portfolio_prices(coint_panel)[lo:hi]
        mu = sa.band.midpoint
        cfg = BacktestConfig(nu=1.0, t_max=hi - lo - 1, t_exit=1, **FRICTIONLESS)
        m = compute_metrics(run(sa, coint_panel, cfg, coint_panel.dates[lo]))
        expected = 0.5 * objective_loop(p) + ((p[0] - mu) ** 2 - (p[-1] - mu) ** 2) / 2
        assert abs(m.profit - expected) <= 1e-9


def test_constant_price_loses_only_costs():
    pm = panel(np.full((30, 2), 10.0))
    sa = statarb(["A0", "A1"], [1.0, -1.0], FixedBand(0.5))
    res = run(sa, pm, BacktestConfig(t_max=10, t_exit=5, nav_floor_fraction=0.0))
    pre = res.q[:10]
    assert np.all(pre == pre[0]) and pre[0] == 0.5
    m = compute_metrics(res)
    assert m.profit == pytest.approx(-res.cost.sum(), abs=1e-12)
    assert m.profit < 0


def test_nav_floor_terminates_and_flattens():
    # long one unit at 9 on cash 5; price 6 gives V = 2 < 2.5 but still positive
    prices = [10.0, 9.0] + [6.0] * 10
    pm = panel(prices)
    sa = statarb(["A0"], [1.0], FixedBand(10.0))
    res = run(sa, pm, BacktestConfig(nu=0.5, t_max=8, t_exit=2, relative_spread=0.0))
    assert res.terminated_early
    k = res.dates.index(res.termination_date)
    assert np.all(res.q[k:] == 0.0)
    assert np.any(res.nav[:k] < 0.5 * res.initial_cash)


def test_bust_raises_with_partial_result():
    prices = [10.0, 9.0, 1.0, 1.0, 1.0]
    pm = panel(prices)
    sa = statarb(["A0"], [1.0], FixedBand(30.0))
    with pytest.raises(BustError) as exc:
        run(sa, pm, BacktestConfig(nu=0.5, t_max=3, t_exit=1, nav_floor_fraction=0.0))
    assert exc.value.result.n_days >= 1


def test_evaluation_window_past_end():
    pm = panel(np.full(5, 10.0))
    sa = statarb(["A0"], [1.0], FixedBand(10.0))
    with pytest.raises(EvaluationWindowError):
        run(sa, pm, BacktestConfig(t_max=10, t_exit=2))
    with pytest.raises(EvaluationWindowError):
        run(sa, pm, BacktestConfig(t_max=1, t_exit=1), start=pm.dates[0])


def test_moving_band_backtest_uses_prior_prices():
    rng = np.random.default_rng(0)
    prices = 10 + rng.normal(size=(40, 1))
    pm = panel(prices)
    sa = statarb(["A0"], [1.0], MovingBand(5))
    res = run(sa, pm, BacktestConfig(t_max=8, t_exit=2, **FRICTIONLESS), start=pm.dates[10])
    p = prices[:, 0]
    assert res.q[0] == pytest.approx(p[6:11].mean() - p[10])
    assert res.q[3] == pytest.approx(p[9:14].mean() - p[13])
    assert res.p0 == p[9]


def test_spreads_panel_is_used():
    pm = panel(np.full((6, 1), 10.0))
    sp = SpreadMatrix(pm.dates, pm.assets, np.full((6, 1), 0.2))
    sa = statarb(["A0"], [2.0], FixedBand(21.0))
    res = run(sa, pm, BacktestConfig(t_max=2, t_exit=1, spreads=sp, shorting_rate=0.0, nav_floor_fraction=0.0))
    # enter q=1 (2 shares) then exit: 4 shares traded at half-spread 0.1
    assert res.cost.sum() == pytest.approx(0.4)


def ledger_residual(res: BacktestResult):
    q_prev = np.concatenate([[0.0], res.q[:-1]])
    p_all = np.concatenate([[res.p0], res.p])
    return res.daily_pnl() - (q_prev * np.diff(p_all) - res.cost)


def test_ledger_and_nav_identities(coint_panel):
    arbs = find_stat_arbs(coint_panel, FinderConfig(leverage_limit=20, n_initializations=3),
                          coint_panel.dates[0], coint_panel.dates[250])
    for sa in arbs:
        res = run(sa, coint_panel, BacktestConfig(), coint_panel.dates[251])
        assert np.allclose(res.nav, res.cash + res.q * res.p, atol=1e-12, rtol=0)
        assert np.max(np.abs(ledger_residual(res))) <= 1e-9
        assert compute_metrics(res).profit == res.nav[-1] - res.initial_cash


def test_costs_never_increase_profit(coint_panel):
    arbs = find_stat_arbs(coint_panel, FinderConfig(leverage_limit=20, n_initializations=3),
                          coint_panel.dates[0], coint_panel.dates[250])
    sa = arbs[0]
    profits = []
    for spread, rate in [(0.0, 0.0), (0.001, 0.0), (0.001, 0.01), (0.01, 0.05)]:
        cfg = BacktestConfig(relative_spread=spread, shorting_rate=rate, nav_floor_fraction=0.0)
        profits.append(compute_metrics(run(sa, coint_panel, cfg, coint_panel.dates[251])).profit)
    assert all(b <= a for a, b in zip(profits, profits[1:]))


def test_metrics_constant_return():
    n = 10
    nav = 100 * 1.001 ** np.arange(1, n + 1)
    res = BacktestResult([str(i) for i in range(n)], np.zeros(n), np.zeros(n), nav, nav,
                         np.zeros(n), np.full(n, 0.001), 0.0, 100.0)
    m = compute_metrics(res)
    assert m.mean_return == pytest.approx(0.25)
    assert m.risk == 0.0 and m.sharpe == math.inf
    res.ret = -res.ret
    assert compute_metrics(res).sharpe == -math.inf


def test_metrics_sharpe_is_ratio():
    r = np.random.default_rng(0).normal(0.001, 0.01, 84)
    nav = 100 * np.cumprod(1 + r)
    res = BacktestResult([str(i) for i in range(84)], np.zeros(84), np.zeros(84), nav, nav, np.zeros(84), r, 0.0, 100.0)
    m = compute_metrics(res)
    assert m.mean_return == pytest.approx(250 * r.mean())
    assert m.risk == pytest.approx(math.sqrt(250) * math.sqrt(((r - r.mean()) ** 2).mean()))
    assert m.sharpe == pytest.approx(m.mean_return / m.risk)
    with pytest.raises(ValueError):
        compute_metrics(BacktestResult([], *[np.zeros(0)] * 6, 0.0, 1.0))


def test_drawdown_examples():
    assert max_drawdown([1.0, 1.2, 0.9]) == pytest.approx(1.2 / 0.9 - 1)
    assert max_drawdown([1.0, 2.0, 3.0]) == 0.0
    assert max_drawdown([5.0]) == 0.0
    rng = np.random.default_rng(2)
    nav = 100 * np.cumprod(1 + rng.normal(0, 0.02, 84))
    assert max_drawdown(nav) == max_drawdown_bruteforce(list(nav))


def test_report_files(tmp_path):
    pm = panel(np.linspace(10, 12, 8))
    sa = statarb(["A0"], [1.0], FixedBand(11.0))
    res = run(sa, pm, BacktestConfig(t_max=4, t_exit=2))
    write_report(res, tmp_path / "r.csv")
    write_metrics(compute_metrics(res), tmp_path / "m.json")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "date,q,p,cash,nav,cost,ret"
    assert len(lines) == 7
    assert float(lines[1].split(",")[4]) == res.nav[0]
    import json

    keys = set(json.loads((tmp_path / "m.json").read_text()))
    assert keys == {"profit", "annualized_return", "annualized_risk", "sharpe", "max_drawdown", "terminated_early"}


def test_config_validation():
    for bad in (dict(nu=0), dict(nav_floor_fraction=1.0), dict(shorting_rate=-1), dict(t_exit=0)):
        with pytest.raises(ValueError):
            BacktestConfig(**bad)
