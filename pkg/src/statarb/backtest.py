"""Cost-aware simulation of a single stat-arb, and performance metrics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ccp import MovingBand, StatArb
from .market_data import PriceMatrix, SpreadMatrix
from .trading import PolicyState


class BacktestError(RuntimeError):
    pass


class EvaluationWindowError(BacktestError):
    pass


class BustError(BacktestError):
    """NAV reached zero or below; ``result`` holds the series up to that day."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class BacktestConfig:
    nu: float = 0.5
    t_max: int = 63
    t_exit: int = 21
    shorting_rate: float = 0.005
    nav_floor_fraction: float = 0.5
    relative_spread: float = 0.001
    spreads: SpreadMatrix | None = field(default=None, repr=False)
    trading_days_per_year: int = 250

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be > 0")
        if not 0 <= self.nav_floor_fraction < 1:
            raise ValueError("nav_floor_fraction must lie in [0, 1)")
        if self.shorting_rate < 0:
            raise ValueError("shorting_rate must be >= 0")
        if self.relative_spread < 0:
            raise ValueError("relative_spread must be >= 0")
        if self.t_exit < 1 or self.t_max < 0:
            raise ValueError("need t_exit >= 1 and t_max >= 0")
        if self.trading_days_per_year < 1:
            raise ValueError("trading_days_per_year must be >= 1")

    @property
    def horizon(self) -> int:
        return self.t_max + self.t_exit

    def half_spreads(self, pm: PriceMatrix, row: int) -> np.ndarray:
        if self.spreads is not None:
            return self.spreads.half_spreads(pm.dates[row], pm.assets)
        return 0.5 * self.relative_spread * pm.prices[row]


@dataclass
class BacktestResult:
    """Daily series over the evaluation days.

    ``q[t]`` is the multiplier held after trading on day ``t``, so
    ``nav[t] = cash[t] + q[t] * p[t]``. ``p0`` and ``initial_cash`` describe
    the day before trading starts, when nothing is held.
    """

    dates: list[str]
    q: np.ndarray
    p: np.ndarray
    cash: np.ndarray
    nav: np.ndarray
    cost: np.ndarray
    ret: np.ndarray
    p0: float
    initial_cash: float
    terminated_early: bool = False
    termination_date: str | None = None

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def daily_pnl(self) -> np.ndarray:
        return np.diff(np.concatenate([[self.initial_cash], self.nav]))

    def active_until(self) -> str:
        """Last date with a nonzero position (or the first date if never active)."""
        nz = np.flatnonzero(self.q != 0.0)
        return self.dates[int(nz[-1])] if nz.size else self.dates[0]


@dataclass(frozen=True)
class Metrics:
    profit: float
    mean_return: float
    risk: float
    sharpe: float
    max_drawdown: float
    terminated_early: bool = False

    def to_dict(self) -> dict:
        return {
            "profit": self.profit,
            "annualized_return": self.mean_return,
            "annualized_risk": self.risk,
            "sharpe": self.sharpe,
            "max_drawdown": self.max_drawdown,
            "terminated_early": self.terminated_early,
        }


def init_cash(shares, p0, nu: float) -> float:
    return float(nu * np.abs(np.asarray(shares, dtype=float)) @ np.asarray(p0, dtype=float))


def transaction_cost(delta_holdings, prices, half_spreads) -> float:
    """Cost of trading at the ask (buys) and bid (sells) instead of the midpoint."""
    return float(np.abs(np.asarray(delta_holdings, dtype=float)) @ np.asarray(half_spreads, dtype=float))


def holding_cost(holdings, prices, shorting_rate: float, days_per_year: int = 250) -> float:
    short_value = np.maximum(-np.asarray(holdings, dtype=float), 0.0) @ np.asarray(prices, dtype=float)
    return float(shorting_rate / days_per_year * short_value)


def _start_row(sa: StatArb, pm: PriceMatrix, start: str | None) -> int:
    need = max(1, sa.band.memory - 1) if isinstance(sa.band, MovingBand) else 1
    if start is None:
        return need
    row = pm.index_of(start)
    if row < need:
        raise EvaluationWindowError(
            f"trading from {start} needs {need} prior trading day(s) in the panel, found {row}"
        )
    return row


def run(sa: StatArb, pm: PriceMatrix, cfg: BacktestConfig, start: str | None = None) -> BacktestResult:
    """Trade ``sa`` for ``t_max + t_exit`` days beginning at ``start``.

    ``start`` defaults to the earliest row that leaves a prior day (and, for
    moving bands, the M-1 warmup prices) in ``pm``. If the NAV after costs
    falls below ``nav_floor_fraction * C0`` the position is liquidated at
    the next day's prices and cash is held for the rest of the window.
    """
    i0 = _start_row(sa, pm, start)
    T = cfg.horizon
    if i0 + T > pm.n_days:
        raise EvaluationWindowError(
            f"evaluation window of {T} days from {pm.dates[i0]} extends past panel end {pm.dates[-1]}"
        )
    s = sa.share_vector(pm)
    prices = pm.prices
    port = prices @ s
    memory = sa.band.memory if isinstance(sa.band, MovingBand) else 1
    policy = PolicyState(sa.band, cfg.t_max, cfg.t_exit, port[i0 - memory + 1:i0])

    c0 = init_cash(s, prices[i0 - 1], cfg.nu)
    floor = cfg.nav_floor_fraction * c0
    out = {k: np.zeros(T) for k in ("q", "p", "cash", "nav", "cost", "ret")}
    dates = list(pm.dates[i0:i0 + T])
    q_prev, cash, v_prev = 0.0, c0, c0
    liquidate, terminated, term_date = False, False, None
    for k in range(T):
        i = i0 + k
        p = float(port[i])
        q = policy.step(p)
        if liquidate:
            terminated, term_date, liquidate = True, pm.dates[i], False
        if terminated:
            q = 0.0
        phi = transaction_cost((q - q_prev) * s, prices[i], cfg.half_spreads(pm, i))
        phi += holding_cost(q_prev * s, prices[i], cfg.shorting_rate, cfg.trading_days_per_year)
        cash = cash - (q - q_prev) * p - phi
        v = cash + q * p
        for key, val in (("q", q), ("p", p), ("cash", cash), ("nav", v), ("cost", phi)):
            out[key][k] = val
        if v_prev <= 0:
            res = BacktestResult(dates[:k + 1], *(out[x][:k + 1] for x in ("q", "p", "cash", "nav", "cost", "ret")),
                                 p0=float(port[i0 - 1]), initial_cash=c0)
            raise BustError(f"non-positive NAV {v_prev!r} before {pm.dates[i]}", res)
        out["ret"][k] = (v - v_prev) / v_prev
        if not terminated and v < floor and k + 1 < T:
            liquidate = True
        q_prev, v_prev = q, v
    return BacktestResult(
        dates, out["q"], out["p"], out["cash"], out["nav"], out["cost"], out["ret"],
        p0=float(port[i0 - 1]), initial_cash=c0,
        terminated_early=terminated, termination_date=term_date,
    )


def max_drawdown(nav) -> float:
    """Largest ``V[t1] / V[t2] - 1`` over ``t1 < t2``, floored at zero."""
    v = np.asarray(nav, dtype=float)
    if v.shape[0] < 2:
        return 0.0
    peak = np.maximum.accumulate(v[:-1])
    return float(max(np.max(peak / v[1:]) - 1.0, 0.0))


def compute_metrics(res: BacktestResult, days_per_year: int = 250) -> Metrics:
    r = np.asarray(res.ret, dtype=float)
    T = r.shape[0]
    if T == 0:
        raise ValueError("empty return series")
    mean = days_per_year * float(np.mean(r))
    risk = math.sqrt(days_per_year) * float(np.std(r))
    if risk > 1e-12:
        sharpe = mean / risk
    elif mean > 0:
        sharpe = math.inf
    elif mean < 0:
        sharpe = -math.inf
    else:
        sharpe = 0.0
    return Metrics(
        profit=math.fsum(res.daily_pnl()),
        mean_return=mean,
        risk=risk if risk > 1e-12 else 0.0,
        sharpe=sharpe,
        max_drawdown=max_drawdown(res.nav),
        terminated_early=res.terminated_early,
    )


def write_report(res: BacktestResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "q", "p", "cash", "nav", "cost", "ret"])
        for k, d in enumerate(res.dates):
            w.writerow([d] + [f"{x[k]:.17g}" for x in (res.q, res.p, res.cash, res.nav, res.cost, res.ret)])


def write_metrics(m: Metrics, path: str | Path) -> None:
    Path(path).write_text(json.dumps(m.to_dict(), indent=2) + "\n")
