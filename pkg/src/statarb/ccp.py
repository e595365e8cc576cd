"""Convex-concave procedure for fixed-band and moving-band stat-arbs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from .lp import (
    LpError,
    LpStatus,
    build_fixed_band_lp,
    build_moving_band_lp,
    moving_band_residuals,
    solve_lp,
)
from .market_data import PriceMatrix, apply_scaling, compute_scaling

log = logging.getLogger(__name__)

OBJECTIVE_FLOOR = 1.0
FEASIBILITY_TOL = 1e-6


class CcpError(RuntimeError):
    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"{message} (iteration {iteration})")
        self.iteration = iteration


class CleanupError(CcpError):
    """Cleanup removed every asset; the candidate is degenerate."""


class InsufficientWarmupError(ValueError):
    pass


@dataclass(frozen=True)
class FixedBand:
    midpoint: float
    kind: Literal["fixed"] = "fixed"


@dataclass(frozen=True)
class MovingBand:
    memory: int
    kind: Literal["moving"] = "moving"


Band = Union[FixedBand, MovingBand]


@dataclass(frozen=True)
class StatArb:
    assets: tuple[str, ...]
    shares: np.ndarray
    band: Band
    train_start: str
    train_end: str
    leverage_used: float
    objective_value: float

    def __post_init__(self):
        shares = np.array(self.shares, dtype=float)
        if shares.shape != (len(self.assets),):
            raise ValueError("assets and shares must have equal length")
        shares.setflags(write=False)
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "shares", shares)

    @property
    def key(self) -> frozenset:
        return frozenset(self.assets)

    def share_vector(self, pm: PriceMatrix) -> np.ndarray:
        """Shares aligned to ``pm.assets`` (zeros for assets not held)."""
        pos = {a: i for i, a in enumerate(pm.assets)}
        missing = [a for a in self.assets if a not in pos]
        if missing:
            raise KeyError(f"assets not in panel: {missing}")
        s = np.zeros(pm.n_assets)
        for a, v in zip(self.assets, self.shares):
            s[pos[a]] = v
        return s

    def portfolio_prices(self, pm: PriceMatrix) -> np.ndarray:
        return pm.prices @ self.share_vector(pm)

    def to_dict(self) -> dict:
        band = {"kind": self.band.kind}
        if isinstance(self.band, FixedBand):
            band["mu"] = float(self.band.midpoint)
        else:
            band["memory"] = int(self.band.memory)
        return {
            "assets": list(self.assets),
            "shares": [float(v) for v in self.shares],
            "band": band,
            "train_start": self.train_start,
            "train_end": self.train_end,
            "objective": float(self.objective_value),
            "leverage": float(self.leverage_used),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StatArb":
        band = d["band"]
        if band["kind"] == "fixed":
            b: Band = FixedBand(float(band["mu"]))
        elif band["kind"] == "moving":
            b = MovingBand(int(band["memory"]))
        else:
            raise ValueError(f"unknown band kind {band['kind']!r}")
        return cls(
            assets=tuple(d["assets"]),
            shares=np.asarray(d["shares"], dtype=float),
            band=b,
            train_start=d["train_start"],
            train_end=d["train_end"],
            leverage_used=float(d["leverage"]),
            objective_value=float(d["objective"]),
        )


@dataclass(frozen=True)
class FinderConfig:
    leverage_limit: float = 50.0
    band_kind: Literal["fixed", "moving"] = "fixed"
    memory: int = 21
    max_iterations: int = 50
    objective_tolerance: float = 1e-4
    cleanup_threshold: float = 0.05
    n_initializations: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.leverage_limit > 0:
            raise ValueError("leverage_limit must be > 0")
        if self.band_kind not in ("fixed", "moving"):
            raise ValueError(f"band_kind must be 'fixed' or 'moving', got {self.band_kind!r}")
        if int(self.memory) < 1:
            raise ValueError("memory must be >= 1")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.cleanup_threshold < 1:
            raise ValueError("cleanup_threshold must lie in (0, 1)")
        if not self.objective_tolerance > 0:
            raise ValueError("objective_tolerance must be > 0")
        if int(self.n_initializations) < 1:
            raise ValueError("n_initializations must be >= 1")

    @property
    def warmup_rows(self) -> int:
        return self.memory - 1 if self.band_kind == "moving" else 0


@dataclass
class CcpTrace:
    objectives: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    cleanup_rounds: int = 0


def objective(p) -> float:
    """Sum of squared one-day changes of the portfolio price."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("objective needs at least two prices")
    d = np.diff(p)
    return float(d @ d)


def gradient(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("gradient needs at least two prices")
    d = np.diff(p)
    g = np.zeros_like(p)
    g[:-1] -= 2.0 * d
    g[1:] += 2.0 * d
    return g


def band_violation(pm_prices, shares, band: Band, warmup_prices=None) -> float:
    """Largest amount by which ``|p_t - mu_t|`` exceeds 1 on the window rows."""
    P = np.asarray(pm_prices, dtype=float)
    s = np.asarray(shares, dtype=float)
    if isinstance(band, FixedBand):
        resid = P @ s - band.midpoint
    else:
        full = P if warmup_prices is None else np.vstack([warmup_prices, P])
        resid = moving_band_residuals(full, band.memory) @ s
    return float(max(np.max(np.abs(resid)) - 1.0, 0.0))


def _solve_step(P, warmup, cfg: FinderConfig, s):
    n = P.shape[1]
    g = gradient(P @ s)
    if cfg.band_kind == "fixed":
        prob = build_fixed_band_lp(P, g, cfg.leverage_limit)
    else:
        prob = build_moving_band_lp(np.vstack([warmup, P]), g, cfg.leverage_limit, cfg.memory)
    sol = solve_lp(prob)
    if sol.status is not LpStatus.OPTIMAL:
        raise LpError(f"subproblem {sol.status.value}")
    s_new = sol.x[:n].copy()
    mu_new = float(sol.x[n]) if cfg.band_kind == "fixed" else None
    return s_new, mu_new, prob.c @ np.concatenate([s, np.zeros(prob.n_vars - n)]), sol.objective_value


def ccp_solve(scaled_prices, warmup, cfg: FinderConfig, s_init):
    """Run convex-concave iterations from ``s_init``.

    Each step maximizes the linearization of the objective at the current
    portfolio price over the band and leverage constraints (an LP). The
    first step also projects an infeasible ``s_init`` into the feasible set.
    Returns ``(s, mu, trace)``; ``mu`` is ``None`` for moving bands.
    """
    P = np.asarray(scaled_prices, dtype=float)
    n = P.shape[1]
    if cfg.band_kind == "moving":
        warmup = np.zeros((0, n)) if warmup is None else np.asarray(warmup, dtype=float)
        if warmup.shape != (cfg.memory - 1, n):
            raise InsufficientWarmupError(
                f"moving band with memory {cfg.memory} needs {cfg.memory - 1} warmup rows, "
                f"got {warmup.shape[0]}"
            )
    s = np.asarray(s_init, dtype=float).ravel()
    if s.shape != (n,) or not np.all(np.isfinite(s)):
        raise ValueError("s_init must be a finite vector with one entry per asset")
    trace = CcpTrace()
    mu = None
    f_cur = None
    for k in range(cfg.max_iterations):
        try:
            s_new, mu_new, lin_cur, lin_new = _solve_step(P, warmup, cfg, s)
        except LpError as exc:
            raise CcpError(str(exc), iteration=k) from exc
        f_new = objective(P @ s_new)
        trace.iterations = k + 1
        if f_cur is not None and lin_new < lin_cur - 1e-9 * max(1.0, abs(lin_cur)):
            # the current point is feasible for this LP, so this is solver noise
            log.debug("subproblem returned a worse point at iteration %d; stopping", k)
            trace.converged = True
            break
        s, mu = s_new, mu_new
        trace.objectives.append(f_new)
        if f_cur is not None and f_new - f_cur <= cfg.objective_tolerance * max(abs(f_cur), 1e-12):
            trace.converged = True
            f_cur = f_new
            break
        f_cur = f_new
    return s, mu, trace


def cleanup(s, mu, scaled_prices, warmup, cfg: FinderConfig):
    """Drop assets carrying at most ``eta`` of the leverage and re-solve.

    Repeats until every remaining asset carries more than ``eta`` of the
    l1 norm (prices are scaled, so leverage is the l1 norm of ``s``).
    Returns ``(s, mu, rounds)``.
    """
    P = np.asarray(scaled_prices, dtype=float)
    s = np.asarray(s, dtype=float).copy()
    eta = cfg.cleanup_threshold
    rounds = 0
    while True:
        w = np.abs(s)
        total = w.sum()
        if not total > 0:
            raise CleanupError("portfolio is identically zero")
        small = (w <= eta * total) & (s != 0.0)
        if not small.any():
            return s, mu, rounds
        keep = np.flatnonzero((w > eta * total))
        if keep.size == 0:
            raise CleanupError("support collapsed to empty")
        if np.all(w[small] <= 1e-12 * total):
            # negligible entries: zeroing them leaves the local solution unchanged
            s[small] = 0.0
            continue
        rounds += 1
        sub_warm = None if warmup is None else np.asarray(warmup)[:, keep]
        s_sub, mu, _ = ccp_solve(P[:, keep], sub_warm, cfg, s[keep])
        s = np.zeros_like(s)
        s[keep] = s_sub


@dataclass
class SearchReport:
    statarbs: list[StatArb]
    warnings: list[str] = field(default_factory=list)
    traces: list[CcpTrace] = field(default_factory=list)


def training_rows(pm: PriceMatrix, cfg: FinderConfig, start: str | None = None,
                  end: str | None = None) -> tuple[int, int]:
    """Half-open row range of the band (training) days.

    For moving bands the M-1 rows before the first band day are warmup; if
    the panel has no such rows they are taken from the start of the window.
    """
    lo = 0 if start is None else next((i for i, d in enumerate(pm.dates) if d >= start), pm.n_days)
    hi = pm.n_days if end is None else next(
        (i + 1 for i in range(pm.n_days - 1, -1, -1) if pm.dates[i] <= end), 0
    )
    lo = max(lo, cfg.warmup_rows)
    if hi - lo < 2:
        if cfg.band_kind == "moving":
            raise InsufficientWarmupError(
                f"moving band with memory {cfg.memory} requires {cfg.warmup_rows} warmup "
                f"trading days before at least 2 training days; window provides {max(hi - lo, 0)} "
                "training days after warmup"
            )
        raise ValueError("training window needs at least 2 trading days")
    return lo, hi


def search(pm: PriceMatrix, cfg: FinderConfig, start: str | None = None,
           end: str | None = None) -> SearchReport:
    """Multi-start stat-arb search over the training window ``[start, end]``."""
    lo, hi = training_rows(pm, cfg, start, end)
    train = pm.take_rows(lo, hi)
    sc = compute_scaling(train)
    P = apply_scaling(train, sc).prices
    warmup = None
    if cfg.band_kind == "moving":
        warmup = pm.prices[lo - cfg.warmup_rows:lo] / sc.mean_prices
    n = pm.n_assets
    report = SearchReport([])
    best: dict[frozenset, StatArb] = {}
    for j in range(cfg.n_initializations):
        rng = np.random.default_rng([cfg.seed, j])
        s0 = rng.uniform(0.0, 1.0, size=n)
        try:
            s, mu, trace = ccp_solve(P, warmup, cfg, s0)
            s, mu, rounds = cleanup(s, mu, P, warmup, cfg)
        except (CcpError, LpError) as exc:
            report.warnings.append(f"run {j}: {exc}")
            log.warning("run %d skipped: %s", j, exc)
            continue
        trace.cleanup_rounds = rounds
        report.traces.append(trace)
        sa = _to_statarb(pm, lo, hi, sc.mean_prices, s, mu, cfg)
        if sa is None:
            report.warnings.append(f"run {j}: infeasible after unscaling")
            continue
        if sa.objective_value < OBJECTIVE_FLOOR:
            continue
        prev = best.get(sa.key)
        if prev is None or sa.objective_value > prev.objective_value:
            best[sa.key] = sa
    report.statarbs = sorted(best.values(), key=lambda a: (-a.objective_value, a.assets))
    return report


def find_stat_arbs(pm: PriceMatrix, cfg: FinderConfig, start: str | None = None,
                   end: str | None = None) -> list[StatArb]:
    return search(pm, cfg, start, end).statarbs


def _to_statarb(pm, lo, hi, mean_prices, s_scaled, mu, cfg):
    support = np.flatnonzero(s_scaled != 0.0)
    shares = s_scaled[support] / mean_prices[support]
    assets = tuple(pm.assets[i] for i in support)
    P = pm.prices[lo:hi][:, support]
    if cfg.band_kind == "fixed":
        band: Band = FixedBand(max(float(mu), 0.0))
        warm = None
    else:
        band = MovingBand(cfg.memory)
        warm = pm.prices[lo - cfg.warmup_rows:lo][:, support]
    leverage = float(np.abs(shares) @ mean_prices[support])
    if band_violation(P, shares, band, warm) > FEASIBILITY_TOL:
        return None
    if leverage - cfg.leverage_limit > FEASIBILITY_TOL:
        return None
    return StatArb(
        assets=assets,
        shares=shares,
        band=band,
        train_start=pm.dates[lo],
        train_end=pm.dates[hi - 1],
        leverage_used=leverage,
        objective_value=objective(P @ shares),
    )
