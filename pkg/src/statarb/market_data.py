"""Price panels: loading, validation, windowing, scaling, synthetic data."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class PriceDataError(ValueError):
    """Raised when a price file or panel violates the panel invariants."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


class ParseError(PriceDataError):
    pass


class MissingCellError(PriceDataError):
    pass


class NonPositivePriceError(PriceDataError):
    pass


class DuplicateDateError(PriceDataError):
    pass


class EmptyWindowError(PriceDataError):
    pass


@dataclass(frozen=True)
class PriceMatrix:
    """T x n panel of positive prices (USD per share), rows ordered by date."""

    dates: tuple[str, ...]
    assets: tuple[str, ...]
    prices: np.ndarray = field(repr=False)

    def __post_init__(self):
        dates = tuple(str(d) for d in self.dates)
        assets = tuple(str(a) for a in self.assets)
        prices = np.array(self.prices, dtype=float)
        if prices.ndim != 2:
            raise PriceDataError(f"prices must be 2-d, got shape {prices.shape}")
        if prices.shape != (len(dates), len(assets)):
            raise PriceDataError(
                f"prices shape {prices.shape} does not match "
                f"{len(dates)} dates x {len(assets)} assets"
            )
        if len(set(assets)) != len(assets):
            raise PriceDataError("duplicate asset identifiers")
        for i in range(1, len(dates)):
            if dates[i] == dates[i - 1]:
                raise DuplicateDateError(f"duplicate date {dates[i]}", row=i)
            if dates[i] < dates[i - 1]:
                raise PriceDataError(f"dates not increasing at {dates[i]}", row=i)
        if not np.all(np.isfinite(prices)):
            r, c = np.argwhere(~np.isfinite(prices))[0]
            raise MissingCellError("non-finite price", row=int(r), column=assets[c])
        if np.any(prices <= 0):
            r, c = np.argwhere(prices <= 0)[0]
            raise NonPositivePriceError(
                f"non-positive price {prices[r, c]!r}", row=int(r), column=assets[c]
            )
        prices.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "prices", prices)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    def index_of(self, date: str) -> int:
        try:
            return self.dates.index(date)
        except ValueError:
            raise PriceDataError(f"date {date} not in panel") from None

    def take_rows(self, start: int, stop: int) -> "PriceMatrix":
        if not 0 <= start < stop <= self.n_days:
            raise EmptyWindowError(f"empty row range [{start}, {stop})")
        return PriceMatrix(self.dates[start:stop], self.assets, self.prices[start:stop])

    def take_assets(self, columns: Sequence[int]) -> "PriceMatrix":
        columns = list(columns)
        return PriceMatrix(
            self.dates, [self.assets[c] for c in columns], self.prices[:, columns]
        )


@dataclass(frozen=True)
class ScalingInfo:
    mean_prices: np.ndarray
    scaled: bool = True

    def __post_init__(self):
        mean_prices = np.array(self.mean_prices, dtype=float)
        if mean_prices.ndim != 1 or np.any(~(mean_prices > 0)):
            raise ValueError("mean_prices must be a strictly positive vector")
        mean_prices.setflags(write=False)
        object.__setattr__(self, "mean_prices", mean_prices)


@dataclass(frozen=True)
class SyntheticConfig:
    n_assets: int = 10
    n_days: int = 500
    n_common_trends: int = 2
    spread_volatility: float = 0.02
    trend_volatility: float = 0.01
    mean_reversion_rate: float = 0.1
    base_price: float = 50.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_assets", "n_days", "n_common_trends"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.spread_volatility < 0 or self.trend_volatility < 0:
            raise ValueError("volatilities must be >= 0")
        if not 0 < self.mean_reversion_rate <= 1:
            raise ValueError("mean_reversion_rate must lie in (0, 1]")
        if not self.base_price > 0:
            raise ValueError("base_price must be > 0")


def _read_panel(path, allow_zero: bool):
    rows: list[tuple[str, list[float]]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "date":
            raise ParseError("header must be date,<asset1>,...", row=0)
        assets = header[1:]
        if any(not a for a in assets):
            raise ParseError("blank asset identifier in header", row=0)
        for lineno, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) < len(header):
                raise MissingCellError(
                    f"expected {len(header)} cells, got {len(record)}",
                    row=lineno, column=header[len(record)],
                )
            if len(record) > len(header):
                raise ParseError(f"expected {len(header)} cells, got {len(record)}", row=lineno)
            date = record[0].strip()
            _check_date(date, lineno)
            values = []
            for asset, cell in zip(assets, record[1:]):
                cell = cell.strip()
                if cell == "" or cell.lower() in ("na", "nan", "null"):
                    raise MissingCellError("missing value", row=lineno, column=asset)
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"cannot parse {cell!r}", row=lineno, column=asset) from None
                if not math.isfinite(value):
                    raise ParseError(f"non-finite {cell!r}", row=lineno, column=asset)
                if value < 0 or (value == 0 and not allow_zero):
                    raise NonPositivePriceError(
                        f"{'negative' if allow_zero else 'non-positive'} value {value!r}",
                        row=lineno, column=asset,
                    )
                values.append(value)
            rows.append((date, values))
    if not rows:
        raise ParseError("no data rows")
    order = sorted(range(len(rows)), key=lambda i: rows[i][0])
    for a, b in zip(order, order[1:]):
        if rows[a][0] == rows[b][0]:
            raise DuplicateDateError(f"duplicate date {rows[b][0]}", row=max(a, b) + 1)
    dates = [rows[i][0] for i in order]
    values = np.array([rows[i][1] for i in order], dtype=float).reshape(len(rows), len(assets))
    return dates, assets, values


def load_prices(path: str | Path) -> PriceMatrix:
    """Read a ``date,<asset>,...`` CSV into a validated panel sorted by date.

    Missing or unparseable cells are hard errors; nothing is imputed. Error
    rows count data lines from 1 (the header is row 0).
    """
    dates, assets, values = _read_panel(path, allow_zero=False)
    return PriceMatrix(dates, assets, values)


@dataclass(frozen=True)
class SpreadMatrix:
    """Full bid-ask spreads in USD per share, same layout as a price panel."""

    dates: tuple[str, ...]
    assets: tuple[str, ...]
    spreads: np.ndarray = field(repr=False)

    def half_spreads(self, date: str, assets: Sequence[str]) -> np.ndarray:
        try:
            row = self.dates.index(date)
        except ValueError:
            raise PriceDataError(f"no spreads for {date}") from None
        pos = {a: i for i, a in enumerate(self.assets)}
        try:
            return 0.5 * self.spreads[row, [pos[a] for a in assets]]
        except KeyError as exc:
            raise PriceDataError(f"no spreads for asset {exc.args[0]}") from None


def load_spreads(path: str | Path) -> SpreadMatrix:
    dates, assets, values = _read_panel(path, allow_zero=True)
    return SpreadMatrix(tuple(dates), tuple(assets), values)


def _check_date(date: str, lineno: int) -> None:
    import datetime as _dt

    try:
        _dt.date.fromisoformat(date)
    except ValueError:
        raise ParseError(f"bad ISO-8601 date {date!r}", row=lineno, column="date") from None
    if len(date) != 10:
        raise ParseError(f"date must be YYYY-MM-DD, got {date!r}", row=lineno, column="date")


def save_prices(pm: PriceMatrix, path: str | Path, fmt: str = "{:.10g}") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *pm.assets])
        for date, row in zip(pm.dates, pm.prices):
            writer.writerow([date, *(fmt.format(v) for v in row)])


def slice_window(pm: PriceMatrix, start: str, end: str) -> PriceMatrix:
    """Rows with ``start <= date <= end`` (inclusive)."""
    if start > end:
        raise EmptyWindowError(f"start {start} after end {end}")
    dates = pm.dates
    lo = next((i for i, d in enumerate(dates) if d >= start), len(dates))
    hi = next((i for i in range(len(dates) - 1, -1, -1) if dates[i] <= end), -1)
    if lo > hi:
        raise EmptyWindowError(f"no trading days in [{start}, {end}]")
    return pm.take_rows(lo, hi + 1)


def compute_scaling(pm: PriceMatrix) -> ScalingInfo:
    if pm.n_days == 0:
        raise EmptyWindowError("cannot scale an empty panel")
    return ScalingInfo(pm.prices.mean(axis=0))


def apply_scaling(pm: PriceMatrix, sc: ScalingInfo) -> PriceMatrix:
    if sc.mean_prices.shape != (pm.n_assets,):
        raise ValueError(
            f"scaling has {sc.mean_prices.shape[0]} entries, panel has {pm.n_assets} assets"
        )
    return PriceMatrix(pm.dates, pm.assets, pm.prices / sc.mean_prices)


def synthetic_components(cfg: SyntheticConfig):
    """Return ``(loadings, trends, spreads)`` behind :func:`generate_synthetic`.

    Log prices are ``log(base_price) + trends @ loadings.T + spreads`` where the
    trends are random walks and the spreads are AR(1) with coefficient
    ``1 - mean_reversion_rate``.
    """
    rng = np.random.default_rng(cfg.seed)
    n, T, k = cfg.n_assets, cfg.n_days, cfg.n_common_trends
    loadings = rng.normal(1.0, 0.5, size=(n, k)) / np.sqrt(k)
    steps = rng.standard_normal((T, k)) * cfg.trend_volatility
    steps[0] = 0.0
    trends = np.cumsum(steps, axis=0)
    shocks = rng.standard_normal((T, n)) * cfg.spread_volatility
    phi = 1.0 - cfg.mean_reversion_rate
    spreads = np.zeros((T, n))
    for t in range(1, T):
        spreads[t] = phi * spreads[t - 1] + shocks[t]
    return loadings, trends, spreads


def generate_synthetic(cfg: SyntheticConfig) -> PriceMatrix:
    """Cointegrated universe driven by a few common stochastic trends."""
    loadings, trends, spreads = synthetic_components(cfg)
    prices = cfg.base_price * np.exp(trends @ loadings.T + spreads)
    dates = _business_days(cfg.n_days)
    assets = [f"A{i:03d}" for i in range(cfg.n_assets)]
    return PriceMatrix(dates, assets, prices)


def _business_days(count: int, start: str = "2010-01-04") -> list[str]:
    import datetime as _dt

    day = _dt.date.fromisoformat(start)
    out = []
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day.isoformat())
        day += _dt.timedelta(days=1)
    return out
