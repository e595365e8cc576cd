"""Fixed-band and moving-band statistical arbitrage via the convex-concave procedure."""
from ._kernels import BACKEND
from .backtest import BacktestConfig, BacktestResult, Metrics, compute_metrics, run
from .ccp import FinderConfig, FixedBand, MovingBand, StatArb, find_stat_arbs, search
from .market_data import PriceMatrix, SyntheticConfig, generate_synthetic, load_prices

__all__ = [
    "BACKEND",
    "BacktestConfig",
    "BacktestResult",
    "FinderConfig",
    "FixedBand",
    "Metrics",
    "MovingBand",
    "PriceMatrix",
    "StatArb",
    "SyntheticConfig",
    "compute_metrics",
    "find_stat_arbs",
    "generate_synthetic",
    "load_prices",
    "run",
    "search",
]
__version__ = "0.1.0"
