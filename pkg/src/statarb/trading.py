"""Linear band-trading policy with a time-based linear exit."""
from __future__ import annotations

from collections import deque

import numpy as np

from .ccp import Band, FixedBand, MovingBand


def trailing_mean(recent_prices, memory: int | None = None) -> float:
    """Mean of the last ``memory`` portfolio prices (newest last)."""
    p = np.asarray(recent_prices, dtype=float).ravel()
    if memory is not None and p.shape[0] != memory:
        raise ValueError(f"expected {memory} prices, got {p.shape[0]}")
    if p.shape[0] == 0:
        raise ValueError("need at least one price")
    return float(np.mean(p))


def target_quantity(mu: float, p: float) -> float:
    return mu - p


def exit_ramp(q_base: float, t: int, t_max: int, t_exit: int) -> float:
    """Scale holdings down linearly over days ``t_max .. t_max + t_exit - 1``.

    ``t`` counts trading days from 0. The position is flat on the last ramp
    day and afterwards.
    """
    if t < t_max:
        return q_base
    if t >= t_max + t_exit:
        return 0.0
    alpha = (t + 1 - t_max) / t_exit
    return (1.0 - alpha) * q_base


class PolicyState:
    """Per-backtest policy state; call :meth:`step` once per trading day."""

    def __init__(self, band: Band, t_max: int, t_exit: int, warmup_prices=()):
        if t_exit < 1:
            raise ValueError("t_exit must be >= 1")
        if t_max < 0:
            raise ValueError("t_max must be >= 0")
        self.band = band
        self.t_max = int(t_max)
        self.t_exit = int(t_exit)
        self.day_index = 0
        self.buffer: deque[float] | None = None
        if isinstance(band, MovingBand):
            warm = [float(v) for v in warmup_prices]
            if len(warm) < band.memory - 1:
                raise ValueError(
                    f"moving band needs {band.memory - 1} warmup prices, got {len(warm)}"
                )
            self.buffer = deque(warm[len(warm) - (band.memory - 1):] if band.memory > 1 else [],
                                maxlen=band.memory)

    def midpoint(self) -> float:
        if isinstance(self.band, FixedBand):
            return self.band.midpoint
        return trailing_mean(self.buffer, self.band.memory)

    def step(self, p: float) -> float:
        """Observe today's portfolio price and return today's target multiplier."""
        if self.buffer is not None:
            self.buffer.append(float(p))
        q = exit_ramp(target_quantity(self.midpoint(), p), self.day_index, self.t_max, self.t_exit)
        self.day_index += 1
        return q
