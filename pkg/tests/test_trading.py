import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from statarb.ccp import FixedBand, MovingBand
from statarb.trading import PolicyState, exit_ramp, target_quantity, trailing_mean

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_trailing_mean():
    assert trailing_mean([0.0, 2.0], 2) == 1.0
    assert trailing_mean([3.3] * 7, 7) == pytest.approx(3.3)
    x = np.random.default_rng(0).normal(size=21)
    total = 0.0
    for v in x:
        total += v
    assert abs(trailing_mean(x, 21) - total / 21) <= 1e-12
    with pytest.raises(ValueError):
        trailing_mean([1.0, 2.0], 3)


def test_target_quantity():
    assert target_quantity(5.0, 5.0) == 0.0
    assert target_quantity(5.0, 4.0) == 1.0
    assert target_quantity(5.0, 6.0) == -1.0


@given(finite, st.floats(0, 1e3))
def test_target_is_odd_in_deviation(mu, d):
    assert target_quantity(mu, mu + d) == pytest.approx(-target_quantity(mu, mu - d))


def test_exit_ramp():
    assert exit_ramp(0.7, 62, 63, 21) == 0.7
    assert exit_ramp(0.7, 63, 63, 21) == pytest.approx((1 - 1 / 21) * 0.7)
    assert exit_ramp(0.7, 63 + 21 - 1, 63, 21) == 0.0
    assert exit_ramp(0.7, 200, 63, 21) == 0.0


@given(finite, st.integers(0, 50), st.integers(1, 30))
def test_exit_ramp_magnitude_nonincreasing(q, t_max, t_exit):
    mags = [abs(exit_ramp(q, t, t_max, t_exit)) for t in range(t_max + t_exit + 2)]
    assert all(b <= a + 1e-12 for a, b in zip(mags, mags[1:]))


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=20), finite)
def test_in_band_holdings_bounded(devs, mu):
    pol = PolicyState(FixedBand(mu), t_max=100, t_exit=5)
    for d in devs:
        assert abs(pol.step(mu + d)) <= 1 + 1e-9 * max(1.0, abs(mu))


def test_moving_policy_includes_today():
    pol = PolicyState(MovingBand(3), t_max=10, t_exit=2, warmup_prices=[9.0, 1.0, 2.0])
    # buffer seeded with the last two warmup prices: (1, 2); today 6 -> mu = 3
    assert pol.step(6.0) == pytest.approx(3.0 - 6.0)
    assert pol.step(0.0) == pytest.approx((2.0 + 6.0 + 0.0) / 3)


def test_moving_policy_needs_warmup():
    with pytest.raises(ValueError):
        PolicyState(MovingBand(5), 10, 2, warmup_prices=[1.0])
    pol = PolicyState(MovingBand(1), 10, 2)
    assert pol.step(4.0) == 0.0


def test_policy_exit_schedule():
    pol = PolicyState(FixedBand(1.0), t_max=2, t_exit=2)
    qs = [pol.step(0.0) for _ in range(5)]
    assert qs == [1.0, 1.0, 0.5, 0.0, 0.0]
    with pytest.raises(ValueError):
        PolicyState(FixedBand(0.0), 2, 0)
