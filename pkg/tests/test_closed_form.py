"""Test closed-form European prices."""

import math

import numpy as np
import pytest

from arbcost_pricing.closed_form import (
    bs_delta,
    bs_delta_paths,
    bs_price,
    drift_shifted_delta,
    drift_shifted_price,
    generalized_bs_delta,
    generalized_bs_price,
    hetero_bs_price,
)
from arbcost_pricing.errors import NonPositiveDrift
from arbcost_pricing.models import VanillaSpec

ATM = VanillaSpec(spot=100.0, strike=100.0, maturity=1.0, rate=0.05, vol=0.2)


class TestBlackScholes:
    """Plain Black-Scholes values."""

    def test_reference_call(self):
        assert bs_price(ATM) == pytest.approx(10.4506, abs=1e-4)

    def test_put_call_parity(self):
        put = VanillaSpec(spot=100.0, strike=100.0, maturity=1.0, rate=0.05, vol=0.2, kind="put")
        assert bs_price(ATM) - bs_price(put) == pytest.approx(100.0 - 100.0 * math.exp(-0.05))

    def test_zero_maturity_is_intrinsic(self):
        spec = VanillaSpec(spot=110.0, strike=100.0, maturity=0.0, rate=0.05, vol=0.2)
        assert bs_price(spec) == 10.0
        assert bs_delta(spec) == 1.0
        assert bs_price(VanillaSpec(spot=90.0, strike=100.0, maturity=0.0, kind="put")) == 10.0

    def test_vanishing_vol_is_discounted_forward_intrinsic(self):
        price = generalized_bs_price(100.0, 90.0, 1.0, 0.05, 0.05, 1e-14)
        assert price == pytest.approx(100.0 - 90.0 * math.exp(-0.05))
        assert generalized_bs_delta(100.0, 90.0, 1.0, 0.05, 0.05, 1e-14) == pytest.approx(1.0)

    def test_delta_bounds(self):
        assert 0.0 < bs_delta(ATM) < 1.0
        put = VanillaSpec(**{**ATM.__dict__, "kind": "put"})
        assert bs_delta(ATM) - bs_delta(put) == pytest.approx(1.0)


class TestHeterogeneousPrice:
    """Black-Scholes at the arb-cost rate."""

    def test_reference_price(self):
        result = hetero_bs_price(0.04, 0.09, ATM)
        assert result.rate == pytest.approx(0.25)
        assert result.price == pytest.approx(23.01, abs=0.05)
        assert result.method == "hetero_bs"
        assert result.diagnostics["lambda1"] == pytest.approx(2.5)
        assert result.diagnostics["lambda2"] == pytest.approx(5.0 / 3.0)

    def test_ignores_contract_rate(self):
        a = hetero_bs_price(0.04, 0.09, ATM.with_rate(0.0)).price
        b = hetero_bs_price(0.04, 0.09, ATM.with_rate(0.5)).price
        assert a == b

    def test_rejects_non_positive_drift(self):
        with pytest.raises(NonPositiveDrift):
            hetero_bs_price(0.0, 0.09, ATM)


class TestDriftShifted:
    """Generalized formula with carry mu1 - mu2 + r."""

    def test_equal_drifts_reduce_to_black_scholes(self):
        assert drift_shifted_price(0.07, 0.07, ATM) == pytest.approx(bs_price(ATM))
        assert drift_shifted_delta(0.07, 0.07, ATM) == pytest.approx(bs_delta(ATM))

    def test_parity_with_carry(self):
        put = VanillaSpec(spot=100.0, strike=95.0, maturity=0.5, rate=0.03, vol=0.25, kind="put")
        call = VanillaSpec(spot=100.0, strike=95.0, maturity=0.5, rate=0.03, vol=0.25)
        carry = 0.04 - 0.09 + 0.03
        forward = 100.0 * math.exp(carry * 0.5)
        expected = math.exp(-0.03 * 0.5) * (forward - 95.0)
        difference = drift_shifted_price(0.04, 0.09, call) - drift_shifted_price(0.04, 0.09, put)
        assert difference == pytest.approx(expected)

    def test_rate_override(self):
        assert drift_shifted_price(0.04, 0.09, ATM, rate=0.01) == pytest.approx(
            drift_shifted_price(0.04, 0.09, ATM.with_rate(0.01))
        )


class TestDeltaPaths:
    def test_matches_scalar_delta(self):
        spots = np.array([80.0, 100.0, 120.0])
        deltas = bs_delta_paths(spots, ATM, 1.0)
        expected = [bs_delta(VanillaSpec(**{**ATM.__dict__, "spot": s})) for s in spots]
        assert deltas == pytest.approx(expected)

    def test_expiry_indicator(self):
        spots = np.array([90.0, 110.0])
        assert bs_delta_paths(spots, ATM, 0.0).tolist() == [0.0, 1.0]
        put = VanillaSpec(spot=100.0, strike=100.0, maturity=1.0, kind="put")
        assert bs_delta_paths(spots, put, 0.0).tolist() == [-1.0, 0.0]
