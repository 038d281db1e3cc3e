"""Test the two-asset lattice with velocity costs."""

from unittest.mock import patch

import numpy as np
import pytest

import arbcost_pricing.lattice_pricer as lattice_mod
from arbcost_pricing.closed_form import bs_price
from arbcost_pricing.errors import (
    DegenerateVolatility,
    InvalidParameter,
    QOutOfRange,
    SingularReplication,
)
from arbcost_pricing.lattice_pricer import (
    ReplicationSystem,
    price_lattice,
    replication_coefficients,
    risk_neutral_prob,
    solve_node,
    validate_q_representation,
)
from arbcost_pricing.models import LatticeClaim, LatticeMarket, VanillaSpec

NO_COST = LatticeMarket(mu=0.05, sigma=0.2, m=0.03, v=0.1)
COSTED = LatticeMarket(mu=0.05, sigma=0.2, m=0.03, v=0.1, cost_const=0.1)


def _call(strike=100.0):
    def payoff(s, v):
        return np.maximum(s - strike, 0.0)

    return payoff


def _put(strike=100.0):
    def payoff(s, v):
        return np.maximum(strike - s, 0.0)

    return payoff


class TestReplication:
    """Per-node replication system."""

    def test_state_prices_reprice_both_assets(self):
        system = replication_coefficients(COSTED, 0.01, "power")
        q_up, q_down = system.state_prices()
        assert q_up * system.up_s + q_down * system.down_s == pytest.approx(1.0)
        assert q_up * system.up_v + q_down * system.down_v == pytest.approx(1.0)

    def test_solve_node_replicates_payoff(self):
        system = replication_coefficients(COSTED, 0.01)
        a, b = solve_node(system, 3.0, 1.0, s=100.0, v=50.0)
        assert a * 100.0 * system.up_s + b * 50.0 * system.up_v == pytest.approx(3.0)
        assert a * 100.0 * system.down_s + b * 50.0 * system.down_v == pytest.approx(1.0)

    def test_singular_system(self):
        system = ReplicationSystem(up_s=1.1, up_v=1.1, down_s=0.9, down_v=0.9)
        with pytest.raises(SingularReplication):
            system.state_prices()

    def test_unknown_cost_form(self):
        with pytest.raises(InvalidParameter):
            replication_coefficients(COSTED, 0.01, "quadratic")


class TestPriceLattice:
    """Backward induction prices."""

    def test_no_cost_state_price_and_rate(self):
        """Without costs q = 1/2 - (mu - m) sqrt(dt) / (2 (sigma - v)) at the zero-beta rate."""
        claim = LatticeClaim(payoff=_call(), maturity=1.0, steps=100)
        result = price_lattice(NO_COST, claim)
        assert result.q == pytest.approx(0.49, abs=1e-12)
        assert result.rate == pytest.approx(0.01, abs=1e-12)
        assert result.method == "lattice"

    def test_put_call_parity_without_costs(self):
        claim_c = LatticeClaim(payoff=_call(), maturity=1.0, steps=200)
        claim_p = LatticeClaim(payoff=_put(), maturity=1.0, steps=200)
        call = price_lattice(NO_COST, claim_c)
        put = price_lattice(NO_COST, claim_p)
        discount = call.diagnostics["discount"] ** 200
        assert call.price - put.price == pytest.approx(100.0 - 100.0 * discount, abs=1e-9)

    @pytest.mark.parametrize("steps", [250, 1000])
    def test_converges_to_black_scholes(self, steps):
        """Error against Black-Scholes at the zero-beta rate stays inside 10 / N."""
        reference = bs_price(
            VanillaSpec(spot=100.0, strike=100.0, maturity=1.0, rate=0.01, vol=0.2)
        )
        claim = LatticeClaim(payoff=_call(), maturity=1.0, steps=steps)
        price = price_lattice(NO_COST, claim).price
        assert abs(price - reference) < 10.0 / steps

    def test_costs_change_the_price(self):
        claim = LatticeClaim(payoff=_call(), maturity=1.0, steps=200)
        plain = price_lattice(NO_COST, claim).price
        costed = price_lattice(COSTED, claim).price
        power = price_lattice(COSTED, claim, cost_form="power").price
        assert costed != pytest.approx(plain, abs=1e-6)
        assert power != pytest.approx(costed, abs=1e-9)

    def test_coinciding_adjusted_vols(self):
        mkt = LatticeMarket(mu=0.05, sigma=0.2, m=0.03, v=0.2)
        claim = LatticeClaim(payoff=_call(), maturity=1.0, steps=10)
        with pytest.raises(SingularReplication):
            price_lattice(mkt, claim)

    def test_payoff_shape_checked(self):
        claim = LatticeClaim(payoff=lambda s, v: 1.0, maturity=1.0, steps=10)
        with pytest.raises(InvalidParameter):
            price_lattice(NO_COST, claim)

    def test_coarse_step_drives_q_out_of_range(self):
        """One year in a single step leaves no valid state price."""
        mkt = LatticeMarket(mu=0.6, sigma=0.6, m=0.0, v=0.1)
        claim = LatticeClaim(payoff=_call(), maturity=1.0, steps=1)
        with pytest.raises(QOutOfRange):
            price_lattice(mkt, claim)
        with patch.object(lattice_mod.logger, "info") as info:
            result = price_lattice(mkt, LatticeClaim(payoff=_call(), maturity=1.0, steps=400))
            assert info.called
        assert 0.0 < result.q < 1.0

    def test_underlyings_replicate_themselves(self):
        claim_s = LatticeClaim(payoff=lambda s, v: s, maturity=1.0, steps=500)
        claim_v = LatticeClaim(payoff=lambda s, v: v, maturity=1.0, steps=500)
        assert price_lattice(NO_COST, claim_s).price == pytest.approx(100.0, abs=1e-8)
        assert price_lattice(NO_COST, claim_v).price == pytest.approx(100.0, abs=1e-8)

    def test_constant_payoff_is_discounted(self):
        claim = LatticeClaim(payoff=lambda s, v: np.full_like(s, 100.0), maturity=1.0, steps=100)
        for mkt in (NO_COST, COSTED):
            result = price_lattice(mkt, claim)
            expected = 100.0 * (1.0 + result.rate * claim.dt) ** -100
            assert result.price == pytest.approx(expected, rel=1e-12)
        assert price_lattice(NO_COST, claim).rate == pytest.approx(0.01, abs=1e-12)

    @pytest.mark.parametrize("cost_form", ["linear", "power"])
    def test_scaling_invariance(self, cost_form):
        """Scaling both spots and the strike scales the price."""
        base = price_lattice(
            COSTED, LatticeClaim(payoff=_call(100.0), maturity=1.0, steps=200), cost_form
        ).price
        scaled_mkt = LatticeMarket(mu=0.05, sigma=0.2, m=0.03, v=0.1, cost_const=0.1, s0=250.0)
        scaled = price_lattice(
            scaled_mkt, LatticeClaim(payoff=_call(250.0), maturity=1.0, steps=200), cost_form
        ).price
        assert scaled == pytest.approx(2.5 * base, rel=1e-12)

    def test_put_call_parity_with_costs(self):
        """call - put prices the forward payoff node for node."""
        prices = {
            name: price_lattice(
                COSTED, LatticeClaim(payoff=payoff, maturity=1.0, steps=200)
            ).price
            for name, payoff in (
                ("call", _call()),
                ("put", _put()),
                ("forward", lambda s, v: s - 100.0),
            )
        }
        assert prices["call"] - prices["put"] == pytest.approx(prices["forward"], abs=1e-10)


@pytest.mark.slow
class TestLatticeConvergence:
    """Call error against Black-Scholes at the zero-beta rate r = 0.01."""

    REFERENCE = bs_price(VanillaSpec(spot=100.0, strike=100.0, maturity=1.0, rate=0.01, vol=0.2))

    def _error(self, steps):
        claim = LatticeClaim(payoff=_call(), maturity=1.0, steps=steps)
        return abs(price_lattice(NO_COST, claim).price - self.REFERENCE)

    def _envelope(self, start):
        """Largest error over [start, 2.2 start), scaled back to ``start`` steps.

        The strike's position between nodes cycles once over such a window,
        so the envelope tracks the oscillating error's amplitude.
        """
        stride = start // 50
        return max(
            steps * self._error(steps) / start
            for steps in range(start, int(2.2 * start), stride)
        )

    def test_error_at_2000_steps(self):
        assert self._error(2000) < 5e-3

    def test_error_envelope_halves_on_doubling(self):
        assert self._envelope(1000) / self._envelope(2000) >= 1.8


class TestRiskNeutralProbability:
    """Closed-form one-step state price against replication."""

    def test_no_cost_agreement(self):
        check = risk_neutral_prob(NO_COST, 0.01)
        assert check.q_closed_form == pytest.approx(0.49)
        assert check.residual < 1e-12
        assert check.cost_form == "power"

    def test_power_form_residual_shrinks_with_dt(self):
        coarse = risk_neutral_prob(COSTED, 1e-2)
        fine = risk_neutral_prob(COSTED, 1e-4)
        assert fine.residual < coarse.residual
        assert fine.residual < 1e-3
        assert fine.q_linearized is not None

    def test_q_out_of_range(self):
        with pytest.raises(QOutOfRange):
            risk_neutral_prob(NO_COST, 36.0)

    def test_degenerate_vol_gap(self):
        mkt = LatticeMarket(mu=0.05, sigma=0.2, m=0.03, v=0.2)
        with pytest.raises(DegenerateVolatility):
            risk_neutral_prob(mkt, 0.01)

    def test_theta_representation_without_costs(self):
        assert validate_q_representation(NO_COST, 0.01) < 1e-12
        assert validate_q_representation(NO_COST, 0.0025) < 1e-12

    def test_theta_representation_with_costs(self):
        assert validate_q_representation(COSTED, 1e-4) < 10 * 1e-4
        residuals = [validate_q_representation(COSTED, dt) for dt in (1e-2, 5e-3, 2.5e-3)]
        assert residuals[0] > 0.0
        assert residuals[1] / residuals[0] <= 0.7
        assert residuals[2] / residuals[1] <= 0.7
