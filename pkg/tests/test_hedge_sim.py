"""Test arbitrage, costed-hedge and allocation simulations."""

import math

import numpy as np
import pytest

from arbcost_pricing.errors import HeterogeneityRequired, InvalidParameter, NonPositiveDrift
from arbcost_pricing.hedge_sim import (
    simulate_costed_hedge,
    simulate_pair_arbitrage,
    summarize,
    verify_allocation,
)
from arbcost_pricing.models import AgentView, CostedView, VanillaSpec

SPEC = VanillaSpec(spot=100.0, strike=100.0, maturity=1.0, vol=0.2)
VIEW1 = CostedView(AgentView(0.05, 0.2), trans_rate=1.5, mix=0.3)
VIEW2 = CostedView(AgentView(0.08, 0.2), trans_rate=2.0, mix=0.5)


def _shared_drift(a1: float) -> float:
    """Log-error drift of the shared-driver portfolio over one year."""
    v1, v2 = VIEW1.eff_vol, VIEW2.eff_vol
    portfolio = ((0.2 - v2) * VIEW1.eff_drift + (v1 - 0.2) * VIEW2.eff_drift) / (v1 - v2)
    return portfolio - a1 * 0.05 - (1.0 - a1) * 0.08


def test_summarize():
    stats = summarize(np.array([1.0, 2.0, 3.0]), steps=4, initial_capital=1.5)
    assert stats.mean == 2.0
    assert stats.variance == 1.0
    assert stats.minimum == 1.0
    assert stats.maximum == 3.0
    assert stats.initial_capital == 1.5
    assert stats.per_path is not None


class TestPairArbitrage:
    """Zero-capital long/short strategy on equal-vol assets."""

    def test_pnl_tends_to_drift_gap(self):
        stats = simulate_pair_arbitrage(0.03, 0.07, 0.2, steps=1000, n_paths=2_000, seed=1)
        assert stats.mean == pytest.approx(0.04, abs=1e-3)
        assert stats.minimum is not None and stats.minimum > 0.0
        assert stats.initial_capital == 0.0

    def test_variance_vanishes_with_finer_steps(self):
        coarse = simulate_pair_arbitrage(0.03, 0.07, 0.2, steps=100, n_paths=2_000, seed=2)
        fine = simulate_pair_arbitrage(0.03, 0.07, 0.2, steps=1000, n_paths=2_000, seed=2)
        assert fine.variance < coarse.variance / 5.0

    def test_equal_drifts_earn_nothing(self):
        stats = simulate_pair_arbitrage(0.05, 0.05, 0.2, steps=10, n_paths=100, seed=3)
        assert stats.mean == 0.0
        assert stats.variance == 0.0

    @pytest.mark.slow
    def test_arbitrage_certificate_on_fine_steps(self):
        """Every path earns (mu2 - mu1) T from zero capital."""
        fine = simulate_pair_arbitrage(0.03, 0.07, 0.2, steps=10_000, n_paths=1_000, seed=14)
        half = simulate_pair_arbitrage(0.03, 0.07, 0.2, steps=5_000, n_paths=1_000, seed=14)
        assert np.all(np.abs(fine.per_path - 0.04) < 5e-3)
        assert fine.minimum > 0.0
        assert fine.mean == pytest.approx(0.04, abs=1e-3)
        assert fine.variance < 1e-5
        assert half.variance / fine.variance >= 1.8

    def test_worker_independent(self):
        a = simulate_pair_arbitrage(0.03, 0.07, 0.2, steps=50, n_paths=500, seed=4, block_size=64)
        b = simulate_pair_arbitrage(
            0.03, 0.07, 0.2, steps=50, n_paths=500, seed=4, block_size=64, workers=3
        )
        assert np.array_equal(a.per_path, b.per_path)

    @pytest.mark.parametrize(
        "kwargs", [{"sigma": 0.0}, {"maturity": 0.0}, {"steps": 0}, {"n_paths": 1}]
    )
    def test_invalid_inputs(self, kwargs):
        params = {"mu1": 0.03, "mu2": 0.07, "sigma": 0.2, **kwargs}
        with pytest.raises(InvalidParameter):
            simulate_pair_arbitrage(**params)


class TestCostedHedge:
    """Replicating a short option at the arb-cost rate."""

    def test_exposure_rule_replicates(self):
        report = simulate_costed_hedge(
            0.04, 0.09, 0.2, SPEC, steps=250, n_paths=2_000, seed=5
        )
        assert report.rate == pytest.approx(0.25)
        assert report.lambda_used == pytest.approx(2.5)
        assert report.rule == "exposure"
        assert report.initial_price == pytest.approx(23.01, abs=0.05)
        assert report.rms_error < 0.1 * report.initial_price
        assert abs(report.stats.mean) < 0.5
        assert report.max_self_financing_gap < 1e-9

    def test_zero_volatility_hedge_is_exact(self):
        """With almost no noise the call is a forward and delta stays at one."""
        report = simulate_costed_hedge(0.04, 0.09, 1e-6, SPEC, steps=100, n_paths=50, seed=15)
        assert report.initial_price == pytest.approx(100.0 - 100.0 * math.exp(-0.25), abs=1e-6)
        assert report.rms_error < 1e-4
        assert report.max_self_financing_gap < 1e-9

    @pytest.mark.slow
    def test_error_shrinks_with_rebalancing(self):
        coarse = simulate_costed_hedge(0.04, 0.09, 0.2, SPEC, steps=500, n_paths=2_000, seed=16)
        fine = simulate_costed_hedge(0.04, 0.09, 0.2, SPEC, steps=2000, n_paths=2_000, seed=16)
        assert coarse.mean_abs_error / fine.mean_abs_error >= 1.5

    @pytest.mark.slow
    def test_unit_lambda_error_scales_with_root_dt(self):
        """lambda = 1 is the classic delta hedge; its error std goes like steps^-1/2."""
        grid = (100, 400, 1600)
        stds = [
            math.sqrt(
                simulate_costed_hedge(
                    0.04, 0.09, 0.2, SPEC, steps=n, n_paths=2_000, seed=19, lambda_override=1.0
                ).stats.variance
            )
            for n in grid
        ]
        assert stds[0] > stds[1] > stds[2]
        exponent = math.log(stds[0] / stds[2]) / math.log(grid[2] / grid[0])
        assert exponent == pytest.approx(0.5, abs=0.15)

    def test_literal_rule_over_hedges(self):
        exposure = simulate_costed_hedge(
            0.04, 0.09, 0.2, SPEC, steps=100, n_paths=1_000, seed=6
        )
        literal = simulate_costed_hedge(
            0.04, 0.09, 0.2, SPEC, steps=100, n_paths=1_000, seed=6, rule="literal"
        )
        assert literal.rms_error > 2.0 * exposure.rms_error

    def test_second_agent_and_override(self):
        report = simulate_costed_hedge(
            0.04, 0.09, 0.2, SPEC, steps=50, n_paths=200, seed=7, agent=2
        )
        assert report.lambda_used == pytest.approx(5.0 / 3.0)
        override = simulate_costed_hedge(
            0.04, 0.09, 0.2, SPEC, steps=50, n_paths=200, seed=7, lambda_override=1.0
        )
        assert override.lambda_used == 1.0

    def test_state_shapes(self):
        report = simulate_costed_hedge(0.04, 0.09, 0.2, SPEC, steps=20, n_paths=100, seed=8)
        assert report.state.replication_error.shape == (100,)
        assert report.state.portfolio_value.shape == (100,)
        assert len(report.state.holdings) == 2
        assert report.to_dict()["error"]["paths"] == 100

    @pytest.mark.parametrize(
        "kwargs", [{"rule": "naive"}, {"agent": 3}, {"lambda_override": 0.0}, {"steps": 0}]
    )
    def test_invalid_inputs(self, kwargs):
        with pytest.raises(InvalidParameter):
            simulate_costed_hedge(0.04, 0.09, 0.2, SPEC, n_paths=10, **kwargs)

    def test_non_positive_drift(self):
        with pytest.raises(NonPositiveDrift):
            simulate_costed_hedge(-0.01, 0.09, 0.2, SPEC, steps=5, n_paths=10)


class TestVerifyAllocation:
    """Constant-mix replication of the power claim."""

    def test_corner_allocation_is_exact(self):
        stats = verify_allocation(VIEW1, VIEW2, (1.0, 0.0), steps=50, n_paths=200, seed=9)
        assert stats.mean == 0.0
        assert stats.variance == 0.0
        assert stats.initial_capital == 1.0

    def test_interior_root_error_is_small(self):
        """At a root of the allocation equation the log error has no drift."""
        from arbcost_pricing.rates import costed_rate_and_yields, solve_allocation_costed

        yields = costed_rate_and_yields(VIEW1, VIEW2).yields
        root = solve_allocation_costed(yields[0], yields[1], 0.2).roots[0]
        stats = verify_allocation(
            VIEW1, VIEW2, (root, 1.0 - root), steps=1000, n_paths=2_000, seed=10
        )
        assert abs(stats.mean) < 5e-3

    def test_non_root_allocation_drifts(self):
        """Away from a root the mean error tracks residual * T."""
        from arbcost_pricing.rates import allocation_residual_costed, costed_rate_and_yields

        yields = costed_rate_and_yields(VIEW1, VIEW2).yields
        residual = allocation_residual_costed(0.5, yields[0], yields[1], 0.2)
        stats = verify_allocation(VIEW1, VIEW2, (0.5, 0.5), steps=1000, n_paths=2_000, seed=11)
        assert stats.mean == pytest.approx(residual, abs=5e-3)
        assert abs(residual) > 0.05

    @pytest.mark.slow
    def test_roots_beat_perturbed_allocations(self):
        """At 4000 steps each root tracks the claim at least twice as well as root +/- 0.1."""
        from arbcost_pricing.rates import costed_rate_and_yields, solve_allocation_costed

        yields = costed_rate_and_yields(VIEW1, VIEW2).yields
        for root in solve_allocation_costed(yields[0], yields[1], 0.2).roots:
            errors = {}
            for shift in (0.0, 0.1, -0.1):
                a1 = root + shift
                stats = verify_allocation(
                    VIEW1, VIEW2, (a1, 1.0 - a1), steps=4000, n_paths=1_000, seed=20
                )
                errors[shift] = abs(stats.mean)
            assert errors[0.0] <= 0.5 * min(errors[0.1], errors[-0.1])

    def test_shared_driver_matches_claim_diffusion(self):
        stats = verify_allocation(
            VIEW1, VIEW2, (0.5, 0.5), steps=1000, n_paths=500, seed=22, driver="shared"
        )
        assert stats.mean == pytest.approx(_shared_drift(0.5), abs=1e-4)
        assert math.sqrt(stats.variance) < 1e-3

    @pytest.mark.slow
    def test_shared_driver_error_is_first_order_in_allocation(self):
        """The costed portfolio does not depend on alpha; only the claim moves."""
        from arbcost_pricing.rates import costed_rate_and_yields, solve_allocation_costed

        yields = costed_rate_and_yields(VIEW1, VIEW2).yields
        root = solve_allocation_costed(yields[0], yields[1], 0.2).roots[0]
        means = {}
        for shift in (-0.1, 0.0, 0.1):
            a1 = root + shift
            means[shift] = verify_allocation(
                VIEW1, VIEW2, (a1, 1.0 - a1), steps=4000, n_paths=500, seed=23,
                driver="shared",
            ).mean
        # d(error)/d(alpha1) = (mu2 - mu1) T
        assert means[0.1] - means[0.0] == pytest.approx(0.1 * 0.03, abs=1e-9)
        assert means[0.0] - means[-0.1] == pytest.approx(0.1 * 0.03, abs=1e-9)
        assert means[0.0] == pytest.approx(_shared_drift(root), abs=1e-4)

    def test_unknown_driver(self):
        with pytest.raises(InvalidParameter):
            verify_allocation(VIEW1, VIEW2, (0.5, 0.5), steps=5, n_paths=10, driver="common")

    def test_allocation_must_sum_to_one(self):
        with pytest.raises(InvalidParameter):
            verify_allocation(VIEW1, VIEW2, (0.5, 0.6))
        with pytest.raises(InvalidParameter):
            verify_allocation(VIEW1, VIEW2, (1.0,))

    def test_identical_costs_rejected(self):
        other = CostedView(AgentView(0.08, 0.2), trans_rate=1.5, mix=0.3)
        with pytest.raises(HeterogeneityRequired):
            verify_allocation(VIEW1, other, (0.5, 0.5), steps=5, n_paths=10)


def test_allocation_error_std_error_is_reported():
    stats = verify_allocation(VIEW1, VIEW2, (0.5, 0.5), steps=10, n_paths=100, seed=12)
    assert stats.std_error == pytest.approx(math.sqrt(stats.variance / 100))
