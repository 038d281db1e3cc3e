"""
Path simulations of arbitrage, costed hedging and allocation replication.

Each simulator draws its paths through ``streams.run_blocks`` so results
depend only on the seed, never on the worker count.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from .closed_form import bs_delta_paths, hetero_bs_price
from .errors import InvalidParameter
from .models import CostedView, HedgeReport, HedgeState, PnLStats, VanillaSpec
from .rates import arb_cost_lambdas, costed_rate_and_yields
from .streams import (
    DEFAULT_BLOCK_SIZE,
    TAG_ALLOCATION,
    TAG_HEDGE,
    TAG_PAIR,
    run_blocks,
)

logger = logging.getLogger(__name__)

HEDGE_RULES = ("exposure", "literal")
ALLOCATION_DRIVERS = ("independent", "shared")
ALLOCATION_SUM_TOL = 1e-12


def _check_budget(steps: int, n_paths: int) -> None:
    if steps < 1:
        raise InvalidParameter(f"steps must be >= 1, got {steps}")
    if n_paths < 2:
        raise InvalidParameter(f"n_paths must be >= 2, got {n_paths}")


def summarize(values: np.ndarray, steps: int, initial_capital: float = 0.0) -> PnLStats:
    """Mean, sample variance and range of per-path values."""
    values = np.asarray(values, dtype=float)
    return PnLStats(
        mean=math.fsum(values) / len(values),
        variance=float(np.var(values, ddof=1)),
        paths=len(values),
        steps=steps,
        initial_capital=initial_capital,
        minimum=float(np.min(values)),
        maximum=float(np.max(values)),
        per_path=values,
    )


def simulate_pair_arbitrage(
    mu1: float,
    mu2: float,
    sigma: float,
    maturity: float = 1.0,
    steps: int = 1000,
    n_paths: int = 10_000,
    seed: int = 0,
    workers: Optional[int] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> PnLStats:
    """
    Zero-capital long/short strategy on two assets sharing one Brownian path.

    The strategy is long $1 of asset 2 and short $1 of asset 1, rebalanced
    every step, so each step earns R2 - R1. With equal volatilities the
    difference is (e^{mu2 dt} - e^{mu1 dt}) times a positive path factor and
    the terminal P&L tends to (mu2 - mu1) T with vanishing variance.

    Args:
        mu1, mu2: Drifts of the two assets
        sigma: Shared volatility
        maturity: Horizon T in years
        steps: Rebalancing steps
        n_paths: Number of paths
        seed: 64-bit seed
        workers: Thread cap
        block_size: Paths per random-stream block

    Returns:
        PnLStats of the terminal P&L, per-path values attached
    """
    if sigma <= 0:
        raise InvalidParameter(f"sigma must be positive, got {sigma}")
    if maturity <= 0:
        raise InvalidParameter(f"maturity must be positive, got {maturity}")
    _check_budget(steps, n_paths)
    dt = maturity / steps
    vol_step = sigma * math.sqrt(dt)
    drift_gap = math.exp(mu2 * dt) - math.exp(mu1 * dt)

    def _block(rng: np.random.Generator, start: int, count: int) -> np.ndarray:
        pnl = np.zeros(count)
        for _ in range(steps):
            shock = np.exp(vol_step * rng.standard_normal(count) - 0.5 * sigma**2 * dt)
            pnl += shock * drift_gap
        return pnl

    pnl = run_blocks(_block, n_paths, seed, TAG_PAIR, block_size, workers)
    stats = summarize(pnl, steps)
    logger.info(
        f"Pair arbitrage P&L mean {stats.mean:.10g}, variance {stats.variance:.3g} "
        f"({n_paths} paths, {steps} steps)"
    )
    return stats


def _hedge_holdings(delta: np.ndarray, lam: float, rule: str) -> np.ndarray:
    if rule == "exposure":
        return (2.0 - lam) * delta / lam
    return (2.0 + lam) * delta / lam


def simulate_costed_hedge(
    mu1: float,
    mu2: float,
    sigma: float,
    spec: VanillaSpec,
    steps: int = 500,
    n_paths: int = 10_000,
    seed: int = 0,
    agent: int = 1,
    rule: str = "exposure",
    lambda_override: Optional[float] = None,
    workers: Optional[int] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> HedgeReport:
    """
    Replicate a short option under velocity arb-costs on one agent's paths.

    The option is priced at the arb-cost rate r*. Agent ``agent`` holds
    ``a`` units of stock whose cost-adjusted exposure is
    lambda a - (1 - lambda) delta; the rest of the portfolio sits in the
    bond at r*. The exposure rule picks ``a`` so the exposure equals delta;
    the literal rule uses a = (2 + lambda) delta / lambda and over-hedges.

    Args:
        mu1, mu2: Positive drift views
        sigma: Volatility of the stock
        spec: Contract (its ``rate`` and ``vol`` are replaced by r* and ``sigma``)
        steps: Hedge rebalancing steps
        n_paths: Number of paths
        seed: 64-bit seed
        agent: 1 or 2; the stock follows that agent's drift and lambda
        rule: ``"exposure"`` or ``"literal"``
        lambda_override: Use this lambda in the holdings rule instead
        workers: Thread cap
        block_size: Paths per random-stream block

    Returns:
        HedgeReport of the terminal replication error (portfolio minus payoff)

    Raises:
        NonPositiveDrift: if either drift is not positive
    """
    if rule not in HEDGE_RULES:
        raise InvalidParameter(f"rule must be one of {HEDGE_RULES}, got {rule}")
    if agent not in (1, 2):
        raise InvalidParameter(f"agent must be 1 or 2, got {agent}")
    if lambda_override is not None and lambda_override <= 0:
        raise InvalidParameter(f"lambda must be positive, got {lambda_override}")
    _check_budget(steps, n_paths)
    rates = arb_cost_lambdas(mu1, mu2)
    assert rates.lambdas is not None
    lam = rates.lambdas[agent - 1] if lambda_override is None else lambda_override
    drift = mu1 if agent == 1 else mu2
    priced = VanillaSpec(
        spot=spec.spot,
        strike=spec.strike,
        maturity=spec.maturity,
        rate=rates.rate,
        vol=sigma,
        kind=spec.kind,
    )
    initial_price = hetero_bs_price(mu1, mu2, priced).price
    r_star = rates.rate
    dt = priced.maturity / steps
    vol_step = sigma * math.sqrt(dt)
    log_drift = (drift - 0.5 * sigma**2) * dt

    def _block(rng: np.random.Generator, start: int, count: int) -> np.ndarray:
        spot = np.full(count, priced.spot)
        value = np.full(count, initial_price)
        gap = np.zeros(count)
        holdings = np.zeros(count)
        exposure = np.zeros(count)
        bonds = np.full(count, initial_price)
        for k in range(steps):
            t = k * dt
            delta = bs_delta_paths(spot, priced, priced.maturity - t)
            holdings = _hedge_holdings(delta, lam, rule)
            bond_now = math.exp(r_star * t)
            bond_next = math.exp(r_star * (t + dt))
            # Rebalance: the stock trade is paid out of the bond account.
            target = lam * holdings - (1.0 - lam) * delta
            bonds = bonds - (target - exposure) * spot / bond_now
            exposure = target
            marked = exposure * spot + bonds * bond_now
            gap = np.maximum(gap, np.abs(value - marked) / np.maximum(np.abs(value), 1.0))
            spot_next = spot * np.exp(log_drift + vol_step * rng.standard_normal(count))
            value = value + exposure * (spot_next - spot) + bonds * (bond_next - bond_now)
            spot = spot_next
        error = value - priced.payoff(spot)
        return np.column_stack([error, value, holdings, bonds, gap])

    result = run_blocks(_block, n_paths, seed, TAG_HEDGE, block_size, workers)
    error = result[:, 0]
    stats = summarize(error, steps, initial_capital=initial_price)
    report = HedgeReport(
        stats=stats,
        state=HedgeState(
            holdings=(result[:, 2], result[:, 3]),
            portfolio_value=result[:, 1],
            replication_error=error,
        ),
        initial_price=initial_price,
        rate=r_star,
        lambda_used=lam,
        rule=rule,
        rms_error=math.sqrt(math.fsum(error * error) / len(error)),
        mean_abs_error=math.fsum(np.abs(error)) / len(error),
        max_self_financing_gap=float(np.max(result[:, 4])),
    )
    logger.info(
        f"Costed hedge ({rule}, lambda={lam:.6g}) rms error {report.rms_error:.6g} "
        f"after {steps} steps"
    )
    return report


def verify_allocation(
    view1: CostedView,
    view2: CostedView,
    alpha: Sequence[float],
    maturity: float = 1.0,
    steps: int = 1000,
    n_paths: int = 10_000,
    seed: int = 0,
    driver: str = "independent",
    workers: Optional[int] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> PnLStats:
    """
    Replicate the power claim w1^a1 w2^a2 and report ln(P_T / G_T).

    Both wealth processes start at 1 with their view's drift and the shared
    base volatility.

    With ``driver="independent"`` each wealth process has its own Gaussian
    draws. The portfolio is rebalanced to weights ``alpha`` every step and
    pays the transaction yields a1 C1 + a2 C2 per unit time while both
    weights are nonzero, so the log error drifts at
    a1 a2 sigma^2 - a1 C1 - a2 C2 and vanishes at the allocation roots. A
    corner allocation is a buy-and-hold of one wealth process.

    With ``driver="shared"`` one Brownian path moves both wealth processes
    and both costed assets (effective drift m and volatility v). The
    portfolio holds the exposures P (sigma - v2) / (v1 - v2) and
    P (v1 - sigma) / (v1 - v2) in the costed assets, which match the
    claim's diffusion for every allocation. The log error then drifts at
    (exposure-weighted m) - a1 mu1 - a2 mu2, first order in ``alpha``.

    Returns:
        PnLStats of the replication error ln(P_T / G_T)

    Raises:
        HeterogeneityRequired, DegenerateVolatility: from the yield computation
        InvalidParameter: for a bad allocation, budget or driver
    """
    if driver not in ALLOCATION_DRIVERS:
        raise InvalidParameter(f"driver must be one of {ALLOCATION_DRIVERS}, got {driver}")
    if len(alpha) != 2:
        raise InvalidParameter(f"alpha must be a pair, got {alpha!r}")
    a1, a2 = float(alpha[0]), float(alpha[1])
    if abs(a1 + a2 - 1.0) > ALLOCATION_SUM_TOL:
        raise InvalidParameter(f"allocation must sum to 1, got {a1 + a2}")
    if maturity <= 0:
        raise InvalidParameter(f"maturity must be positive, got {maturity}")
    _check_budget(steps, n_paths)
    yields = costed_rate_and_yields(view1, view2).yields
    assert yields is not None
    sigma = view1.base.vol
    dt = maturity / steps
    vol_step = sigma * math.sqrt(dt)
    drifts = ((view1.base.drift - 0.5 * sigma**2) * dt, (view2.base.drift - 0.5 * sigma**2) * dt)

    if driver == "shared":
        v1, v2 = view1.eff_vol, view2.eff_vol
        weights = ((sigma - v2) / (v1 - v2), (v1 - sigma) / (v1 - v2))
        costed = (
            ((view1.eff_drift - 0.5 * v1**2) * dt, v1 * math.sqrt(dt)),
            ((view2.eff_drift - 0.5 * v2**2) * dt, v2 * math.sqrt(dt)),
        )
        logger.debug(f"Shared-driver exposures {weights[0]:.6g}, {weights[1]:.6g} of wealth")

        def _block(rng: np.random.Generator, start: int, count: int) -> np.ndarray:
            log_w1 = np.zeros(count)
            log_w2 = np.zeros(count)
            log_p = np.zeros(count)
            for _ in range(steps):
                shock = rng.standard_normal(count)
                log_w1 += drifts[0] + vol_step * shock
                log_w2 += drifts[1] + vol_step * shock
                growth1 = np.expm1(costed[0][0] + costed[0][1] * shock)
                growth2 = np.expm1(costed[1][0] + costed[1][1] * shock)
                log_p += np.log1p(weights[0] * growth1 + weights[1] * growth2)
            return log_p - (a1 * log_w1 + a2 * log_w2)

    else:
        corner = a1 == 0.0 or a2 == 0.0
        carry = 0.0 if corner else (a1 * yields[0] + a2 * yields[1]) * dt
        logger.debug(f"Allocation ({a1:.6g}, {a2:.6g}) with yield carry {carry:.6g} per step")

        def _block(rng: np.random.Generator, start: int, count: int) -> np.ndarray:
            log_w1 = np.zeros(count)
            log_w2 = np.zeros(count)
            log_p = np.zeros(count)
            for _ in range(steps):
                shocks = rng.standard_normal((2, count))
                step1 = drifts[0] + vol_step * shocks[0]
                step2 = drifts[1] + vol_step * shocks[1]
                log_w1 += step1
                log_w2 += step2
                if a2 == 0.0:
                    log_p += step1
                elif a1 == 0.0:
                    log_p += step2
                else:
                    log_p += np.log1p(a1 * np.expm1(step1) + a2 * np.expm1(step2) - carry)
            return log_p - (a1 * log_w1 + a2 * log_w2)

    error = run_blocks(_block, n_paths, seed, TAG_ALLOCATION, block_size, workers)
    stats = summarize(error, steps, initial_capital=1.0)
    logger.info(
        f"Allocation ({a1:.6g}, {a2:.6g}), {driver} driver: "
        f"mean replication error {stats.mean:.6g}"
    )
    return stats
