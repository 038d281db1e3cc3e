"""
Implied riskless rates, transaction yields, arb-cost lambdas and allocations.
"""

import logging
import math
from typing import List, Tuple

from .errors import (
    DegenerateVolatility,
    HeterogeneityRequired,
    InvalidParameter,
    NonPositiveDrift,
    NoRealRoot,
)
from .models import (
    TOL_VOL,
    AdjustedParams,
    AllocationSolution,
    CostedView,
    LatticeMarket,
    RateResult,
)

logger = logging.getLogger(__name__)

DISCRIMINANT_TOL = 1e-12


def black72_rate(
    mu1: float, sigma1: float, mu2: float, sigma2: float, tol_vol: float = TOL_VOL
) -> float:
    """
    Zero-beta rate of a two-asset market without a bond.

    Args:
        mu1, sigma1: Drift and volatility of the first asset
        mu2, sigma2: Drift and volatility of the second asset
        tol_vol: Minimum volatility gap

    Returns:
        r = (mu1 sigma2 - mu2 sigma1) / (sigma2 - sigma1)

    Raises:
        DegenerateVolatility: when the volatilities coincide
    """
    gap = sigma2 - sigma1
    if abs(gap) <= tol_vol:
        raise DegenerateVolatility(
            f"volatilities {sigma1} and {sigma2} coincide; the implied rate explodes"
        )
    return (mu1 * sigma2 - mu2 * sigma1) / gap


def costed_rate_and_yields(
    view1: CostedView,
    view2: CostedView,
    use_linear_cost: bool = False,
    tol_vol: float = TOL_VOL,
) -> RateResult:
    """
    Rate and transaction yields of two agents trading through cost trees.

    r = (mu1 v2 - mu2 v1) / (v2 - v1) and
    C_j = v_j (mu1 - mu2) / (v1 - v2) - sigma (m1 - m2) / (v1 - v2),
    with (m_j, v_j) the effective drift and volatility of each view.

    Args:
        view1, view2: Costed views sharing one base volatility
        use_linear_cost: Evaluate with the first-order (m, v) instead
        tol_vol: Minimum gap between effective volatilities
    """
    sigma = view1.base.vol
    if abs(view2.base.vol - sigma) > 1e-12:
        raise InvalidParameter(
            f"views must share one base vol, got {sigma} and {view2.base.vol}"
        )
    if view1.trans_rate == view2.trans_rate and view1.mix == view2.mix:
        raise HeterogeneityRequired(
            "views share transaction rate and mix; effective vols cannot differ"
        )
    mu1, mu2 = view1.base.drift, view2.base.drift
    if use_linear_cost:
        m1, v1 = view1.linear_cost_drift, view1.linear_cost_vol
        m2, v2 = view2.linear_cost_drift, view2.linear_cost_vol
    else:
        m1, v1 = view1.eff_drift, view1.eff_vol
        m2, v2 = view2.eff_drift, view2.eff_vol

    rate = black72_rate(mu1, v1, mu2, v2, tol_vol=tol_vol)
    gap = v1 - v2
    yields = (
        v1 * (mu1 - mu2) / gap - sigma * (m1 - m2) / gap,
        v2 * (mu1 - mu2) / gap - sigma * (m1 - m2) / gap,
    )
    logger.debug(f"Costed rate {rate:.10g}, yields {yields[0]:.10g}, {yields[1]:.10g}")
    notes = ["first-order cost moments"] if use_linear_cost else []
    return RateResult(rate=rate, yields=yields, notes=notes)


def allocation_residual_costed(alpha: float, cy1: float, cy2: float, sigma: float) -> float:
    """alpha1 alpha2 sigma^2 - C1 alpha1 - C2 alpha2 with alpha2 = 1 - alpha1."""
    alpha2 = 1.0 - alpha
    return alpha * alpha2 * sigma**2 - cy1 * alpha - cy2 * alpha2


def allocation_residual_nocost(alpha: float, sigma1: float, sigma2: float) -> float:
    """Cost-free allocation condition, -alpha1 alpha2 (sigma1 - sigma2)^2 / 2."""
    alpha2 = 1.0 - alpha
    return (
        0.5 * alpha * (alpha - 1.0) * sigma1**2
        + 0.5 * alpha2 * (alpha2 - 1.0) * sigma2**2
        + alpha * alpha2 * sigma1 * sigma2
    )


def _quadratic_roots(a: float, b: float, c: float, disc: float) -> List[float]:
    if disc <= 0.0:
        return [-b / (2.0 * a)]
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return [0.0]
    return sorted({q / a, c / q})


def solve_allocation_costed(
    cy1: float, cy2: float, sigma: float, strict: bool = False
) -> AllocationSolution:
    """
    Solve -sigma^2 a^2 + (sigma^2 - C1 + C2) a - C2 = 0 for the first weight.

    Args:
        cy1, cy2: Transaction yields of the two agents
        sigma: Shared volatility
        strict: Raise NoRealRoot instead of reporting it

    Returns:
        All real roots with their substitution residuals. A negative
        discriminant is reported through ``status="no_real_root"``.
    """
    if sigma <= 0:
        raise InvalidParameter(f"sigma must be positive, got {sigma}")
    a = -(sigma**2)
    b = sigma**2 - cy1 + cy2
    c = -cy2
    disc = b * b - 4.0 * a * c
    if disc < -DISCRIMINANT_TOL:
        message = f"allocation discriminant {disc:.6g} is negative"
        if strict:
            raise NoRealRoot(message)
        logger.warning(message)
        return AllocationSolution(discriminant=disc, status="no_real_root")
    roots = _quadratic_roots(a, b, c, disc)
    residuals = [allocation_residual_costed(r, cy1, cy2, sigma) for r in roots]
    return AllocationSolution(roots=roots, residuals=residuals, discriminant=disc)


def solve_allocation_nocost(
    sigma1: float, sigma2: float, tol_vol: float = TOL_VOL
) -> AllocationSolution:
    """Allocations of the cost-free market: {0, 1}, or every weight when vols coincide."""
    if sigma1 <= 0 or sigma2 <= 0:
        raise InvalidParameter("volatilities must be positive")
    if abs(sigma1 - sigma2) <= tol_vol:
        return AllocationSolution(degenerate=True, status="degenerate")
    roots = [0.0, 1.0]
    residuals = [allocation_residual_nocost(r, sigma1, sigma2) for r in roots]
    return AllocationSolution(roots=roots, residuals=residuals)


def arb_cost_lambdas(mu1: float, mu2: float) -> RateResult:
    """
    Rate and arb-cost lambdas of two drift views on one asset.

    r* = (sqrt(mu1) + sqrt(mu2))^2 and lambda_j = (sqrt(mu1) + sqrt(mu2)) / sqrt(mu_j).

    Raises:
        NonPositiveDrift: if either drift is not positive
    """
    if mu1 <= 0 or mu2 <= 0:
        raise NonPositiveDrift(f"drifts must be positive, got {mu1} and {mu2}")
    root_sum = math.sqrt(mu1) + math.sqrt(mu2)
    rate = root_sum * root_sum
    lambdas = (root_sum / math.sqrt(mu1), root_sum / math.sqrt(mu2))
    notes: List[str] = []
    if rate > max(mu1, mu2):
        notes.append("rate exceeds both drifts")
        logger.info(f"Arb-cost rate {rate:.6g} exceeds both drifts {mu1:g}, {mu2:g}")
    return RateResult(rate=rate, lambdas=lambdas, bond_lambda=1.0, notes=notes)


def implied_rate_from_lambdas(
    mu1: float, mu2: float, lambda1: float, lambda2: float
) -> float:
    """Generalized Black rate r = (mu2 - mu1) lambda1 lambda2 / (lambda1 - lambda2)."""
    if abs(lambda1 - lambda2) <= TOL_VOL:
        raise HeterogeneityRequired("equal lambdas leave the rate undetermined")
    return (mu2 - mu1) * lambda1 * lambda2 / (lambda1 - lambda2)


def adjusted_params(mkt: LatticeMarket, tol_vol: float = TOL_VOL) -> AdjustedParams:
    """
    Arb-cost adjusted drifts and volatilities of the lattice market.

    mu* = mu (1 + c mu / sigma)(1 + c sigma / 2), sigma* = sigma + c mu, and
    likewise for (m, v); r* is the zero-beta rate of the adjusted pair and
    theta* = (mu* - r*) / sigma*.
    """
    c = mkt.cost_const
    mu_star = mkt.mu * (1.0 + c * mkt.mu / mkt.sigma) * (1.0 + c * mkt.sigma / 2.0)
    m_star = mkt.m * (1.0 + c * mkt.m / mkt.v) * (1.0 + c * mkt.v / 2.0)
    sigma_star = mkt.sigma + c * mkt.mu
    v_star = mkt.v + c * mkt.m
    if abs(sigma_star) <= tol_vol:
        raise DegenerateVolatility(f"adjusted vol of S vanishes ({sigma_star})")
    r_star = black72_rate(mu_star, sigma_star, m_star, v_star, tol_vol=tol_vol)
    theta_star = (mu_star - r_star) / sigma_star
    return AdjustedParams(
        mu_star=mu_star,
        m_star=m_star,
        sigma_star=sigma_star,
        v_star=v_star,
        r_star=r_star,
        theta_star=theta_star,
    )


def market_price_of_risk(params: AdjustedParams) -> Tuple[float, float]:
    """Excess drift per unit vol of both adjusted assets; equal by construction."""
    return (
        (params.mu_star - params.r_star) / params.sigma_star,
        (params.m_star - params.r_star) / params.v_star,
    )
