"""
Closed-form European prices: Black-Scholes, the heterogeneous-drift price at
the arb-cost rate, and the drift-shifted price with cost of carry.

All three are the generalized Black-Scholes formula with a cost of carry b:
value = e^{-rT} [F N(d1) - K N(d2)] for a call with forward F = S e^{bT}.
"""

import logging
import math
from dataclasses import replace
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .models import PricingResult, VanillaSpec
from .rates import arb_cost_lambdas

logger = logging.getLogger(__name__)

# Below this total volatility the forward-degenerate limit is returned.
MIN_TOTAL_VOL = 1e-12


def _d1_d2(spot: float, strike: float, maturity: float, carry: float, vol: float):
    total_vol = vol * math.sqrt(maturity)
    d1 = (math.log(spot / strike) + (carry + 0.5 * vol * vol) * maturity) / total_vol
    return d1, d1 - total_vol


def generalized_bs_price(
    spot: float,
    strike: float,
    maturity: float,
    rate: float,
    carry: float,
    vol: float,
    kind: str = "call",
) -> float:
    """
    Generalized Black-Scholes value with cost of carry ``carry``.

    Returns the intrinsic value at maturity 0 and the discounted forward
    intrinsic value when vol * sqrt(maturity) vanishes.
    """
    is_call = kind == "call"
    if maturity <= 0.0:
        return max(spot - strike, 0.0) if is_call else max(strike - spot, 0.0)
    discount = math.exp(-rate * maturity)
    forward = spot * math.exp(carry * maturity)
    if vol * math.sqrt(maturity) < MIN_TOTAL_VOL:
        gap = forward - strike if is_call else strike - forward
        return discount * max(gap, 0.0)
    d1, d2 = _d1_d2(spot, strike, maturity, carry, vol)
    if is_call:
        return discount * (forward * float(ndtr(d1)) - strike * float(ndtr(d2)))
    return discount * (strike * float(ndtr(-d2)) - forward * float(ndtr(-d1)))


def generalized_bs_delta(
    spot: float,
    strike: float,
    maturity: float,
    rate: float,
    carry: float,
    vol: float,
    kind: str = "call",
) -> float:
    """Spot delta e^{(b-r)T} N(d1) (call) or e^{(b-r)T} (N(d1) - 1) (put)."""
    is_call = kind == "call"
    if maturity <= 0.0:
        if is_call:
            return 1.0 if spot > strike else 0.0
        return -1.0 if spot < strike else 0.0
    growth = math.exp((carry - rate) * maturity)
    if vol * math.sqrt(maturity) < MIN_TOTAL_VOL:
        forward = spot * math.exp(carry * maturity)
        if is_call:
            return growth if forward > strike else 0.0
        return -growth if forward < strike else 0.0
    d1, _ = _d1_d2(spot, strike, maturity, carry, vol)
    n1 = float(ndtr(d1))
    return growth * n1 if is_call else growth * (n1 - 1.0)


def bs_price(spec: VanillaSpec) -> float:
    """Black-Scholes value of ``spec``."""
    return generalized_bs_price(
        spec.spot, spec.strike, spec.maturity, spec.rate, spec.rate, spec.vol, spec.kind
    )


def bs_delta(spec: VanillaSpec) -> float:
    return generalized_bs_delta(
        spec.spot, spec.strike, spec.maturity, spec.rate, spec.rate, spec.vol, spec.kind
    )


def hetero_bs_price(mu1: float, mu2: float, spec: VanillaSpec) -> PricingResult:
    """
    Black-Scholes price at the arb-cost rate (sqrt(mu1) + sqrt(mu2))^2.

    Args:
        mu1, mu2: Positive drift views of the two agents
        spec: Contract; its ``rate`` field is ignored

    Returns:
        PricingResult carrying r* and both lambdas in its diagnostics

    Raises:
        NonPositiveDrift: if either drift is not positive
    """
    rates = arb_cost_lambdas(mu1, mu2)
    assert rates.lambdas is not None
    priced = replace(spec, rate=rates.rate)
    price = bs_price(priced)
    logger.debug(f"Heterogeneous-drift price {price:.10g} at r*={rates.rate:.10g}")
    return PricingResult(
        price=price,
        method="hetero_bs",
        rate=rates.rate,
        diagnostics={
            "r_star": rates.rate,
            "lambda1": rates.lambdas[0],
            "lambda2": rates.lambdas[1],
            "delta": bs_delta(priced),
            "notes": list(rates.notes),
        },
    )


def drift_shifted_price(
    mu1: float, mu2: float, spec: VanillaSpec, rate: Optional[float] = None
) -> float:
    """
    Price under the drift-shifted pricing equation, carry b = mu1 - mu2 + r.

    Args:
        mu1, mu2: Drift views of the two agents
        spec: Contract; ``spec.rate`` is r unless ``rate`` overrides it
        rate: Optional override of the riskless rate
    """
    r = spec.rate if rate is None else rate
    return generalized_bs_price(
        spec.spot, spec.strike, spec.maturity, r, mu1 - mu2 + r, spec.vol, spec.kind
    )


def drift_shifted_delta(
    mu1: float, mu2: float, spec: VanillaSpec, rate: Optional[float] = None
) -> float:
    r = spec.rate if rate is None else rate
    return generalized_bs_delta(
        spec.spot, spec.strike, spec.maturity, r, mu1 - mu2 + r, spec.vol, spec.kind
    )


def bs_delta_paths(spot: np.ndarray, spec: VanillaSpec, tau: float) -> np.ndarray:
    """Black-Scholes delta of ``spec`` on an array of spots with ``tau`` years left."""
    spot = np.asarray(spot, dtype=float)
    if tau <= 0.0:
        if spec.is_call:
            return np.where(spot > spec.strike, 1.0, 0.0)
        return np.where(spot < spec.strike, -1.0, 0.0)
    total_vol = spec.vol * math.sqrt(tau)
    if total_vol < MIN_TOTAL_VOL:
        forward = spot * math.exp(spec.rate * tau)
        if spec.is_call:
            return np.where(forward > spec.strike, 1.0, 0.0)
        return np.where(forward < spec.strike, -1.0, 0.0)
    d1 = (np.log(spot / spec.strike) + (spec.rate + 0.5 * spec.vol**2) * tau) / total_vol
    n1 = ndtr(d1)
    return n1 if spec.is_call else n1 - 1.0
