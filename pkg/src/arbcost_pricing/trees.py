"""
Discrete pricing trees and their diffusion limits.

Covers the heterogeneous-belief binomial step, the moment-matching step
family, the four-branch transaction-cost step, the shared-coin steps of the
two-asset lattice, seeded terminal-price simulation and the lognormal limit
moments these trees converge to.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from .errors import InvalidParameter, StepTooCoarse
from .models import (
    AgentView,
    CostedView,
    GBMParams,
    LatticeMarket,
    QuadrinomialStep,
    TreeStepParams,
)
from .streams import DEFAULT_BLOCK_SIZE, TAG_JOINT, TAG_TREE, block_generator, run_blocks

logger = logging.getLogger(__name__)

Step = Union[TreeStepParams, QuadrinomialStep]


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise StepTooCoarse(f"dt must be positive, got {dt}")


def _make_step(p: float, up: float, down: float, dt: float) -> TreeStepParams:
    if not 0.0 < p < 1.0:
        raise StepTooCoarse(f"p_up={p:.6g} outside (0, 1) at dt={dt:g}")
    if down <= 0.0:
        raise StepTooCoarse(f"down_factor={down:.6g} not positive at dt={dt:g}")
    return TreeStepParams(p_up=p, up_factor=up, down_factor=down, dt=dt)


def symmetric_step(mu: float, sigma: float, dt: float) -> TreeStepParams:
    """Step with tilt ((mu - sigma^2/2) / (2 sigma)) sqrt(dt).

    The branch factors are the non-cost branches of the four-branch tree,
    1 +/- sigma sqrt(dt) + sigma^2 dt / 2, which makes the mean factor exactly
    1 + mu dt.
    """
    _check_dt(dt)
    if sigma <= 0:
        raise InvalidParameter(f"sigma must be positive, got {sigma}")
    root = math.sqrt(dt)
    p = 0.5 + ((mu - 0.5 * sigma**2) / (2.0 * sigma)) * root
    s = sigma * root
    return _make_step(p, 1.0 + s + 0.5 * s * s, 1.0 - s + 0.5 * s * s, dt)


def step_params(view: AgentView, dt: float) -> TreeStepParams:
    """
    Binomial step for one agent's view.

    Args:
        view: Agent view; when it carries (prob_base, prob_tilt, up_drift,
              down_drift) the tilted-probability step is built, otherwise the
              symmetric (mu, sigma) step
        dt: Step length in years

    Returns:
        The step's (p, u, d) triple

    Raises:
        StepTooCoarse: if p leaves (0, 1) or the down factor is not positive
    """
    _check_dt(dt)
    if not view.has_tree_parameters:
        return symmetric_step(view.drift, view.vol, dt)

    assert view.up_drift is not None and view.down_drift is not None
    root = math.sqrt(dt)
    p = view.prob_base + view.prob_tilt * root
    if not 0.0 < p < 1.0:
        raise StepTooCoarse(f"p_up={p:.6g} outside (0, 1) at dt={dt:g}")
    up = 1.0 + view.up_drift * dt + math.sqrt((1.0 - p) / p) * view.vol * root
    down = 1.0 + view.down_drift * dt - math.sqrt(p / (1.0 - p)) * view.vol * root
    logger.debug(f"Tilted step at dt={dt:g}: p={p:.8g}, u={up:.8g}, d={down:.8g}")
    return _make_step(p, up, down, dt)


def moment_match_step(
    mu: float,
    sigma: float,
    dt: float,
    up_drift: float = 0.0,
    down_drift: float = 0.0,
) -> TreeStepParams:
    """
    Step from the moment-matching family u = 1 + a dt + sigma sqrt(dt),
    d = 1 + c dt - sigma sqrt(dt), p = 1/2 + ((mu - (a + c)/2) / (2 sigma)) sqrt(dt).

    With a = c = 0 (the default) both moment conditions hold exactly. With
    a = c = sigma^2/2 the tilt equals the symmetric step's tilt.

    Args:
        mu: Drift per year
        sigma: Volatility per sqrt(year)
        dt: Step length in years
        up_drift: The ``a`` correction of the up factor
        down_drift: The ``c`` correction of the down factor

    Returns:
        Step whose mean and second moment match 1 + mu dt and
        1 + (2 mu + sigma^2) dt up to O(dt^1.5)
    """
    _check_dt(dt)
    if sigma <= 0:
        raise InvalidParameter(f"sigma must be positive, got {sigma}")
    root = math.sqrt(dt)
    tilt = (mu - 0.5 * (up_drift + down_drift)) / (2.0 * sigma)
    p = 0.5 + tilt * root
    up = 1.0 + up_drift * dt + sigma * root
    down = 1.0 + down_drift * dt - sigma * root
    return _make_step(p, up, down, dt)


def moment_residuals(step: TreeStepParams, mu: float, sigma: float) -> Tuple[float, float]:
    """First- and second-moment residuals of a step against (mu, sigma)."""
    dt = step.dt
    first = step.mean_factor - 1.0 - mu * dt
    second = step.second_moment - 1.0 - (2.0 * mu + sigma**2) * dt
    return first, second


def quadrinomial_step(view: CostedView, dt: float) -> QuadrinomialStep:
    """Four-branch transaction-cost step.

    Branch factors are 1 +/- k s + k^2 s^2 / 2 with s = sigma sqrt(dt) and
    k = c on the cost branches (weight mix) and k = 1 otherwise; the up/down
    split uses the symmetric tilt.
    """
    _check_dt(dt)
    mu, sigma = view.base.drift, view.base.vol
    c, eps = view.trans_rate, view.mix
    root = math.sqrt(dt)
    p = 0.5 + ((mu - 0.5 * sigma**2) / (2.0 * sigma)) * root
    if not 0.0 < p < 1.0:
        raise StepTooCoarse(f"p_up={p:.6g} outside (0, 1) at dt={dt:g}")
    s = sigma * root
    probs = (eps * p, (1.0 - eps) * p, (1.0 - eps) * (1.0 - p), eps * (1.0 - p))
    factors = (
        1.0 + c * s + 0.5 * c * c * s * s,
        1.0 + s + 0.5 * s * s,
        1.0 - s + 0.5 * s * s,
        1.0 - c * s + 0.5 * c * c * s * s,
    )
    return QuadrinomialStep(probs=probs, factors=factors, dt=dt)


def costed_step_moments(view: CostedView, dt: float) -> Tuple[float, float]:
    """Exact mean and variance of the four-branch one-step gross return."""
    step = quadrinomial_step(view, dt)
    mean = math.fsum(p * f for p, f in zip(step.probs, step.factors))
    variance = math.fsum(p * (f - mean) ** 2 for p, f in zip(step.probs, step.factors))
    return mean, variance


def costed_gbm_limit(view: CostedView, spot: float = 1.0) -> GBMParams:
    """
    Diffusion limit of the four-branch cost tree.

    The one-step mean is exactly 1 + m dt and the variance is v^2 dt + O(dt^2)
    with m = mu + mix (c - 1) mu + sigma^2 c (c - 1) mix / 2 and
    v^2 = sigma^2 (1 + (c^2 - 1) mix). The first-order formula is reported in
    ``linear_cost_drift`` / ``linear_cost_vol``.
    """
    params = GBMParams(
        drift=view.eff_drift,
        vol=view.eff_vol,
        spot=spot,
        linear_cost_drift=view.linear_cost_drift,
        linear_cost_vol=view.linear_cost_vol,
    )
    logger.debug(
        f"Costed limit c={view.trans_rate:g}, mix={view.mix:g}: "
        f"m={params.drift:.10g} (first-order {params.linear_cost_drift:.10g}), "
        f"v={params.vol:.10g} (first-order {params.linear_cost_vol:.10g})"
    )
    return params


def lattice_steps(mkt: LatticeMarket, dt: float) -> Tuple[TreeStepParams, TreeStepParams]:
    """Shared-coin steps of S and V: factors 1 + drift dt +/- vol sqrt(dt), p = 1/2."""
    _check_dt(dt)
    root = math.sqrt(dt)
    step_s = _make_step(
        0.5, 1.0 + mkt.mu * dt + mkt.sigma * root, 1.0 + mkt.mu * dt - mkt.sigma * root, dt
    )
    step_v = _make_step(
        0.5, 1.0 + mkt.m * dt + mkt.v * root, 1.0 + mkt.m * dt - mkt.v * root, dt
    )
    return step_s, step_v


def simulate_terminal(
    step: Step,
    steps: int,
    n_paths: int,
    seed: int,
    spot: float = 1.0,
    workers: Optional[int] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> np.ndarray:
    """
    Simulate terminal prices of i.i.d. tree steps.

    A path's terminal price depends only on how many times each branch was
    taken, so branch counts are drawn from the multinomial law directly.

    Args:
        step: Binomial or four-branch step
        steps: Number of steps per path
        n_paths: Number of paths
        seed: 64-bit seed
        spot: Initial price
        workers: Thread cap for block evaluation

    Returns:
        Array of ``n_paths`` terminal prices, identical for identical seeds
    """
    if steps < 1:
        raise InvalidParameter(f"steps must be >= 1, got {steps}")
    probs, factors = step.branches()
    log_factors = np.log(factors)

    def _block(rng: np.random.Generator, start: int, count: int) -> np.ndarray:
        counts = rng.multinomial(steps, probs, size=count)
        return spot * np.exp(counts @ log_factors)

    sample = run_blocks(_block, n_paths, seed, TAG_TREE, block_size, workers)
    logger.info(
        f"Simulated {n_paths} terminal prices over {steps} steps: "
        f"mean={float(np.mean(sample)):.8g}"
    )
    return sample


def simulate_joint_log_returns(
    step_a: TreeStepParams,
    step_b: TreeStepParams,
    n_paths: int,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """One-step log returns of two assets moved by one shared coin."""
    if step_a.p_up != step_b.p_up:
        raise InvalidParameter("a shared coin needs equal up probabilities")
    up = block_generator(seed, TAG_JOINT, 0).random(n_paths) < step_a.p_up
    returns_a = np.where(up, math.log(step_a.up_factor), math.log(step_a.down_factor))
    returns_b = np.where(up, math.log(step_b.up_factor), math.log(step_b.down_factor))
    return returns_a, returns_b


def gbm_terminal_moments(params: GBMParams, T: float) -> Tuple[float, float]:
    """Lognormal mean and variance of the price at horizon ``T``."""
    if T < 0:
        raise InvalidParameter(f"T must be >= 0, got {T}")
    mean = params.spot * math.exp(params.drift * T)
    variance = params.spot**2 * math.exp(2.0 * params.drift * T) * math.expm1(
        params.vol**2 * T
    )
    return mean, variance


def ks_distance(sample: np.ndarray, params: GBMParams, T: float) -> float:
    """Kolmogorov-Smirnov distance of log terminal prices to the lognormal limit."""
    if T <= 0:
        raise InvalidParameter(f"T must be positive, got {T}")
    loc = math.log(params.spot) + (params.drift - 0.5 * params.vol**2) * T
    scale = params.vol * math.sqrt(T)
    result = stats.kstest(np.log(sample), "norm", args=(loc, scale))
    return float(result.statistic)
