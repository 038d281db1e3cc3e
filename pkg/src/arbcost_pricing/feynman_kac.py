"""
Monte Carlo estimator of the Feynman-Kac representation

    V(t, x) = E[ int_t^T phi_s h(s, Z_s) ds + phi_T g(Z_T) ],  phi_s = exp(-int_t^s lambda du)

with dZ / Z = lambda dt + rho dW simulated in log-space.
"""

import logging
import math
from dataclasses import replace
from typing import Any, Optional

import numpy as np

from .errors import InvalidParameter, NonFinitePath
from .models import (
    CostQuadruplet,
    FKComparison,
    FKProblem,
    GridSpec,
    MCResult,
    PDEProblem,
)
from .pde_solver import pde_residual, solve_pde
from .streams import DEFAULT_BLOCK_SIZE, TAG_FEYNMAN_KAC, run_blocks

logger = logging.getLogger(__name__)

DEFAULT_PATHS = 100_000
DEFAULT_STEPS = 100
DEFAULT_PDE_REL_TOL = 1e-4


def _evaluate(fn: Any, t: float, x: np.ndarray, name: str) -> np.ndarray:
    values = np.broadcast_to(np.asarray(fn(t, x), dtype=float), x.shape)
    if not np.all(np.isfinite(values)):
        raise NonFinitePath(f"{name} is not finite at t={t:.6g}")
    return values


def _payoff(problem: FKProblem, x: np.ndarray) -> np.ndarray:
    values = np.broadcast_to(np.asarray(problem.payoff(x), dtype=float), x.shape)
    if not np.all(np.isfinite(values)):
        raise NonFinitePath("payoff is not finite on a terminal state")
    return values


def fk_price(
    problem: FKProblem,
    n_paths: int = DEFAULT_PATHS,
    n_steps: int = DEFAULT_STEPS,
    seed: int = 0,
    antithetic: bool = False,
    workers: Optional[int] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> MCResult:
    """
    Estimate the Feynman-Kac expectation of ``problem``.

    Log Z takes Euler steps with drift lambda - rho^2/2 and vol rho at the left
    endpoint, which is exact for constant coefficients. The discount and
    source integrals use the trapezoid rule on each path.

    Args:
        problem: Coefficients, payoff, start point and horizon
        n_paths: Number of paths (even when ``antithetic``)
        n_steps: Time steps per path
        seed: 64-bit seed
        antithetic: Pair each Gaussian path with its negation
        workers: Thread cap for block evaluation
        block_size: Paths per random-stream block (even)

    Returns:
        MCResult; with antithetics the standard error is taken over pair means

    Raises:
        NonFinitePath: if a coefficient or the payoff is not finite
    """
    if n_paths < 2:
        raise InvalidParameter(f"n_paths must be >= 2, got {n_paths}")
    if n_steps < 1:
        raise InvalidParameter(f"n_steps must be >= 1, got {n_steps}")
    if antithetic and (n_paths % 2 or block_size % 2):
        raise InvalidParameter("antithetic sampling needs even n_paths and block_size")

    t0, x0 = problem.start_t, problem.start_x
    dt = (problem.horizon - t0) / n_steps
    root_dt = math.sqrt(dt)

    def _block(rng: np.random.Generator, start: int, count: int) -> np.ndarray:
        if antithetic:
            half = rng.standard_normal((count // 2, n_steps))
            shocks = np.concatenate([half, -half])
        else:
            shocks = rng.standard_normal((count, n_steps))
        log_z = np.full(count, math.log(x0))
        x = np.exp(log_z)
        lam = _evaluate(problem.lambda_fn, t0, x, "lambda")
        rho = _evaluate(problem.rho_fn, t0, x, "rho")
        source = _evaluate(problem.source_fn, t0, x, "source")
        discount_integral = np.zeros(count)
        discount = np.ones(count)
        running = np.zeros(count)
        for i in range(n_steps):
            log_z = log_z + (lam - 0.5 * rho**2) * dt + rho * root_dt * shocks[:, i]
            t_next = t0 + (i + 1) * dt
            x = np.exp(log_z)
            lam_next = _evaluate(problem.lambda_fn, t_next, x, "lambda")
            source_next = _evaluate(problem.source_fn, t_next, x, "source")
            discount_integral = discount_integral + 0.5 * (lam + lam_next) * dt
            discount_next = np.exp(-discount_integral)
            running = running + 0.5 * (discount * source + discount_next * source_next) * dt
            lam, source, discount = lam_next, source_next, discount_next
            if i + 1 < n_steps:
                rho = _evaluate(problem.rho_fn, t_next, x, "rho")
        values = running + discount * _payoff(problem, x)
        if antithetic:
            half_count = count // 2
            return 0.5 * (values[:half_count] + values[half_count:])
        return values

    samples = run_blocks(_block, n_paths, seed, TAG_FEYNMAN_KAC, block_size, workers)
    n = len(samples)
    estimate = math.fsum(samples) / n
    std_error = float(np.std(samples, ddof=1)) / math.sqrt(n)
    logger.info(
        f"Feynman-Kac estimate {estimate:.10g} +/- {std_error:.3g} "
        f"({n_paths} paths, {n_steps} steps)"
    )
    return MCResult(
        estimate=estimate,
        std_error=std_error,
        n_paths=n_paths,
        n_steps=n_steps,
        seed=seed,
        antithetic=antithetic,
    )


def to_pde_problem(problem: FKProblem) -> PDEProblem:
    """Pricing equation with discount ``lambda_fn``, diffusion ``rho_fn`` and source."""
    zero = CostQuadruplet.zero()
    return PDEProblem(
        rate=problem.lambda_fn,
        vol=problem.rho_fn,
        payoff=problem.payoff,
        maturity=problem.horizon,
        costs=replace(zero, consumption=problem.source_fn),
    )


def fk_vs_pde(
    problem: FKProblem,
    grid: Optional[GridSpec] = None,
    n_paths: int = DEFAULT_PATHS,
    n_steps: int = DEFAULT_STEPS,
    seed: int = 0,
    antithetic: bool = False,
    workers: Optional[int] = None,
    pde_rel_tol: float = DEFAULT_PDE_REL_TOL,
) -> FKComparison:
    """
    Cross-check the Monte Carlo estimate against the finite-difference value.

    The two agree when they are within three Monte Carlo standard errors
    plus the PDE tolerance, ``pde_rel_tol`` times max(|V|, 1). The PDE
    residual is reported over the first half of the horizon, away from a
    non-smooth payoff.
    """
    if pde_rel_tol < 0.0:
        raise InvalidParameter(f"pde_rel_tol must be non-negative, got {pde_rel_tol}")
    grid = replace(grid or GridSpec(), spot=problem.start_x)
    pde_problem = to_pde_problem(problem)
    solution = solve_pde(pde_problem, grid)
    pde_value = solution.value_at(problem.start_t, problem.start_x)
    residual = pde_residual(
        solution, pde_problem, t_max=0.5 * (problem.start_t + problem.horizon)
    )
    mc = fk_price(
        problem, n_paths=n_paths, n_steps=n_steps, seed=seed,
        antithetic=antithetic, workers=workers,
    )
    pde_tol = pde_rel_tol * max(abs(pde_value), 1.0)
    comparison = FKComparison(
        mc=mc,
        pde_value=pde_value,
        difference=abs(mc.estimate - pde_value),
        band=3.0 * mc.std_error + pde_tol,
        pde_residual=residual,
        pde_tol=pde_tol,
    )
    if not comparison.agree:
        logger.warning(
            f"Monte Carlo {mc.estimate:.8g} and PDE {pde_value:.8g} differ by "
            f"{comparison.difference:.3g} > {comparison.band:.3g}"
        )
    return comparison
