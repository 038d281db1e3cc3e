"""
Finite-difference solver for the cost-adjusted backward pricing equation

    V_t + lambda x V_x + (1/2) rho^2 x^2 V_xx - lambda V + h = 0,  V(T, x) = g(x)

with lambda = r (1 - Psi) / (1 - Delta) and rho = sqrt(1 + lambda Gamma) sigma.

The grid is uniform in y = ln x, where the operator reads
(lambda - rho^2/2) V_y + (rho^2/2) V_yy - lambda V + h. Time stepping is a
theta-scheme (Crank-Nicolson after fully implicit startup steps) with
coefficients frozen at each slice midpoint and one banded solve per step.
"""

import logging
import math
from typing import Any, Optional, Tuple, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import DeltaCostSaturated, InvalidParameter, NegativeVarianceAugmentation
from .models import (
    ConstantCoefficient,
    FKProblem,
    GridSolution,
    GridSpec,
    Payoff,
    PDEProblem,
)
from .rates import arb_cost_lambdas

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SATURATION_TOL = 1e-12
STARTUP_STEPS = 2
THETA = 0.5


def constant(value: float) -> ConstantCoefficient:
    """Coefficient function returning ``value`` everywhere."""
    return ConstantCoefficient(value)


def _as_result(value: np.ndarray, *inputs: Any) -> ArrayLike:
    if all(np.ndim(x) == 0 for x in inputs):
        return float(value)
    return value


def cost_discount_rate(r: ArrayLike, delta: ArrayLike, psi: ArrayLike) -> ArrayLike:
    """
    Discount rate lambda = r (1 - Psi) / (1 - Delta).

    Raises:
        DeltaCostSaturated: if Delta >= 1 - 1e-12 anywhere
    """
    delta_arr = np.asarray(delta, dtype=float)
    if np.any(delta_arr >= 1.0 - SATURATION_TOL):
        raise DeltaCostSaturated(f"delta cost reached {float(np.max(delta_arr)):.6g}")
    lam = np.asarray(r, dtype=float) * (1.0 - np.asarray(psi, dtype=float)) / (1.0 - delta_arr)
    return _as_result(lam, r, delta, psi)


def augmented_vol(sigma: ArrayLike, lam: ArrayLike, gamma: ArrayLike) -> ArrayLike:
    """
    Gamma-cost augmented volatility rho = sqrt(1 + lambda Gamma) sigma.

    Raises:
        NegativeVarianceAugmentation: if 1 + lambda Gamma < 0 anywhere
    """
    factor = 1.0 + np.asarray(lam, dtype=float) * np.asarray(gamma, dtype=float)
    if np.any(factor < 0.0):
        raise NegativeVarianceAugmentation(
            f"1 + lambda * gamma reached {float(np.min(factor)):.6g}"
        )
    rho = np.sqrt(factor) * np.asarray(sigma, dtype=float)
    return _as_result(rho, sigma, lam, gamma)


def opportunity_cost(
    delta: ArrayLike, psi: ArrayLike, r: ArrayLike, portfolio_value: ArrayLike
) -> ArrayLike:
    """Opportunity cost kappa = Delta / (1 - Delta) (1 - Psi) r X."""
    delta_arr = np.asarray(delta, dtype=float)
    if np.any(delta_arr >= 1.0 - SATURATION_TOL):
        raise DeltaCostSaturated(f"delta cost reached {float(np.max(delta_arr)):.6g}")
    kappa = (
        delta_arr
        / (1.0 - delta_arr)
        * (1.0 - np.asarray(psi, dtype=float))
        * np.asarray(r, dtype=float)
        * np.asarray(portfolio_value, dtype=float)
    )
    return _as_result(kappa, delta, psi, r, portfolio_value)


def evaluate_coefficients(
    problem: PDEProblem, t: ArrayLike, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Discount rate, diffusion coefficient and source of ``problem`` at (t, x)."""
    x = np.asarray(x, dtype=float)

    def _eval(fn: Any) -> np.ndarray:
        return np.broadcast_to(np.asarray(fn(t, x), dtype=float), x.shape)

    r = _eval(problem.rate)
    sigma = _eval(problem.vol)
    if problem.costs is None:
        lam, rho, source = r, sigma, np.zeros(x.shape)
    else:
        costs = problem.costs
        lam = np.asarray(cost_discount_rate(r, _eval(costs.delta_cost), _eval(costs.bond_cost)))
        rho = np.asarray(augmented_vol(sigma, lam, _eval(costs.gamma_cost)))
        source = _eval(costs.consumption)
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(rho)) and np.all(np.isfinite(source))):
        raise InvalidParameter(f"non-finite PDE coefficient at t={t}")
    return lam, rho, source


def black_scholes_problem(
    rate: float, vol: float, payoff: Payoff, maturity: float
) -> PDEProblem:
    """Plain Black-Scholes problem with constant rate and volatility."""
    return PDEProblem(
        rate=constant(rate), vol=constant(vol), payoff=payoff, maturity=maturity
    )


def hetero_pde_problem(
    mu1: float, mu2: float, vol: float, payoff: Payoff, maturity: float
) -> PDEProblem:
    """Black-Scholes problem at the arb-cost rate of two drift views."""
    rate = arb_cost_lambdas(mu1, mu2).rate
    return black_scholes_problem(rate, vol, payoff, maturity)


def to_fk_problem(problem: PDEProblem, start_x: float, start_t: float = 0.0) -> FKProblem:
    """The auxiliary-diffusion problem whose expectation solves ``problem``."""

    def lambda_fn(t: Any, x: Any) -> np.ndarray:
        return evaluate_coefficients(problem, t, x)[0]

    def rho_fn(t: Any, x: Any) -> np.ndarray:
        return evaluate_coefficients(problem, t, x)[1]

    def source_fn(t: Any, x: Any) -> np.ndarray:
        return evaluate_coefficients(problem, t, x)[2]

    return FKProblem(
        lambda_fn=lambda_fn,
        rho_fn=rho_fn,
        source_fn=source_fn,
        payoff=problem.payoff,
        start_t=start_t,
        start_x=start_x,
        horizon=problem.maturity,
    )


def _log_grid(problem: PDEProblem, grid: GridSpec) -> np.ndarray:
    lam, rho, _ = evaluate_coefficients(problem, 0.0, np.array([grid.spot]))
    rho_ref, lam_ref = float(rho[0]), float(lam[0])
    drift = abs(lam_ref - 0.5 * rho_ref**2) * problem.maturity
    half_width = grid.width_sd * rho_ref * math.sqrt(problem.maturity) + 2.0 * drift
    centre = math.log(grid.spot)
    return np.linspace(centre - half_width, centre + half_width, grid.n_space + 1)


def _operator_bands(
    lam: np.ndarray, rho: np.ndarray, space: np.ndarray, dy: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Three-point stencil of the spatial operator at every node.

    Central differences in log-price where diffusion dominates. Where the
    cell Peclet number exceeds 2 the drift lambda x V_x is taken one-sided
    in x, upstream of the characteristic, which is exact on pieces linear
    in x; the remaining -rho^2/2 V_y stays central.
    """
    diffusion = 0.5 * rho**2 / dy**2
    convection = (lam - 0.5 * rho**2) / (2.0 * dy)
    lower = diffusion - convection
    upper = diffusion + convection
    centre = -2.0 * diffusion - lam

    upwind = diffusion < np.abs(convection)
    if np.any(upwind):
        h = np.diff(space)
        forward = lam * space / np.append(h, h[-1])
        backward = lam * space / np.insert(h, 0, h[0])
        vol_drift = -0.25 * rho**2 / dy
        up_lower = diffusion - vol_drift - np.where(lam < 0.0, backward, 0.0)
        up_upper = diffusion + vol_drift + np.where(lam > 0.0, forward, 0.0)
        up_centre = (
            -2.0 * diffusion
            - lam
            - np.where(lam > 0.0, forward, 0.0)
            + np.where(lam < 0.0, backward, 0.0)
        )
        lower = np.where(upwind, up_lower, lower)
        upper = np.where(upwind, up_upper, upper)
        centre = np.where(upwind, up_centre, centre)
    return lower, centre, upper


def _check_regularity(problem: PDEProblem, t: float, space: np.ndarray) -> None:
    rate = np.broadcast_to(np.asarray(problem.rate(t, space), dtype=float), space.shape)
    vol = np.broadcast_to(np.asarray(problem.vol(t, space), dtype=float), space.shape)
    if not np.all(rate > 0.0):
        raise InvalidParameter(
            f"rate must be positive on the grid, got min {float(np.min(rate)):.6g} at t={t:.6g}"
        )
    if not np.all(vol > 0.0):
        raise InvalidParameter(
            f"vol must be positive on the grid, got min {float(np.min(vol)):.6g} at t={t:.6g}"
        )


def solve_pde(problem: PDEProblem, grid: Optional[GridSpec] = None) -> GridSolution:
    """
    Solve the pricing equation backward from maturity.

    Args:
        problem: Coefficients, costs, payoff and maturity
        grid: Grid sizes and domain; the log-price domain is centred on
              ``grid.spot`` and spans ``width_sd`` diffusion standard
              deviations plus twice the drift displacement

    Returns:
        GridSolution with ``values[k]`` the slice at ``times[k]``

    Raises:
        GridTooCoarse: for grids below 3x3 or narrower than 5 deviations
        DeltaCostSaturated, NegativeVarianceAugmentation: from coefficients
        InvalidParameter: when the rate or volatility is not positive on the grid
    """
    grid = grid or GridSpec()
    y = _log_grid(problem, grid)
    space = np.exp(y)
    times = np.linspace(0.0, problem.maturity, grid.n_time + 1)
    n = grid.n_space
    dy = y[1] - y[0]
    extrap = (space[n] - space[n - 1]) / (space[n - 1] - space[n - 2])

    values = np.empty((grid.n_time + 1, n + 1))
    values[-1] = np.asarray(problem.payoff(space), dtype=float)
    logger.debug(
        f"PDE grid {n}x{grid.n_time} on [{space[0]:.6g}, {space[-1]:.6g}], dy={dy:.3g}"
    )

    for step, k in enumerate(range(grid.n_time - 1, -1, -1)):
        dtau = times[k + 1] - times[k]
        theta = 1.0 if step < STARTUP_STEPS else THETA
        mid = 0.5 * (times[k] + times[k + 1])
        _check_regularity(problem, mid, space)
        lam, rho, source = evaluate_coefficients(problem, mid, space)
        lower, centre, upper = _operator_bands(lam, rho, space, dy)

        old = values[k + 1]
        new = np.empty_like(old)
        new[0] = ((1.0 - (1.0 - theta) * dtau * lam[0]) * old[0] + dtau * source[0]) / (
            1.0 + theta * dtau * lam[0]
        )

        inner = slice(1, n)
        rhs = (
            old[inner]
            + (1.0 - theta)
            * dtau
            * (lower[inner] * old[:-2] + centre[inner] * old[inner] + upper[inner] * old[2:])
            + dtau * source[inner]
        )
        sub = -theta * dtau * lower[inner]
        diag = 1.0 - theta * dtau * centre[inner]
        sup = -theta * dtau * upper[inner]

        rhs[0] -= sub[0] * new[0]
        # Upper edge: V_n = (1 + e) V_{n-1} - e V_{n-2}, linear in x.
        diag[-1] += sup[-1] * (1.0 + extrap)
        sub[-1] -= sup[-1] * extrap

        banded = np.zeros((3, n - 1))
        banded[0, 1:] = sup[:-1]
        banded[1, :] = diag
        banded[2, :-1] = sub[1:]
        new[inner] = solve_banded((1, 1), banded, rhs)
        new[n] = (1.0 + extrap) * new[n - 1] - extrap * new[n - 2]
        values[k] = new

    if not np.all(np.isfinite(values)):
        raise InvalidParameter("finite-difference solution is not finite")
    logger.info(f"Solved PDE on {n}x{grid.n_time} grid")
    return GridSolution(
        times=times,
        space=space,
        values=values,
        metadata={
            "scheme": "theta",
            "theta": THETA,
            "startup_implicit_steps": STARTUP_STEPS,
            "n_space": n,
            "n_time": grid.n_time,
            "width_sd": grid.width_sd,
            "x_min": float(space[0]),
            "x_max": float(space[-1]),
            "boundary": "lower: discounted payoff limit; upper: zero second derivative",
        },
    )


def pde_residual(
    solution: GridSolution, problem: PDEProblem, t_max: Optional[float] = None
) -> float:
    """
    Max |V_t + (lambda - rho^2/2) V_y + (rho^2/2) V_yy - lambda V + h| over interior nodes.

    Central differences in time and log-price. ``t_max`` restricts the check
    to slices at or before that time, away from a non-smooth payoff.
    """
    times, values = solution.times, solution.values
    y = np.log(solution.space)
    if len(times) < 3 or len(y) < 3:
        raise InvalidParameter("residual needs at least 3 nodes per axis")
    dy = y[1] - y[0]
    worst = 0.0
    for k in range(1, len(times) - 1):
        if t_max is not None and times[k] > t_max:
            break
        lam, rho, source = evaluate_coefficients(problem, times[k], solution.space[1:-1])
        v = values[k]
        v_t = (values[k + 1, 1:-1] - values[k - 1, 1:-1]) / (times[k + 1] - times[k - 1])
        v_y = (v[2:] - v[:-2]) / (2.0 * dy)
        v_yy = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dy**2
        residual = (
            v_t
            + (lam - 0.5 * rho**2) * v_y
            + 0.5 * rho**2 * v_yy
            - lam * v[1:-1]
            + source
        )
        worst = max(worst, float(np.max(np.abs(residual))))
    return worst
