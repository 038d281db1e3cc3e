"""
Arbitrage-cost option pricing toolkit.

Pricing trees, implied rates and allocations, a two-asset lattice with
velocity costs, closed-form prices, a finite-difference solver, a
Feynman-Kac Monte Carlo estimator and hedging simulations for markets of
agents with heterogeneous drift views.
"""

from .closed_form import bs_price, drift_shifted_price, hetero_bs_price
from .errors import PricingError, StorageError, UsageError, ValidationError
from .feynman_kac import fk_price, fk_vs_pde
from .hedge_sim import simulate_costed_hedge, simulate_pair_arbitrage, verify_allocation
from .lattice_pricer import price_lattice, risk_neutral_prob, validate_q_representation
from .models import (
    AgentView,
    CostedView,
    CostQuadruplet,
    FKProblem,
    GridSpec,
    LatticeClaim,
    LatticeMarket,
    PDEProblem,
    VanillaSpec,
)
from .pde_solver import pde_residual, solve_pde
from .rates import (
    arb_cost_lambdas,
    black72_rate,
    costed_rate_and_yields,
    solve_allocation_costed,
    solve_allocation_nocost,
)
from .settings import RunSettings
from .storage import LocalFileResultStorage, ResultStorage
from .trees import costed_gbm_limit, gbm_terminal_moments, simulate_terminal, step_params

__version__ = "0.1.0"

__all__ = [
    "AgentView",
    "CostedView",
    "CostQuadruplet",
    "FKProblem",
    "GridSpec",
    "LatticeClaim",
    "LatticeMarket",
    "PDEProblem",
    "VanillaSpec",
    "PricingError",
    "UsageError",
    "ValidationError",
    "StorageError",
    "step_params",
    "simulate_terminal",
    "gbm_terminal_moments",
    "costed_gbm_limit",
    "black72_rate",
    "costed_rate_and_yields",
    "solve_allocation_costed",
    "solve_allocation_nocost",
    "arb_cost_lambdas",
    "price_lattice",
    "risk_neutral_prob",
    "validate_q_representation",
    "bs_price",
    "hetero_bs_price",
    "drift_shifted_price",
    "solve_pde",
    "pde_residual",
    "fk_price",
    "fk_vs_pde",
    "simulate_pair_arbitrage",
    "simulate_costed_hedge",
    "verify_allocation",
    "RunSettings",
    "ResultStorage",
    "LocalFileResultStorage",
]
