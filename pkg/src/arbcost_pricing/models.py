"""
Data models for the pricing and hedging toolkit.

This module contains dataclass definitions for market views, tree steps,
pricing problems and the result types returned by every solver. Market and
problem types are frozen; result types are plain containers with
``to_dict`` serializers used by the CLI and the result storage.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GridTooCoarse, InvalidParameter
from .serialization import table_to_csv

TOL_VOL = 1e-10

Coefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]
Payoff = Callable[[np.ndarray], np.ndarray]
JointPayoff = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParameter(message)


def _opt(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value)


@dataclass(frozen=True)
class AgentView:
    """One trader's beliefs about a single asset."""

    drift: float
    vol: float
    prob_base: float = 0.5
    prob_tilt: float = 0.0
    up_drift: Optional[float] = None
    down_drift: Optional[float] = None

    def __post_init__(self) -> None:
        _require(self.vol > 0, f"vol must be positive, got {self.vol}")
        _require(
            0.0 < self.prob_base < 1.0,
            f"prob_base must lie in (0, 1), got {self.prob_base}",
        )
        _require(
            (self.up_drift is None) == (self.down_drift is None),
            "up_drift and down_drift must be given together",
        )
        if self.has_tree_parameters:
            implied = self.implied_drift
            _require(
                abs(self.drift - implied) <= 1e-12 * max(1.0, abs(implied)),
                f"drift {self.drift} disagrees with prob_base-weighted "
                f"branch drifts {implied}",
            )

    @classmethod
    def from_tree(
        cls,
        prob_base: float,
        prob_tilt: float,
        up_drift: float,
        down_drift: float,
        vol: float,
    ) -> "AgentView":
        """Build a view from its branch parameters, deriving the drift."""
        drift = prob_base * up_drift + (1.0 - prob_base) * down_drift
        return cls(
            drift=drift,
            vol=vol,
            prob_base=prob_base,
            prob_tilt=prob_tilt,
            up_drift=up_drift,
            down_drift=down_drift,
        )

    @property
    def has_tree_parameters(self) -> bool:
        """True when the full (g, v, gamma, delta) parameterization is set."""
        return self.up_drift is not None and self.down_drift is not None

    @property
    def implied_drift(self) -> float:
        if self.up_drift is None or self.down_drift is None:
            return self.drift
        return self.prob_base * self.up_drift + (1.0 - self.prob_base) * self.down_drift


@dataclass(frozen=True)
class TreeStepParams:
    """One binomial step: up probability, gross factors and step length."""

    p_up: float
    up_factor: float
    down_factor: float
    dt: float

    def __post_init__(self) -> None:
        _require(0.0 < self.p_up < 1.0, f"p_up must lie in (0, 1), got {self.p_up}")
        _require(self.dt > 0, f"dt must be positive, got {self.dt}")
        _require(
            self.up_factor > 0 and self.down_factor > 0,
            "branch factors must be positive",
        )

    def branches(self) -> Tuple[np.ndarray, np.ndarray]:
        """Branch probabilities and gross factors, up branch first."""
        probs = np.array([self.p_up, 1.0 - self.p_up])
        factors = np.array([self.up_factor, self.down_factor])
        return probs, factors

    @property
    def mean_factor(self) -> float:
        return self.p_up * self.up_factor + (1.0 - self.p_up) * self.down_factor

    @property
    def second_moment(self) -> float:
        return (
            self.p_up * self.up_factor**2
            + (1.0 - self.p_up) * self.down_factor**2
        )


@dataclass(frozen=True)
class QuadrinomialStep:
    """Four-branch step of the transaction-cost tree.

    Branch order: cost-up, up, down, cost-down.
    """

    probs: Tuple[float, float, float, float]
    factors: Tuple[float, float, float, float]
    dt: float

    def __post_init__(self) -> None:
        _require(len(self.probs) == 4 and len(self.factors) == 4, "need 4 branches")
        _require(all(p >= 0.0 for p in self.probs), "branch probabilities must be >= 0")
        _require(
            abs(math.fsum(self.probs) - 1.0) <= 1e-12,
            f"branch probabilities sum to {math.fsum(self.probs)}",
        )
        _require(all(f > 0.0 for f in self.factors), "branch factors must be positive")
        _require(self.dt > 0, f"dt must be positive, got {self.dt}")

    def branches(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array(self.probs), np.array(self.factors)


@dataclass(frozen=True)
class CostedView:
    """An agent view traded through the four-branch cost tree.

    ``eff_drift`` and ``eff_vol`` are the exact leading-order coefficients of
    the one-step gross return. ``linear_cost_drift`` and ``linear_cost_vol``
    carry the first-order formula that keeps only (c - 1) in the variance.
    """

    base: AgentView
    trans_rate: float
    mix: float

    def __post_init__(self) -> None:
        _require(self.trans_rate >= 1.0, f"trans_rate must be >= 1, got {self.trans_rate}")
        _require(0.0 <= self.mix < 1.0, f"mix must lie in [0, 1), got {self.mix}")

    @property
    def eff_drift(self) -> float:
        mu, sigma = self.base.drift, self.base.vol
        c, eps = self.trans_rate, self.mix
        return mu + eps * (c - 1.0) * mu + 0.5 * sigma**2 * c * (c - 1.0) * eps

    @property
    def eff_vol(self) -> float:
        c, eps = self.trans_rate, self.mix
        return self.base.vol * math.sqrt(1.0 + (c * c - 1.0) * eps)

    @property
    def linear_cost_drift(self) -> float:
        sigma, c, eps = self.base.vol, self.trans_rate, self.mix
        return self.base.drift + 0.5 * sigma**2 * c * (c - 1.0) * eps

    @property
    def linear_cost_vol(self) -> float:
        return self.base.vol * math.sqrt(1.0 + (self.trans_rate - 1.0) * self.mix)


@dataclass(frozen=True)
class LatticeMarket:
    """Two-asset lattice market: views (mu, sigma) on S and (m, v) on V."""

    mu: float
    sigma: float
    m: float
    v: float
    cost_const: float = 0.0
    s0: float = 100.0
    v0: float = 100.0

    def __post_init__(self) -> None:
        _require(self.sigma > 0 and self.v > 0, "lattice vols must be positive")
        _require(self.s0 > 0 and self.v0 > 0, "lattice prices must be positive")
        _require(self.cost_const >= 0, f"cost_const must be >= 0, got {self.cost_const}")

    @property
    def rho_s(self) -> float:
        """Cost exponent of asset S."""
        return self.cost_const * self.mu / self.sigma

    @property
    def rho_v(self) -> float:
        """Cost exponent of asset V."""
        return self.cost_const * self.m / self.v


@dataclass(frozen=True)
class GBMParams:
    """Geometric Brownian motion parameters."""

    drift: float
    vol: float
    spot: float = 1.0
    linear_cost_drift: Optional[float] = None
    linear_cost_vol: Optional[float] = None

    def __post_init__(self) -> None:
        _require(self.vol > 0, f"vol must be positive, got {self.vol}")
        _require(self.spot > 0, f"spot must be positive, got {self.spot}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "drift": self.drift,
            "vol": self.vol,
            "spot": self.spot,
            "linear_cost_drift": _opt(self.linear_cost_drift),
            "linear_cost_vol": _opt(self.linear_cost_vol),
        }


@dataclass
class RateResult:
    """An implied riskless rate with optional yields and cost lambdas."""

    rate: float
    yields: Optional[Tuple[float, float]] = None
    lambdas: Optional[Tuple[float, float]] = None
    bond_lambda: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"rate": self.rate, "notes": list(self.notes)}
        if self.yields is not None:
            data["yield1"], data["yield2"] = self.yields
        if self.lambdas is not None:
            data["lambda1"], data["lambda2"] = self.lambdas
        if self.bond_lambda is not None:
            data["bond_lambda"] = self.bond_lambda
        return data


@dataclass
class AdjustedParams:
    """Cost-adjusted lattice drifts, vols, rate and market price of risk."""

    mu_star: float
    m_star: float
    sigma_star: float
    v_star: float
    r_star: float
    theta_star: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu_star": self.mu_star,
            "m_star": self.m_star,
            "sigma_star": self.sigma_star,
            "v_star": self.v_star,
            "r_star": self.r_star,
            "theta_star": self.theta_star,
        }


@dataclass
class AllocationSolution:
    """Real roots of an allocation equation in the first weight."""

    roots: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    discriminant: Optional[float] = None
    degenerate: bool = False
    status: str = "ok"

    @property
    def has_real_roots(self) -> bool:
        return bool(self.roots)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "roots": list(self.roots),
            "residuals": list(self.residuals),
            "discriminant": _opt(self.discriminant),
            "degenerate": self.degenerate,
            "status": self.status,
        }


@dataclass(frozen=True)
class VanillaSpec:
    """European call or put contract with its pricing inputs."""

    spot: float
    strike: float
    maturity: float
    rate: float = 0.0
    vol: float = 0.2
    kind: str = "call"

    def __post_init__(self) -> None:
        _require(self.spot > 0 and self.strike > 0, "spot and strike must be positive")
        _require(self.maturity >= 0, f"maturity must be >= 0, got {self.maturity}")
        _require(self.vol > 0, f"vol must be positive, got {self.vol}")
        _require(self.kind in ("call", "put"), f"kind must be call or put, got {self.kind}")

    @property
    def is_call(self) -> bool:
        return self.kind == "call"

    def payoff(self, x: np.ndarray) -> np.ndarray:
        """Terminal payoff at prices ``x``."""
        x = np.asarray(x, dtype=float)
        if self.is_call:
            return np.maximum(x - self.strike, 0.0)
        return np.maximum(self.strike - x, 0.0)

    def with_rate(self, rate: float) -> "VanillaSpec":
        return replace(self, rate=rate)


@dataclass
class PricingResult:
    """A price plus solver diagnostics."""

    price: float
    method: str
    std_error: Optional[float] = None
    rate: Optional[float] = None
    q: Optional[float] = None
    residual: Optional[float] = None
    grid: Optional[Dict[str, Any]] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"price": self.price, "method": self.method}
        for name in ("std_error", "rate", "q", "residual"):
            value = getattr(self, name)
            if value is not None:
                data[name] = float(value)
        if self.grid is not None:
            data["grid"] = dict(self.grid)
        data["diagnostics"] = dict(self.diagnostics)
        return data


@dataclass(frozen=True)
class LatticeClaim:
    """European claim on the terminal pair (S, V)."""

    payoff: JointPayoff
    maturity: float
    steps: int

    def __post_init__(self) -> None:
        _require(self.maturity > 0, f"maturity must be positive, got {self.maturity}")
        _require(self.steps >= 1, f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.maturity / self.steps


@dataclass
class QProbe:
    """Closed-form versus replication-implied one-step state price."""

    q: float
    q_closed_form: float
    residual: float
    dt: float
    cost_form: str = "power"
    q_linearized: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "q_closed_form": self.q_closed_form,
            "residual": self.residual,
            "dt": self.dt,
            "cost_form": self.cost_form,
            "q_linearized": _opt(self.q_linearized),
        }


@dataclass(frozen=True)
class ConstantCoefficient:
    """A coefficient function of (t, x) that ignores its arguments."""

    value: float

    def __call__(self, t: Any, x: Any) -> np.ndarray:
        shape = np.broadcast(np.asarray(t), np.asarray(x)).shape
        return np.full(shape, float(self.value))


@dataclass(frozen=True)
class CostQuadruplet:
    """Delta, gamma, bond-trading and consumption cost functions of (t, x)."""

    delta_cost: Coefficient
    gamma_cost: Coefficient
    bond_cost: Coefficient
    consumption: Coefficient

    @classmethod
    def zero(cls) -> "CostQuadruplet":
        return cls.constant()

    @classmethod
    def constant(
        cls,
        delta_cost: float = 0.0,
        gamma_cost: float = 0.0,
        bond_cost: float = 0.0,
        consumption: float = 0.0,
    ) -> "CostQuadruplet":
        return cls(
            delta_cost=ConstantCoefficient(delta_cost),
            gamma_cost=ConstantCoefficient(gamma_cost),
            bond_cost=ConstantCoefficient(bond_cost),
            consumption=ConstantCoefficient(consumption),
        )


@dataclass(frozen=True)
class PDEProblem:
    """Backward pricing problem with optional cost quadruplet.

    With ``costs=None`` the discount rate is ``rate`` and the diffusion
    coefficient is ``vol`` with no source term.
    """

    rate: Coefficient
    vol: Coefficient
    payoff: Payoff
    maturity: float
    costs: Optional[CostQuadruplet] = None

    def __post_init__(self) -> None:
        _require(self.maturity > 0, f"maturity must be positive, got {self.maturity}")


@dataclass(frozen=True)
class GridSpec:
    """Grid sizes and log-price domain for the finite-difference solver."""

    spot: float = 100.0
    n_space: int = 400
    n_time: int = 400
    width_sd: float = 6.0

    def __post_init__(self) -> None:
        if self.n_space < 3 or self.n_time < 3:
            raise GridTooCoarse(
                f"grid needs at least 3 intervals per axis, got "
                f"{self.n_space}x{self.n_time}"
            )
        if self.width_sd < 5.0:
            raise GridTooCoarse(
                f"domain half-width must be >= 5 standard deviations, got {self.width_sd}"
            )
        _require(self.spot > 0, f"spot must be positive, got {self.spot}")


@dataclass
class GridSolution:
    """Solution surface ``values[time][space]`` on a log-uniform grid."""

    times: np.ndarray
    space: np.ndarray
    values: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def value_at(self, t: float, x: float) -> float:
        """Interpolate the surface: linear in time, cubic spline in log-price."""
        log_space = np.log(self.space)
        idx = int(np.searchsorted(self.times, t))
        if idx < len(self.times) and math.isclose(self.times[idx], t, abs_tol=1e-14):
            row = self.values[idx]
        elif idx == 0:
            row = self.values[0]
        elif idx >= len(self.times):
            row = self.values[-1]
        else:
            t0, t1 = self.times[idx - 1], self.times[idx]
            w = (t - t0) / (t1 - t0)
            row = (1.0 - w) * self.values[idx - 1] + w * self.values[idx]
        spline = CubicSpline(log_space, row)
        return float(spline(math.log(x)))

    def table(self) -> Tuple[List[Any], List[List[float]]]:
        """Header of space nodes and one row per time slice."""
        header: List[Any] = ["t"] + [float(x) for x in self.space]
        rows = [[float(t)] + [float(v) for v in row] for t, row in zip(self.times, self.values)]
        return header, rows

    def to_csv(self) -> str:
        """One row per time; the header lists the space nodes."""
        header, rows = self.table()
        return table_to_csv(header, rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metadata": dict(self.metadata),
            "times": [float(t) for t in self.times],
            "space": [float(x) for x in self.space],
            "values": [[float(v) for v in row] for row in self.values],
        }


@dataclass(frozen=True)
class FKProblem:
    """Feynman-Kac problem: coefficients of the auxiliary diffusion and claim."""

    lambda_fn: Coefficient
    rho_fn: Coefficient
    source_fn: Coefficient
    payoff: Payoff
    start_t: float = 0.0
    start_x: float = 100.0
    horizon: float = 1.0

    def __post_init__(self) -> None:
        _require(self.horizon > self.start_t, "horizon must exceed start time")
        _require(self.start_x > 0, f"start_x must be positive, got {self.start_x}")


@dataclass
class MCResult:
    """Monte Carlo estimate with its standard error."""

    estimate: float
    std_error: float
    n_paths: int
    n_steps: int
    seed: int
    antithetic: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "antithetic": self.antithetic,
        }


@dataclass
class FKComparison:
    """Monte Carlo versus finite-difference value of the same problem."""

    mc: MCResult
    pde_value: float
    difference: float
    band: float
    pde_residual: float
    pde_tol: float = 0.0

    @property
    def agree(self) -> bool:
        return self.difference <= self.band

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mc": self.mc.to_dict(),
            "pde_value": self.pde_value,
            "difference": self.difference,
            "band": self.band,
            "pde_residual": self.pde_residual,
            "pde_tol": self.pde_tol,
            "agree": self.agree,
        }


@dataclass
class PnLStats:
    """Terminal profit-and-loss (or replication error) statistics."""

    mean: float
    variance: float
    paths: int
    steps: int
    initial_capital: float = 0.0
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    per_path: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        _require(self.variance >= 0, f"variance must be >= 0, got {self.variance}")

    @property
    def std_error(self) -> float:
        """Standard error of the mean."""
        return math.sqrt(self.variance / self.paths) if self.paths > 0 else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "std_error": self.std_error,
            "paths": self.paths,
            "steps": self.steps,
            "initial_capital": self.initial_capital,
            "minimum": _opt(self.minimum),
            "maximum": _opt(self.maximum),
        }


@dataclass
class HedgeState:
    """Per-path terminal state of a hedging simulation."""

    holdings: Tuple[np.ndarray, np.ndarray]
    portfolio_value: np.ndarray
    replication_error: np.ndarray


@dataclass
class HedgeReport:
    """Replication-error statistics of a costed hedge."""

    stats: PnLStats
    state: HedgeState
    initial_price: float
    rate: float
    lambda_used: float
    rule: str
    rms_error: float
    mean_abs_error: float
    max_self_financing_gap: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": self.stats.to_dict(),
            "initial_price": self.initial_price,
            "rate": self.rate,
            "lambda_used": self.lambda_used,
            "rule": self.rule,
            "rms_error": self.rms_error,
            "mean_abs_error": self.mean_abs_error,
            "max_self_financing_gap": self.max_self_financing_gap,
        }
