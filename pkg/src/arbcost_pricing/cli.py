"""
Command-line front end.

Every subcommand resolves its parameters (flag, then ``--scenario`` file,
then environment, then default), dispatches to the library and prints one
JSON document, or a CSV table with ``--format csv``. Exit codes: 0 success,
1 cross-check disagreement, 2 usage error, 3 validation error, 4 pricing error.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .closed_form import (
    bs_delta,
    bs_price,
    drift_shifted_delta,
    drift_shifted_price,
    hetero_bs_price,
)
from .errors import PricingError, QOutOfRange, StorageError, UsageError, ValidationError
from .feynman_kac import fk_price
from .hedge_sim import simulate_costed_hedge, simulate_pair_arbitrage
from .lattice_pricer import price_lattice, risk_neutral_prob
from .models import (
    AgentView,
    CostedView,
    CostQuadruplet,
    GBMParams,
    GridSpec,
    LatticeClaim,
    LatticeMarket,
    PDEProblem,
    VanillaSpec,
)
from .pde_solver import constant, pde_residual, solve_pde, to_fk_problem
from .rates import (
    arb_cost_lambdas,
    black72_rate,
    costed_rate_and_yields,
    implied_rate_from_lambdas,
    solve_allocation_costed,
    solve_allocation_nocost,
)
from .serialization import (
    SCHEMA_VERSION,
    dumps,
    envelope,
    table_to_csv,
    validate_result,
)
from .settings import LOG_LEVELS, RunSettings
from .storage import LocalFileResultStorage, ResultStorage
from .trees import (
    costed_gbm_limit,
    costed_step_moments,
    gbm_terminal_moments,
    ks_distance,
    simulate_terminal,
    step_params,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
EXIT_DISAGREE = 1

STOCHASTIC_COMMANDS = ("mc-price", "arb-demo", "hedge-demo", "converge", "xcheck")
GLOBAL_KEYS = ("seed", "threads", "output_dir", "log_level", "format", "paths_csv")
CONVERGE_LEVELS = {
    "tree": "50,200,800",
    "costed": "0.01,0.005,0.0025",
    "lattice": "250,500,1000,2000",
    "pde": "100,200,400",
}

COST_NAMES = ("delta_cost", "gamma_cost", "bond_cost", "consumption")

Table = Tuple[List[str], List[List[Any]]]


@dataclass(frozen=True)
class Param:
    """One command parameter: a flag and an accepted scenario key."""

    name: str
    kind: type
    default: Any = None
    help: str = ""
    choices: Optional[Tuple[str, ...]] = None
    required: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


@dataclass
class RunContext:
    """Resolved process settings handed to every command."""

    seed: Optional[int]
    workers: int
    block_size: int
    storage: Optional[ResultStorage] = None
    paths_csv: bool = False


@dataclass
class CommandOutput:
    result: Dict[str, Any]
    table: Optional[Table] = None
    table_key: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = 0


def _p(name: str, kind: type, default: Any = None, help: str = "", **kw: Any) -> Param:
    return Param(name, kind, default, help, **kw)


CONTRACT = [
    _p("spot", float, 100.0, "initial underlying price"),
    _p("strike", float, 100.0, "strike price"),
    _p("maturity", float, 1.0, "time to maturity in years"),
    _p("vol", float, 0.2, "volatility"),
    _p("kind", str, "call", "option type", choices=("call", "put")),
]
DRIFTS = [
    _p("mu1", float, None, "drift view of agent 1"),
    _p("mu2", float, None, "drift view of agent 2"),
]
COSTED_VIEWS = [
    _p("sigma", float, 0.2, "shared base volatility"),
    _p("c1", float, 1.5, "transaction rate of agent 1 (>= 1)"),
    _p("eps1", float, 0.3, "cost-branch probability of agent 1"),
    _p("c2", float, 2.0, "transaction rate of agent 2 (>= 1)"),
    _p("eps2", float, 0.5, "cost-branch probability of agent 2"),
]
COSTS = [
    _p("delta_cost", float, 0.0, "constant delta cost"),
    _p("gamma_cost", float, 0.0, "constant gamma cost"),
    _p("bond_cost", float, 0.0, "constant bond-trading cost"),
    _p("consumption", float, 0.0, "constant consumption source"),
]
GRID = [
    _p("n_space", int, 400, "space intervals"),
    _p("n_time", int, 400, "time steps"),
    _p("width_sd", float, 6.0, "domain half-width in standard deviations"),
]
LATTICE = [
    _p("mu", float, 0.05, "drift of S"),
    _p("sigma", float, 0.2, "volatility of S"),
    _p("m", float, 0.03, "drift of V"),
    _p("v", float, 0.1, "volatility of V"),
    _p("cost", float, 0.0, "velocity cost constant"),
    _p("s0", float, 100.0, "initial S"),
    _p("v0", float, 100.0, "initial V"),
    _p("strike", float, 100.0, "strike on S"),
    _p("maturity", float, 1.0, "time to maturity in years"),
    _p("kind", str, "call", "option type", choices=("call", "put")),
    _p("cost_form", str, "linear", "cost multiplier", choices=("linear", "power")),
]

COMMAND_PARAMS: Dict[str, List[Param]] = {
    "rates": [
        _p("mode", str, "arb", "rate model", choices=("arb", "costed", "black72")),
        *DRIFTS,
        *COSTED_VIEWS,
        _p("sigma1", float, None, "volatility of asset 1 (black72)"),
        _p("sigma2", float, None, "volatility of asset 2 (black72)"),
        _p("linear_cost", bool, False, "use first-order cost moments"),
    ],
    "alloc": [
        _p("mode", str, "costed", "allocation equation", choices=("costed", "nocost")),
        _p("mu1", float, 0.05, "drift view of agent 1"),
        _p("mu2", float, 0.08, "drift view of agent 2"),
        *COSTED_VIEWS,
        _p("cy1", float, None, "transaction yield of agent 1 (overrides views)"),
        _p("cy2", float, None, "transaction yield of agent 2 (overrides views)"),
        _p("sigma1", float, 0.2, "volatility of asset 1 (nocost)"),
        _p("sigma2", float, 0.1, "volatility of asset 2 (nocost)"),
        _p("strict", bool, False, "fail when no real root exists"),
    ],
    "tree-price": [*LATTICE, _p("steps", int, 1000, "lattice steps")],
    "pde-price": [
        *CONTRACT,
        _p("rate", float, None, "riskless rate (default: r* from mu1, mu2, else 0.05)"),
        *DRIFTS,
        *COSTS,
        *GRID,
    ],
    "mc-price": [
        *CONTRACT,
        _p("rate", float, None, "riskless rate (default: r* from mu1, mu2, else 0)"),
        *DRIFTS,
        *COSTS,
        _p("paths", int, 100_000, "Monte Carlo paths"),
        _p("steps", int, 100, "time steps per path"),
        _p("antithetic", bool, False, "antithetic sampling"),
    ],
    "closed-price": [
        _p("model", str, "bs", "closed form", choices=("bs", "hetero", "shifted")),
        *CONTRACT,
        _p("rate", float, 0.0, "riskless rate"),
        _p("mu1", float, 0.04, "drift view of agent 1"),
        _p("mu2", float, 0.09, "drift view of agent 2"),
    ],
    "arb-demo": [
        _p("mu1", float, 0.03, "drift of asset 1"),
        _p("mu2", float, 0.07, "drift of asset 2"),
        _p("sigma", float, 0.2, "shared volatility"),
        _p("maturity", float, 1.0, "horizon in years"),
        _p("steps", int, 1000, "rebalancing steps"),
        _p("paths", int, 10_000, "paths"),
    ],
    "hedge-demo": [
        _p("mu1", float, 0.04, "drift view of agent 1"),
        _p("mu2", float, 0.09, "drift view of agent 2"),
        *CONTRACT,
        _p("steps", int, 500, "hedge rebalancing steps"),
        _p("paths", int, 10_000, "paths"),
        _p("agent", int, 1, "hedging agent (1 or 2)"),
        _p("rule", str, "exposure", "holdings rule", choices=("exposure", "literal")),
        _p("hedge_lambda", float, None, "override the agent's cost lambda"),
    ],
    "converge": [
        _p("kind", str, "lattice", "study", choices=tuple(CONVERGE_LEVELS)),
        _p("levels", str, None, "comma-separated step counts (or dt values for costed)"),
        _p("mu", float, 0.05, "drift"),
        _p("sigma", float, 0.2, "volatility"),
        _p("m", float, 0.03, "drift of V (lattice)"),
        _p("v", float, 0.1, "volatility of V (lattice)"),
        _p("cost", float, 0.0, "velocity cost constant (lattice)"),
        _p("trans_rate", float, 1.5, "transaction rate (costed)"),
        _p("mix", float, 0.3, "cost-branch probability (costed)"),
        _p("spot", float, 100.0, "initial price"),
        _p("strike", float, 100.0, "strike price"),
        _p("maturity", float, 1.0, "time to maturity in years"),
        _p("rate", float, 0.05, "riskless rate (pde)"),
        _p("paths", int, 20_000, "paths (tree)"),
    ],
    "xcheck": [
        *CONTRACT,
        _p("rate", float, None, "riskless rate (default: r* from mu1, mu2, else 0.05)"),
        *DRIFTS,
        _p("paths", int, 100_000, "Monte Carlo paths"),
        _p("steps", int, 10, "time steps per path"),
        *GRID,
        _p("pde_rel_tol", float, 1e-3, "relative PDE tolerance"),
        _p("mc_std_errors", float, 3.0, "Monte Carlo band in standard errors"),
    ],
}

COMMAND_HELP = {
    "rates": "implied rates, yields and arb-cost lambdas",
    "alloc": "no-arbitrage allocation roots",
    "tree-price": "two-asset lattice price with velocity costs",
    "pde-price": "finite-difference price of the cost-adjusted equation",
    "mc-price": "Feynman-Kac Monte Carlo price",
    "closed-price": "closed-form European prices",
    "arb-demo": "zero-capital arbitrage between equal-vol assets",
    "hedge-demo": "costed hedge replication error",
    "converge": "convergence tables",
    "xcheck": "closed form, PDE and Monte Carlo cross-check",
}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> Any:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per entry of ``COMMAND_PARAMS``."""
    common = _ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="JSON scenario file")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed")
    common.add_argument("--threads", type=int, default=None, help="worker cap")
    common.add_argument("--output-dir", dest="output_dir", default=None)
    common.add_argument(
        "--paths-csv", dest="paths_csv", action="store_const", const=True, default=None,
        help="store per-path tables",
    )
    common.add_argument("--log-level", dest="log_level", default=None, choices=LOG_LEVELS)

    parser = _ArgumentParser(prog="arbcost", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    for command, params in COMMAND_PARAMS.items():
        sub = subparsers.add_parser(command, parents=[common], help=COMMAND_HELP[command])
        for param in params:
            if param.kind is bool:
                sub.add_argument(
                    param.flag, dest=param.name, action="store_const", const=True,
                    default=None, help=param.help,
                )
            else:
                sub.add_argument(
                    param.flag, dest=param.name, type=param.kind, default=None,
                    choices=param.choices, help=param.help,
                )
    return parser


def load_scenario(path: str, command: str) -> Dict[str, Any]:
    """
    Read a scenario file for ``command``.

    Raises:
        ValidationError: on unreadable files, a wrong schema version or command
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read scenario {path}: {e}") from None
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a JSON object")
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"scenario schema_version must be {SCHEMA_VERSION!r}, got {version!r}"
        )
    scenario_command = data.pop("command", command)
    if scenario_command != command:
        raise ValidationError(f"scenario is for '{scenario_command}', not '{command}'")
    return data


def _coerce(param: Param, value: Any) -> Any:
    if value is None:
        return None
    if param.kind is bool:
        ok = isinstance(value, bool)
    elif param.kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif param.kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ValidationError(f"{param.name} must be {param.kind.__name__}, got {value!r}")
    if param.kind is float and not math.isfinite(value):
        raise ValidationError(f"{param.name} must be finite, got {value}")
    if param.choices is not None and value not in param.choices:
        raise ValidationError(f"{param.name} must be one of {param.choices}, got {value!r}")
    return value


def resolve_params(
    params: Sequence[Param], args: argparse.Namespace, scenario: Mapping[str, Any]
) -> Dict[str, Any]:
    """Merge flags over scenario values over defaults, validating each value."""
    known = {param.name for param in params} | set(GLOBAL_KEYS)
    unknown = sorted(set(scenario) - known)
    if unknown:
        raise ValidationError(f"unknown scenario keys: {', '.join(unknown)}")
    values: Dict[str, Any] = {}
    for param in params:
        flag_value = getattr(args, param.name, None)
        if flag_value is not None:
            value = _coerce(param, flag_value)
        elif param.name in scenario:
            value = _coerce(param, scenario[param.name])
        else:
            value = param.default
        if value is None and param.required:
            raise UsageError(f"{param.flag} is required")
        values[param.name] = value
    return values


def _valid_seed(seed: Any) -> bool:
    return isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64


def _positive(value: Any) -> bool:
    return value > 0


def _non_negative(value: Any) -> bool:
    return value >= 0


# Flag values checked before any command runs: name -> (predicate, requirement).
PRECONDITIONS: Dict[str, Tuple[Callable[[Any], bool], str]] = {
    **{
        name: (_positive, "must be positive")
        for name in (
            "spot", "strike", "maturity", "vol", "sigma", "sigma1", "sigma2", "v",
            "s0", "v0", "paths", "steps", "mc_std_errors",
        )
    },
    "cost": (_non_negative, "must be >= 0"),
    "pde_rel_tol": (_non_negative, "must be >= 0"),
    **{name: (lambda x: x >= 1.0, "must be >= 1") for name in ("c1", "c2", "trans_rate")},
    **{name: (lambda x: 0.0 <= x < 1.0, "must lie in [0, 1)") for name in ("eps1", "eps2", "mix")},
}


def check_preconditions(values: Mapping[str, Any]) -> None:
    """
    Reject out-of-range flag values before dispatch.

    Raises:
        ValidationError: listing every violated precondition
    """
    problems = [
        f"--{name.replace('_', '-')} {requirement}, got {values[name]!r}"
        for name, (ok, requirement) in PRECONDITIONS.items()
        if values.get(name) is not None and not ok(values[name])
    ]
    if problems:
        raise ValidationError("; ".join(problems))


def _pick(flag: Any, scenario: Mapping[str, Any], key: str, fallback: Any) -> Any:
    if flag is not None:
        return flag
    if scenario.get(key) is not None:
        return scenario[key]
    return fallback


def _require(values: Mapping[str, Any], *names: str) -> None:
    missing = [n for n in names if values.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _vanilla(values: Mapping[str, Any], rate: float = 0.0) -> VanillaSpec:
    return VanillaSpec(
        spot=values["spot"],
        strike=values["strike"],
        maturity=values["maturity"],
        rate=rate,
        vol=values["vol"],
        kind=values["kind"],
    )


def _contract_rate(values: Mapping[str, Any], fallback: float) -> float:
    if values.get("rate") is not None:
        return float(values["rate"])
    if values.get("mu1") is not None and values.get("mu2") is not None:
        return arb_cost_lambdas(values["mu1"], values["mu2"]).rate
    return fallback


def _pde_problem(values: Mapping[str, Any], rate: float) -> PDEProblem:
    spec = _vanilla(values, rate)
    cost_values = [values.get(name) or 0.0 for name in COST_NAMES]
    costs = CostQuadruplet.constant(*cost_values) if any(cost_values) else None
    return PDEProblem(
        rate=constant(rate), vol=constant(spec.vol), payoff=spec.payoff,
        maturity=spec.maturity, costs=costs,
    )


def _grid(values: Mapping[str, Any]) -> GridSpec:
    return GridSpec(
        spot=values["spot"], n_space=values["n_space"], n_time=values["n_time"],
        width_sd=values["width_sd"],
    )


def _costed_views(values: Mapping[str, Any]) -> Tuple[CostedView, CostedView]:
    _require(values, "mu1", "mu2")
    sigma = values["sigma"]
    return (
        CostedView(AgentView(values["mu1"], sigma), values["c1"], values["eps1"]),
        CostedView(AgentView(values["mu2"], sigma), values["c2"], values["eps2"]),
    )


def cmd_rates(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    mode = values["mode"]
    if mode == "arb":
        _require(values, "mu1", "mu2")
        rates = arb_cost_lambdas(values["mu1"], values["mu2"])
        result = rates.to_dict()
        result["r_star"] = rates.rate
        if values["mu1"] != values["mu2"] and rates.lambdas is not None:
            result["implied_rate"] = implied_rate_from_lambdas(
                values["mu1"], values["mu2"], *rates.lambdas
            )
    elif mode == "costed":
        view1, view2 = _costed_views(values)
        rates = costed_rate_and_yields(view1, view2, use_linear_cost=values["linear_cost"])
        result = rates.to_dict()
        result["effective"] = [
            {"drift": view.eff_drift, "vol": view.eff_vol} for view in (view1, view2)
        ]
    else:
        _require(values, "mu1", "mu2", "sigma1", "sigma2")
        result = {
            "rate": black72_rate(values["mu1"], values["sigma1"], values["mu2"], values["sigma2"])
        }
    result["mode"] = mode
    return CommandOutput(result=result)


def cmd_alloc(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    if values["mode"] == "nocost":
        solution = solve_allocation_nocost(values["sigma1"], values["sigma2"])
        return CommandOutput(result=solution.to_dict())
    if values["cy1"] is not None and values["cy2"] is not None:
        yields = (values["cy1"], values["cy2"])
    else:
        view1, view2 = _costed_views(values)
        computed = costed_rate_and_yields(view1, view2).yields
        assert computed is not None
        yields = computed
    solution = solve_allocation_costed(
        yields[0], yields[1], values["sigma"], strict=values["strict"]
    )
    result = solution.to_dict()
    result["yield1"], result["yield2"] = yields
    result["allocations"] = [[root, 1.0 - root] for root in solution.roots]
    return CommandOutput(result=result)


def _lattice_market(values: Mapping[str, Any]) -> LatticeMarket:
    return LatticeMarket(
        mu=values["mu"], sigma=values["sigma"], m=values["m"], v=values["v"],
        cost_const=values["cost"], s0=values.get("s0", values.get("spot", 100.0)),
        v0=values.get("v0", 100.0),
    )


def _lattice_claim(values: Mapping[str, Any], steps: int) -> LatticeClaim:
    strike = values["strike"]
    call = values["kind"] == "call"

    def payoff(s: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.maximum(s - strike, 0.0) if call else np.maximum(strike - s, 0.0)

    return LatticeClaim(payoff=payoff, maturity=values["maturity"], steps=steps)


def _lattice_reference(
    values: Mapping[str, Any], mkt: LatticeMarket
) -> Optional[Tuple[float, float]]:
    if mkt.cost_const != 0.0:
        return None
    rate = black72_rate(mkt.mu, mkt.sigma, mkt.m, mkt.v)
    spec = VanillaSpec(
        spot=mkt.s0, strike=values["strike"], maturity=values["maturity"], rate=rate,
        vol=mkt.sigma, kind=values["kind"],
    )
    return rate, bs_price(spec)


def cmd_tree_price(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    mkt = _lattice_market(values)
    claim = _lattice_claim(values, values["steps"])
    pricing = price_lattice(mkt, claim, cost_form=values["cost_form"])
    result = pricing.to_dict()
    try:
        result["risk_neutral_q"] = risk_neutral_prob(mkt, claim.dt).to_dict()
    except QOutOfRange as e:
        logger.warning(f"Skipping risk-neutral q check: {e}")
        result["risk_neutral_q"] = None
    reference = _lattice_reference(values, mkt)
    if reference is not None:
        result["reference_rate"], result["reference_price"] = reference
        result["reference_error"] = abs(pricing.price - reference[1])
    return CommandOutput(result=result)


def cmd_pde_price(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    rate = _contract_rate(values, 0.05)
    problem = _pde_problem(values, rate)
    solution = solve_pde(problem, _grid(values))
    price = solution.value_at(0.0, values["spot"])
    residual = pde_residual(solution, problem, t_max=0.5 * problem.maturity)
    result = {
        "price": price,
        "method": "pde",
        "rate": rate,
        "residual": residual,
        "grid": solution.metadata,
    }
    return CommandOutput(result=result, table=solution.table(), table_key="pde-price-grid")


def cmd_mc_price(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    rate = _contract_rate(values, 0.0)
    problem = to_fk_problem(_pde_problem(values, rate), values["spot"])
    mc = fk_price(
        problem, n_paths=values["paths"], n_steps=values["steps"], seed=ctx.seed or 0,
        antithetic=values["antithetic"], workers=ctx.workers, block_size=ctx.block_size,
    )
    result = mc.to_dict()
    result["rate"] = rate
    return CommandOutput(result=result)


def cmd_closed_price(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    model = values["model"]
    spec = _vanilla(values, values["rate"])
    if model == "bs":
        result: Dict[str, Any] = {
            "price": bs_price(spec),
            "delta": bs_delta(spec),
            "rate": spec.rate,
        }
    elif model == "hetero":
        result = hetero_bs_price(values["mu1"], values["mu2"], spec).to_dict()
    else:
        result = {
            "price": drift_shifted_price(values["mu1"], values["mu2"], spec),
            "delta": drift_shifted_delta(values["mu1"], values["mu2"], spec),
            "rate": spec.rate,
            "carry": values["mu1"] - values["mu2"] + spec.rate,
        }
    result["model"] = model
    return CommandOutput(result=result)


def cmd_arb_demo(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    stats = simulate_pair_arbitrage(
        values["mu1"], values["mu2"], values["sigma"], maturity=values["maturity"],
        steps=values["steps"], n_paths=values["paths"], seed=ctx.seed or 0,
        workers=ctx.workers, block_size=ctx.block_size,
    )
    result = stats.to_dict()
    result["mean_pnl"] = stats.mean
    result["expected_pnl"] = (values["mu2"] - values["mu1"]) * values["maturity"]
    result["all_positive"] = bool(stats.minimum is not None and stats.minimum > 0.0)
    assert stats.per_path is not None
    rows = [[i, float(pnl)] for i, pnl in enumerate(stats.per_path)]
    return CommandOutput(result=result, table=(["path", "pnl"], rows), table_key="arb-demo-paths")


def cmd_hedge_demo(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    spec = _vanilla(values)
    report = simulate_costed_hedge(
        values["mu1"], values["mu2"], values["vol"], spec, steps=values["steps"],
        n_paths=values["paths"], seed=ctx.seed or 0, agent=values["agent"],
        rule=values["rule"], lambda_override=values["hedge_lambda"],
        workers=ctx.workers, block_size=ctx.block_size,
    )
    state = report.state
    rows = [
        [i, float(err), float(value)]
        for i, (err, value) in enumerate(zip(state.replication_error, state.portfolio_value))
    ]
    return CommandOutput(
        result=report.to_dict(),
        table=(["path", "replication_error", "portfolio_value"], rows),
        table_key="hedge-demo-paths",
    )


def _levels(values: Mapping[str, Any], kind: str) -> List[float]:
    raw = values["levels"] or CONVERGE_LEVELS[kind]
    try:
        levels = [float(item) for item in raw.split(",") if item.strip()]
    except ValueError:
        raise ValidationError(f"levels must be comma-separated numbers, got {raw!r}") from None
    if not levels or any(level <= 0 for level in levels):
        raise ValidationError(f"levels must be positive, got {raw!r}")
    if kind != "costed" and any(level != int(level) for level in levels):
        raise ValidationError(f"{kind} levels must be integers, got {raw!r}")
    return levels


def _converge_tree(values: Mapping[str, Any], levels: List[float], ctx: RunContext) -> Table:
    view = AgentView(values["mu"], values["sigma"])
    maturity = values["maturity"]
    limit = GBMParams(drift=values["mu"], vol=values["sigma"])
    limit_mean, limit_var = gbm_terminal_moments(limit, maturity)
    rows = []
    for level in levels:
        steps = int(level)
        step = step_params(view, maturity / steps)
        sample = simulate_terminal(
            step, steps, values["paths"], ctx.seed or 0, workers=ctx.workers,
            block_size=ctx.block_size,
        )
        rows.append([
            steps, float(np.mean(sample)), float(np.var(sample, ddof=1)),
            limit_mean, limit_var, ks_distance(sample, limit, maturity),
        ])
    return ["steps", "mean", "variance", "limit_mean", "limit_variance", "ks"], rows


def _converge_costed(values: Mapping[str, Any], levels: List[float]) -> Table:
    base = AgentView(values["mu"], values["sigma"])
    view = CostedView(base, values["trans_rate"], values["mix"])
    limit = costed_gbm_limit(view)
    rows = []
    for dt in levels:
        mean, variance = costed_step_moments(view, dt)
        rows.append([
            dt, mean, variance, abs(mean - (1.0 + limit.drift * dt)),
            abs(variance - limit.vol**2 * dt),
        ])
    return ["dt", "mean", "variance", "mean_residual", "variance_residual"], rows


def _converge_lattice(values: Mapping[str, Any], levels: List[float]) -> Table:
    lattice_values = dict(values, kind="call", cost_form="linear", s0=values["spot"])
    mkt = _lattice_market(lattice_values)
    reference = _lattice_reference(lattice_values, mkt)
    rows = []
    for level in levels:
        price = price_lattice(mkt, _lattice_claim(lattice_values, int(level))).price
        ref = None if reference is None else reference[1]
        rows.append([int(level), price, ref, None if ref is None else abs(price - ref)])
    return ["steps", "price", "reference", "error"], rows


def _converge_pde(values: Mapping[str, Any], levels: List[float]) -> Table:
    spec = VanillaSpec(
        spot=values["spot"], strike=values["strike"], maturity=values["maturity"],
        rate=values["rate"], vol=values["sigma"],
    )
    problem = PDEProblem(
        rate=constant(spec.rate), vol=constant(spec.vol), payoff=spec.payoff,
        maturity=spec.maturity,
    )
    reference = bs_price(spec)
    rows = []
    for level in levels:
        n = int(level)
        solution = solve_pde(problem, GridSpec(spot=spec.spot, n_space=n, n_time=n))
        price = solution.value_at(0.0, spec.spot)
        residual = pde_residual(solution, problem, t_max=0.5 * spec.maturity)
        rows.append([n, price, reference, abs(price - reference), residual])
    return ["n", "price", "reference", "error", "residual"], rows


def cmd_converge(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    kind = values["kind"]
    levels = _levels(values, kind)
    if kind == "tree":
        table = _converge_tree(values, levels, ctx)
    elif kind == "costed":
        table = _converge_costed(values, levels)
    elif kind == "lattice":
        table = _converge_lattice(values, levels)
    else:
        table = _converge_pde(values, levels)
    header, rows = table
    result = {"kind": kind, "columns": header, "rows": rows}
    return CommandOutput(result=result, table=table, table_key=f"converge-{kind}")


def cmd_xcheck(values: Dict[str, Any], ctx: RunContext) -> CommandOutput:
    rate = _contract_rate(values, 0.05)
    spec = _vanilla(values, rate)
    closed = bs_price(spec)
    problem = _pde_problem(values, rate)
    solution = solve_pde(problem, _grid(values))
    pde_value = solution.value_at(0.0, spec.spot)
    mc = fk_price(
        to_fk_problem(problem, spec.spot), n_paths=values["paths"], n_steps=values["steps"],
        seed=ctx.seed or 0, workers=ctx.workers, block_size=ctx.block_size,
    )
    pde_tol = values["pde_rel_tol"] * max(abs(closed), 1e-12)
    band = values["mc_std_errors"] * mc.std_error
    pde_ok = abs(pde_value - closed) <= pde_tol
    mc_ok = abs(mc.estimate - closed) <= band
    mc_pde_ok = abs(mc.estimate - pde_value) <= band + pde_tol
    agree = pde_ok and mc_ok and mc_pde_ok
    result = {
        "rate": rate,
        "closed_form": closed,
        "pde": pde_value,
        "mc": mc.to_dict(),
        "pde_error": abs(pde_value - closed),
        "mc_error": abs(mc.estimate - closed),
        "mc_pde_difference": abs(mc.estimate - pde_value),
    }
    if not agree:
        logger.warning(
            f"Cross-check disagreement: closed {closed:.10g}, PDE {pde_value:.10g}, "
            f"MC {mc.estimate:.10g} +/- {mc.std_error:.3g}"
        )
    return CommandOutput(
        result=result,
        extra={
            "tolerances": {
                "pde_rel_tol": values["pde_rel_tol"],
                "pde_abs_tol": pde_tol,
                "mc_std_errors": values["mc_std_errors"],
                "mc_band": band,
            },
            "agree": agree,
        },
        exit_code=0 if agree else EXIT_DISAGREE,
    )


COMMANDS: Dict[str, Callable[[Dict[str, Any], RunContext], CommandOutput]] = {
    "rates": cmd_rates,
    "alloc": cmd_alloc,
    "tree-price": cmd_tree_price,
    "pde-price": cmd_pde_price,
    "mc-price": cmd_mc_price,
    "closed-price": cmd_closed_price,
    "arb-demo": cmd_arb_demo,
    "hedge-demo": cmd_hedge_demo,
    "converge": cmd_converge,
    "xcheck": cmd_xcheck,
}


def _flat_rows(result: Mapping[str, Any], prefix: str = "") -> List[List[Any]]:
    rows: List[List[Any]] = []
    for key, value in result.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flat_rows(value, prefix=f"{name}."))
        elif isinstance(value, list):
            rows.append([name, json.dumps(value)])
        else:
            rows.append([name, value])
    return rows


def _configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(getattr(logging, level))


def _open_storage(folder: str) -> ResultStorage:
    try:
        return LocalFileResultStorage(folder)
    except OSError as e:
        raise StorageError(f"cannot use output directory {folder}: {e}") from None


def _store(
    storage: ResultStorage,
    command: str,
    document: Dict[str, Any],
    output: CommandOutput,
    paths_csv: bool,
    output_format: str,
) -> None:
    """Write the document and its table, replacing what an earlier run left behind."""
    table_key = output.table_key or command
    store_table = output.table is not None and (
        paths_csv or table_key not in ("arb-demo-paths", "hedge-demo-paths")
    )
    try:
        previous = storage.get(command)
        if previous is not None:
            stored = storage.get_metadata(command) or {}
            changed = isinstance(previous, dict) and previous.get("inputs") != document["inputs"]
            logger.info(
                f"Replacing {command} result from {stored.get('last_updated')}"
                f"{' computed with other inputs' if changed else ''}"
            )
            storage.delete(command)
        storage.set(command, document, metadata={"format": output_format})
        if store_table and output.table is not None:
            storage.write_table(table_key, *output.table)
        elif table_key != command:
            # A table left by an earlier run no longer matches this document.
            storage.delete(table_key)
    except OSError as e:
        raise StorageError(f"cannot write {command} results: {e}") from None
    finally:
        storage.close()


def _execute(argv: Optional[Sequence[str]]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required")
    command = args.command
    scenario = load_scenario(args.scenario, command) if args.scenario else {}
    env = RunSettings.from_env()

    log_level = _pick(args.log_level, scenario, "log_level", env.log_level)
    settings = RunSettings(
        threads=_pick(args.threads, scenario, "threads", env.threads),
        output_dir=_pick(args.output_dir, scenario, "output_dir", env.output_dir),
        log_level=log_level,
        block_size=env.block_size,
    )
    _configure_logging(settings.log_level)

    seed = _pick(args.seed, scenario, "seed", None)
    if command in STOCHASTIC_COMMANDS and seed is None:
        raise UsageError(f"--seed is required for {command}")
    if seed is not None and not _valid_seed(seed):
        raise ValidationError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    output_format = _pick(args.format, scenario, "format", "json")
    if output_format not in ("json", "csv"):
        raise ValidationError(f"format must be json or csv, got {output_format!r}")

    values = resolve_params(COMMAND_PARAMS[command], args, scenario)
    check_preconditions(values)
    storage = _open_storage(settings.output_dir) if settings.output_dir else None
    ctx = RunContext(
        seed=seed,
        workers=settings.threads,
        block_size=settings.block_size,
        storage=storage,
        paths_csv=bool(_pick(args.paths_csv, scenario, "paths_csv", False)),
    )
    logger.info(f"Running {command} with {ctx.workers} worker(s)")

    output = COMMANDS[command](values, ctx)
    document = envelope(command, output.result, inputs=values, seed=seed, **output.extra)
    validate_result(document)

    if output_format == "csv":
        header, rows = output.table or (["key", "value"], _flat_rows(document["result"]))
        sys.stdout.write(table_to_csv(header, rows))
    else:
        sys.stdout.write(dumps(document) + "\n")

    if storage is not None:
        _store(storage, command, document, output, ctx.paths_csv, output_format)
    return output.exit_code


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command and return its exit code.

    Errors are reported on stderr as ``ErrorName: message``.
    """
    try:
        return _execute(argv)
    except UsageError as e:
        print(f"UsageError: {e}", file=sys.stderr)
        return UsageError.exit_code
    except ValidationError as e:
        print(f"ValidationError: {e}", file=sys.stderr)
        return ValidationError.exit_code
    except PricingError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return PricingError.exit_code
    except StorageError as e:
        print(f"StorageError: {e}", file=sys.stderr)
        return StorageError.exit_code


def main() -> None:
    """Console entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
