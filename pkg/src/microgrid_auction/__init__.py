"""Iterative double-auction engine for energy trading in a microgrid."""

from .clearing import (
    BID_FLOOR,
    PROPORTIONAL,
    ClearingResult,
    NumericalFailure,
    TiePolicy,
    aggregate_demand,
    aggregate_supply,
    clear_market,
    clear_market_proximal,
    clearing_objective,
    kkt_residual,
    proximal,
)
from .engine import (
    AuctionConfig,
    AuctionOutcome,
    AuctionState,
    IterationRecord,
    auction_step,
    buyer_prices,
    init_auction,
    run_auction,
)
from .experiments import (
    CaseStudyConfig,
    EfficiencyConfig,
    ExperimentReport,
    PayoffSweepConfig,
    WelfareFairnessConfig,
    exp_case_study,
    exp_efficiency,
    exp_payoff_sweep,
    exp_welfare_fairness,
    mix_seed,
    spearman_rho,
    splitmix64,
    verify_outcome,
)
from .fairness import (
    InfeasibleTotal,
    RedistributionResult,
    price_of_fairness,
    redistribute,
    uniform_reprice,
    water_fill,
)
from .market import (
    BuyerState,
    MarketParams,
    Payoffs,
    SellerState,
    buyer_bid_update,
    buyer_marginal,
    buyer_utility,
    compute_payoffs,
    declare_availability,
    seller_ask_update,
    seller_marginal,
    seller_utility,
)
from .scenario import (
    ParameterRanges,
    Scenario,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_from_json,
    scenario_to_json,
)
from .utility import ConcaveUtility, LogUtility, inverse_marginal_by_bisection
from .welfare import WelfareSolution, efficiency_gap, social_welfare, solve_welfare

__version__ = "0.1.0"
