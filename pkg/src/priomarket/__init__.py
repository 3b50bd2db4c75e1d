"""Paid-prioritization market simulator.

A monopoly ISP sells fast lanes to content providers placed on a Hotelling
line; users subscribe to one or two providers. The package solves the game in
closed form where one exists, optimizes the ISP's offers, measures user
welfare, and checks everything against a brute-force grid of users.
"""

from .costs import ReciprocalCost, cost_from_dict
from .equilibrium import (
    UNIFORM,
    DistributionSpec,
    EquilibriumOutcome,
    MassBreakdown,
    NegativeMassError,
    cp_revenue,
    cp_revenues,
    isp_profit,
    masses_all_dual,
    masses_default,
    masses_multi,
    masses_nonuniform,
    masses_single,
    prioritization_deltas,
)
from .kernels import BACKEND
from .model import (
    AssumptionReport,
    Bundle,
    CPProfile,
    DelayProfile,
    MarketError,
    MarketParams,
    Regime,
    RegimeError,
    ThrottlingError,
    best_bundle,
    bundle_utility,
    make_cps,
    calibration_cps,
    calibration_params,
    thresholds,
    validate_assumptions,
)
from .optimizer import (
    CapacityPlan,
    ConvergenceError,
    InfeasibleError,
    PrioritizationOffer,
    affordability_check,
    analytic_delay,
    capacity_reallocation,
    optimal_delay,
    optimize_nonuniform,
    optimize_offers,
    optimize_single_purchase,
    prioritization_price,
    solve_market,
    uniform_menu_optimize,
)
from .oracle import OracleReport, adjacency_check, compare_masses, simulate_users
from .scenario import Scenario, ScenarioError, default_scenario, load_scenario
from .sweeps import SweepOptions, emit_csv, run_sweep
from .welfare import WelfareReport, segment_welfare_closed, total_welfare_closed, total_welfare_numeric, welfare_delta

__version__ = "0.1.0"
