"""Capacity-constrained weighted allocation: offline optimum, primal-dual
assignment, randomized online policies and their expected-cost predictors."""

__version__ = "0.1.0"

from .analysis import (
    ExperimentSummary,
    Predictions,
    capacity_weighted_mean,
    competitive_ratios,
    mean_distance,
    monte_carlo,
    predict_cost,
)
from .model import (
    Allocation,
    Instance,
    InfeasibleError,
    OnlineState,
    Request,
    RequestStream,
    RunTrace,
    check_feasibility,
    remaining_capacity,
    total_cost,
    validate_instance,
    validate_stream,
)
from .offline import (
    DualSolution,
    brute_force_optimal,
    check_dual_certificate,
    dual_objective,
    solve_lp_optimal,
    solve_primal_dual,
)
from .online import (
    Policy,
    available_consumers,
    replay,
    run_capacity_proportional,
    run_greedy,
    run_uniform,
    run_uniform_split,
    simulate,
)
from .workload import GeneratorConfig, generate, sweep
