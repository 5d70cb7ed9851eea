"""Multi-level strategic classification toolkit.

An agent with an unobservable attribute faces a ladder of threshold
classifiers and splits costly effort between genuine improvement and
gaming. This package solves the agent's infinite-horizon best response
(interpolated value iteration on a reparameterized fixed point),
evaluates the analytic two-level theory, constructs and verifies
threshold ladders for the principal, and optimizes a relaxed principal
objective over a population of agents with CMA-ES.

Modules
-------
core        model constants, ladder, classifier, one-step dynamics
bellman     W-transform, candidate branches, running-minimum backup
solver      value iteration to convergence, policy extraction, diagnostics
closed_form two-level analytic value functions and policies
design      feasibility bounds, natural sequence, greedy thresholds
simulate    deterministic rollouts, steady states, population aggregates
principal   relaxed utility, CMA-ES, level search, score ingestion
oracle      brute-force finite-horizon DP used for cross-checks
cli         command-line entry point and experiment presets
"""

from .core import (
    Action,
    AgentState,
    ClassifierOutcome,
    Ladder,
    ModelParams,
    check_incentivizable,
    classify,
    impossibility_general,
    natural_equilibrium,
    step,
)
from .bellman import GridSpec, ValueGrid, default_grid
from .solver import (
    ConvergenceReport,
    Policy,
    SolverConvergenceError,
    convergence_report,
    error_bound,
    load_policy,
    save_policy,
    value_iterate,
)
from .closed_form import (
    PiecewiseLinearW,
    RegimeTag,
    RegionBounds,
    TwoLevelPolicyParams,
    TwoLevelRegime,
    classify_regime,
    policy_closed,
    region_boundaries,
    two_level_policy_params,
    w_closed,
)
from .design import (
    DesignProblem,
    FeasibilityReport,
    GreedyResult,
    LegupConditions,
    greedy_thresholds,
    infeasibility_bound_no_legup,
    legup_feasibility_conditions,
    natural_sequence,
    sweep_entry,
    verify_feasible,
    write_sweep_csv,
)
from .simulate import (
    PopulationAggregate,
    SteadyState,
    Trajectory,
    TrajectoryStep,
    improvement_fraction,
    population_rollout,
    rollout,
    steady_state,
    write_trajectory_csv,
)
from .principal import (
    CmaConfig,
    DesignVector,
    InitialDistribution,
    LevelResult,
    LevelSearch,
    PrincipalParams,
    UtilityTerms,
    cma_es_optimize,
    design_ladder,
    design_policy,
    gaming_free_mass,
    load_score_distribution,
    optimize_over_levels,
    project_design,
    relaxed_utility,
    synthetic_score_distribution,
    utility_terms,
    write_json_report,
)

__all__ = [
    "Action",
    "AgentState",
    "ClassifierOutcome",
    "CmaConfig",
    "ConvergenceReport",
    "DesignProblem",
    "DesignVector",
    "FeasibilityReport",
    "GreedyResult",
    "GridSpec",
    "InitialDistribution",
    "Ladder",
    "LegupConditions",
    "LevelResult",
    "LevelSearch",
    "ModelParams",
    "PiecewiseLinearW",
    "Policy",
    "PopulationAggregate",
    "PrincipalParams",
    "RegimeTag",
    "RegionBounds",
    "SolverConvergenceError",
    "SteadyState",
    "Trajectory",
    "TrajectoryStep",
    "TwoLevelPolicyParams",
    "TwoLevelRegime",
    "UtilityTerms",
    "ValueGrid",
    "check_incentivizable",
    "classify",
    "classify_regime",
    "cma_es_optimize",
    "convergence_report",
    "default_grid",
    "design_ladder",
    "design_policy",
    "error_bound",
    "gaming_free_mass",
    "greedy_thresholds",
    "impossibility_general",
    "improvement_fraction",
    "infeasibility_bound_no_legup",
    "legup_feasibility_conditions",
    "load_policy",
    "load_score_distribution",
    "natural_equilibrium",
    "natural_sequence",
    "optimize_over_levels",
    "policy_closed",
    "population_rollout",
    "project_design",
    "region_boundaries",
    "relaxed_utility",
    "rollout",
    "save_policy",
    "step",
    "steady_state",
    "sweep_entry",
    "synthetic_score_distribution",
    "two_level_policy_params",
    "utility_terms",
    "value_iterate",
    "verify_feasible",
    "w_closed",
    "write_json_report",
    "write_sweep_csv",
    "write_trajectory_csv",
]
