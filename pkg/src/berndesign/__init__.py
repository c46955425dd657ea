"""Variance-optimal correlated Bernoulli treatment-assignment designs."""

from .core import (
    IID,
    AssignmentVector,
    Hybrid,
    HybridGrouping,
    MatchedPairs,
    Mixture,
    OracleVector,
    Partition,
    PreconditionError,
    Stratified,
    TwoCluster,
    hybrid_group_sizes,
    validate_design,
)
from .designs import (
    dense_covariance,
    marginal_means,
    mix,
    mixture_representation,
    quadratic_form,
    sample_assignment,
    sample_assignments,
)
from .estimation import (
    balance_diagnostics,
    build_pi,
    conditional_variance,
    confidence_interval,
    estimate,
    ex_post_mean,
    ipw_estimate,
    variance_estimator,
)
from .robustness import (
    PerturbationSpec,
    closed_form_after,
    inflation_scaling_experiment,
    worst_case_perturbation,
)
from .rng import DEFAULT_SEED
from .sim import (
    DGPSpec,
    Population,
    ProxySpec,
    SimResult,
    build_design,
    generate_population,
    make_proxy,
    reproduce_figure,
    run_clt_study,
    run_monte_carlo,
)
from .solvers import (
    SolverConfig,
    build_hybrid,
    build_matched_pairs,
    solve_balanced,
    solve_balanced_greedy_pairs,
    solve_knapsack,
)

__version__ = "0.1.0"
