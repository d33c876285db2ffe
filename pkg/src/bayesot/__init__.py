"""Posterior sampling of transport plans from ensembles of random cost matrices."""
from ._backend import BACKEND
from .cost_models import (
    Empirical,
    EnsembleFormatError,
    Gaussian,
    HierarchicalModel,
    PointMass,
    load_ensemble,
    profile_cost,
    sample_cost,
    save_ensemble,
)
from .hmc import (
    DualAveraging,
    HmcConfig,
    InitializationError,
    SampleSet,
    accept_probability,
    diagnostics,
    effective_sample_size,
    hamiltonian,
    hmc_transition,
    leapfrog,
    run_chains,
    split_rhat,
    summarize,
)
from .ot_solvers import (
    ConvergenceError,
    Regularizer,
    SolverReport,
    exact_ot,
    regularized_ot,
    sinkhorn,
    transport_cost,
)
from .polytope import (
    DiscreteMeasure,
    TransportPlan,
    chart_adjoint,
    chart_embed,
    chart_from_plan,
    independent_coupling,
    is_feasible,
    plan_from_chart,
)
from .posterior import (
    CostEnsemble,
    PosteriorSpec,
    UnsupportedOperation,
    grad_neg_log_posterior,
    log_likelihood_single,
    map_estimate,
    neg_log_posterior,
)
from .priors import InfeasiblePointError, Prior, grad_log_prior_theta, log_prior

__version__ = "0.1.0"
