"""Batch Pareto-optimal Thompson sampling for multiobjective Bayesian optimization.

The package is organized around six pieces: Gaussian-process regression with
consistent posterior sample paths (:mod:`qpots.gp`), Pareto bookkeeping and
hypervolume (:mod:`qpots.pareto`), an NSGA-II inner solver
(:mod:`qpots.nsga2`), the sample-path acquisition itself
(:mod:`qpots.acquisition`), a benchmark problem registry
(:mod:`qpots.problems`), and the replicated experiment harness with its CLI
(:mod:`qpots.harness`, :mod:`qpots.cli`).
"""

from .acquisition import (
    AcquisitionRound,
    CandidateBatch,
    acquire,
    equality_indicator,
    maximin_select,
    sample_pareto_set,
)
from .errors import (
    AcquisitionFailureError,
    InvalidArgumentError,
    NotAvailableError,
    NumericalFailureError,
)
from .gp import (
    Dataset,
    GpModel,
    KernelFamily,
    KernelSpec,
    LandmarkRule,
    NystromConfig,
    PathSampler,
    build_model,
    fit,
    joint_sample,
    kernel_eval,
    kernel_matrix,
    nystrom_sqrt,
    posterior,
    posterior_block,
)
from .harness import (
    ExperimentConfig,
    RunTrace,
    observed_hypervolume,
    run,
    run_replicate,
    seed_design,
    sobol_batch,
    solver_validation_sweeps,
    summarize,
)
from .nsga2 import ConstraintTag, EvolverConfig, Individual, constrained_dominates, crowding_distance, minimize
from .pareto import (
    ParetoFront,
    dominates,
    fast_nondominated_sort,
    hypervolume,
    hypervolume_exact,
    hypervolume_mc,
    igd,
    nondominated_filter,
)
from .problems import NoisyOracle, Problem, analytic_front_sample, evaluate, get_problem, list_problems, observe

__version__ = "0.1.0"
