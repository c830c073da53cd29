"""poenet: pathway-anchored Bayesian inference for dependent probability of
expression.

Expression measurements are reduced to latent trinary indicators (under-,
normally-, over-expressed) whose probit scores follow a simultaneous-equations
Gaussian model structured by a prior pathway graph. Inference runs Gibbs,
Metropolis-Hastings, and reversible-jump MCMC over parameters, coefficients,
and the graph itself, and reports posterior expression probabilities, edge
inclusion probabilities, and selected graphs.
"""

__version__ = "0.1.0"

from .graphs import (
    PriorGraph,
    ReciprocalGraph,
    StructurePriorParams,
    UndirectedGraph,
    degree,
    is_subgraph,
    log_structure_prior,
    moralize,
    parents,
)
from .model import (
    ChainState,
    ExpressionDataset,
    LatentState,
    MixtureHyperParams,
    MixtureParams,
    ModelHyperParams,
    NumericalError,
    SEMHyperParams,
    SEMParams,
    ValidationError,
    conditional_score_law,
    indicator_from_score,
    indicators_from_scores,
    mean_surface,
    mixture_log_density,
    orthant_probability_reference,
    sem_log_density,
    sem_precision,
)
from .sampler import MoveStats, SamplerConfig, init_state, run_chain, sweep, validate_state
from .simulate import (
    SimulationConfig,
    SimulationTruth,
    gen_dataset,
    gen_precision,
    gen_prior_graph,
    gen_structural_truth,
    simulate_all,
)
from .summarize import (
    PosteriorSummary,
    SelectedGraph,
    classification_auc,
    compute_summary,
    diagnostics,
    evaluate_against_truth,
    select_median_model,
)
from .trace import TraceStore
