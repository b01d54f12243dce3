"""Expected-reward prediction and cost-aware model routing.

Per-prompt empirical expected-reward targets from sampled rewards, ridge
predictors on prompt embeddings, cost-adjusted routing policies with
baselines, and a regret/cost evaluation harness.
"""

from .dataset import (
    ERDataset,
    PromptRecord,
    RewardSampleSet,
    Split,
    build_er_dataset,
    empirical_er,
    load_prompts,
    load_rewards,
    stratified_split,
)
from .erp import (
    ERMatrix,
    ModelPool,
    Provenance,
    auroc,
    empirical_matrix,
    fit_pairwise_logistic,
    pairwise_win_labels,
    pairwise_win_score,
    predict_matrix,
)
from .errors import DataError, ErpError, NumericalError
from .evaluation import (
    ParetoPoint,
    WinRateTable,
    mean_cost,
    pareto_frontier,
    per_category_r2,
    prop1_bound,
    prop1_monte_carlo,
    regret,
    sweep,
    win_rate_table,
)
from .ridge import LinearPredictor, fit_ridge, r_squared
from .routing import (
    RoutingAssignment,
    ZooterModel,
    auto_lambda_grid,
    auto_lambda_max,
    fit_zooter,
    per_category_oracle,
    permute_assignment,
    route_by_category,
    route_erp,
    route_fixed,
    route_random,
    route_zooter,
)
from .synth import SynthConfig, SynthResult, generate

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "ERDataset",
    "ERMatrix",
    "ErpError",
    "LinearPredictor",
    "ModelPool",
    "NumericalError",
    "ParetoPoint",
    "PromptRecord",
    "Provenance",
    "RewardSampleSet",
    "RoutingAssignment",
    "Split",
    "SynthConfig",
    "SynthResult",
    "WinRateTable",
    "ZooterModel",
    "auroc",
    "auto_lambda_grid",
    "auto_lambda_max",
    "build_er_dataset",
    "empirical_er",
    "empirical_matrix",
    "fit_pairwise_logistic",
    "fit_ridge",
    "fit_zooter",
    "generate",
    "load_prompts",
    "load_rewards",
    "mean_cost",
    "pairwise_win_labels",
    "pairwise_win_score",
    "pareto_frontier",
    "per_category_oracle",
    "per_category_r2",
    "permute_assignment",
    "predict_matrix",
    "prop1_bound",
    "prop1_monte_carlo",
    "r_squared",
    "regret",
    "route_by_category",
    "route_erp",
    "route_fixed",
    "route_random",
    "route_zooter",
    "stratified_split",
    "sweep",
    "win_rate_table",
]
