"""Routing evaluation: per-prompt regret, mean cost, exchange-rate sweeps,
Pareto frontiers, win-rate tables, per-category R^2, and the subgaussian
win-probability bound with its Monte-Carlo checker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .dataset import PromptRecord
from .erp import ERMatrix, ModelPool, Provenance
from .errors import DataError
from .ridge import LinearPredictor, r_squared
from .routing import RoutingAssignment
from .rng import substream

AGGREGATE_KEY = "Aggregate"


@dataclass(frozen=True)
class ParetoPoint:
    """(lam, mean cost, mean regret) for one policy configuration."""

    lam: float
    mean_cost: float
    mean_regret: float
    policy_name: str


@dataclass(frozen=True)
class WinRateTable:
    """Per-category fraction of prompts each model wins (ties split evenly)."""

    category: str
    fractions: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        f = np.asarray(self.fractions, dtype=np.float64)
        if f.ndim != 1 or np.any(f < 0.0) or abs(float(f.sum()) - 1.0) > 1e-12:
            raise DataError("win-rate fractions must be nonnegative and sum to 1")
        object.__setattr__(self, "fractions", f)


def regret(empirical: ERMatrix, assignment: RoutingAssignment) -> np.ndarray:
    """Per-prompt gap between the best model's empirical expected reward and
    the routed model's."""
    if empirical.prompt_ids != assignment.prompt_ids:
        raise DataError("assignment prompts do not match the empirical matrix")
    if len(assignment) and (
        assignment.chosen.min() < 0 or assignment.chosen.max() >= len(empirical.model_ids)
    ):
        raise DataError("assignment indices out of range for the matrix")
    values = empirical.values
    if not len(assignment):
        return np.empty(0)
    best = values.max(axis=1)
    routed = values[np.arange(values.shape[0]), assignment.chosen]
    return best - routed


def mean_cost(assignment: RoutingAssignment, pool: ModelPool) -> float:
    """Average per-prompt cost of an assignment.

    Accumulated from per-model counts, so the value is independent of prompt
    order: permuted assignments cost exactly the same.
    """
    if not len(assignment):
        raise DataError("mean cost is undefined for an empty assignment")
    if assignment.chosen.max() >= len(pool):
        raise DataError("assignment indices out of range for the pool")
    counts = np.bincount(assignment.chosen, minlength=len(pool)).astype(np.float64)
    return float(np.dot(counts, pool.costs) / len(assignment))


def sweep(
    policy: Callable[[float], RoutingAssignment],
    lambdas: Sequence[float],
    empirical: ERMatrix,
    pool: ModelPool,
) -> list[ParetoPoint]:
    """Evaluate a policy family over an exchange-rate grid."""
    points = []
    for lam in lambdas:
        assignment = policy(float(lam))
        points.append(
            ParetoPoint(
                lam=float(lam),
                mean_cost=mean_cost(assignment, pool),
                mean_regret=float(regret(empirical, assignment).mean()),
                policy_name=assignment.policy_name,
            )
        )
    return points


def pareto_frontier(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated points, sorted by cost ascending.

    A point is dominated when another has cost <= and regret <= with one
    strict; exact duplicates collapse to the first.
    """
    frontier: list[ParetoPoint] = []
    best_regret = math.inf
    for point in sorted(points, key=lambda p: (p.mean_cost, p.mean_regret)):
        if point.mean_regret < best_regret:
            frontier.append(point)
            best_regret = point.mean_regret
    return frontier


def win_rate_table(matrix: ERMatrix, categories: Sequence[str]) -> list[WinRateTable]:
    """Fraction of prompts each model wins within each category.

    A prompt's win credit splits equally among the models attaining its row
    maximum.
    """
    if len(categories) != matrix.n_prompts:
        raise DataError("categories do not align with the matrix rows")
    if matrix.n_prompts == 0:
        raise DataError("win rates are undefined for an empty matrix")
    weights = kernels.argmax_tie_weights(matrix.values)
    tables = []
    for category in sorted(set(categories)):
        rows = [i for i, c in enumerate(categories) if c == category]
        tables.append(
            WinRateTable(
                category=category,
                fractions=weights[rows].mean(axis=0),
                provenance=matrix.provenance,
            )
        )
    return tables


def per_category_r2(
    predictor: LinearPredictor,
    prompts: Sequence[PromptRecord],
    targets,
) -> dict[str, float]:
    """R^2 within each category plus an 'Aggregate' entry over all prompts."""
    t = np.asarray(targets, dtype=np.float64)
    if t.shape[0] != len(prompts):
        raise DataError("targets do not align with the prompts")
    if not prompts:
        raise DataError("R^2 is undefined without prompts")
    embeddings = np.vstack([p.embedding for p in prompts])
    predictions = predictor.predict_batch(embeddings)
    result = {AGGREGATE_KEY: r_squared(predictions, t)}
    for category in sorted({p.category for p in prompts}):
        rows = [i for i, p in enumerate(prompts) if p.category == category]
        result[category] = r_squared(predictions[rows], t[rows])
    return result


def prop1_bound(er_gap: float, sigma: float) -> float:
    """Win-probability lower bound from an expected-reward gap when both
    reward distributions are sigma^2-subgaussian: 1 - exp(-gap^2 / (4 sigma^2)).

    Meaningful for gap >= 0 (the better model in front); the formula is
    sign-insensitive.
    """
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError("sigma must be a finite value > 0")
    if not math.isfinite(er_gap):
        raise ValueError("er_gap must be finite")
    return 1.0 - math.exp(-(er_gap * er_gap) / (4.0 * sigma * sigma))


class Prop1Result(NamedTuple):
    empirical: float
    bound: float


def prop1_monte_carlo(
    mu0: float, mu1: float, sigma: float, n: int, seed: int
) -> Prop1Result:
    """Empirical win probability of model 1 over model 0 under Gaussian
    rewards (the canonical sigma^2-subgaussian family), next to the bound."""
    if n < 1:
        raise ValueError("n must be at least 1")
    bound = prop1_bound(mu1 - mu0, sigma)
    rng = substream(seed, "prop1")
    rewards0 = mu0 + sigma * rng.standard_normal(n)
    rewards1 = mu1 + sigma * rng.standard_normal(n)
    empirical = float(np.count_nonzero(rewards1 > rewards0) / n)
    return Prop1Result(empirical=empirical, bound=bound)


def write_pareto_csv(path, points: Sequence[ParetoPoint]) -> None:
    """CSV export: ``policy,lambda,mean_cost,mean_regret`` per point."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("policy,lambda,mean_cost,mean_regret\n")
        for p in points:
            fh.write(
                f"{p.policy_name},{format(p.lam, '.17g')},"
                f"{format(p.mean_cost, '.17g')},{format(p.mean_regret, '.17g')}\n"
            )
