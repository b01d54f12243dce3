"""Routing policies: map each prompt to a pool model under a reward/cost
exchange rate ``lam``.

The core policy picks, per prompt, ``argmax_j score[j] - lam * cost[j]``
with exact ties broken toward the cheaper model and then the lower pool
index. Baselines (fixed model, purely random, permuted predictions,
per-category oracle) and a softmax-distribution router trained against
per-model reward targets share the same assignment representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .dataset import PromptRecord
from .erp import ERMatrix, ModelPool
from .errors import DataError, NumericalError
from .rng import substream


@dataclass(frozen=True)
class RoutingAssignment:
    """Chosen model index per prompt, with the policy and lam that made it."""

    prompt_ids: tuple[str, ...]
    chosen: np.ndarray  # int64 model indices, pool order
    policy_name: str
    lam: float

    def __post_init__(self):
        chosen = np.ascontiguousarray(self.chosen, dtype=np.int64)
        if chosen.ndim != 1 or chosen.shape[0] != len(self.prompt_ids):
            raise DataError("assignment indices misaligned with prompt ids")
        object.__setattr__(self, "prompt_ids", tuple(self.prompt_ids))
        object.__setattr__(self, "chosen", chosen)

    def __len__(self) -> int:
        return self.chosen.shape[0]


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (math.isfinite(lam) and lam >= 0.0):
        raise ValueError("lam must be a finite value >= 0")
    return lam


def _check_alignment(matrix: ERMatrix, pool: ModelPool) -> None:
    if matrix.model_ids != pool.model_ids:
        raise DataError("ER matrix columns do not match the pool order")


def route_erp(matrix: ERMatrix, pool: ModelPool, lam: float) -> RoutingAssignment:
    """Cost-adjusted argmax over predicted expected rewards.

    The cost budget itself never appears: it is a prompt-independent constant
    inside the relaxed objective and drops out of the per-prompt argmax.
    """
    lam = _check_lambda(lam)
    _check_alignment(matrix, pool)
    chosen = kernels.cost_adjusted_argmax(matrix.values, pool.costs, lam)
    return RoutingAssignment(
        prompt_ids=matrix.prompt_ids, chosen=chosen, policy_name="erp", lam=lam
    )


def auto_lambda_max(matrix: ERMatrix, pool: ModelPool) -> float:
    """Smallest exchange rate guaranteed to pin routing to the cheapest model.

    (score spread) / (smallest nonzero cost gap), padded by 1e-9 relative so
    floating-point rounding cannot leave a pricier model ahead at the
    returned value. Degenerate inputs (constant scores or uniform costs, for
    which any positive rate pins the policy) return 1.0.
    """
    if matrix.n_prompts == 0:
        raise DataError("cannot derive a lambda scale from an empty matrix")
    _check_alignment(matrix, pool)
    spread = float(matrix.values.max() - matrix.values.min())
    unique_costs = np.unique(pool.costs)
    if spread <= 0.0 or unique_costs.shape[0] < 2:
        return 1.0
    min_gap = float(np.diff(unique_costs).min())
    return spread / min_gap * (1.0 + 1e-9)


def auto_lambda_grid(
    matrix: ERMatrix, pool: ModelPool, n_points: int = 20, span: float = 1e4
) -> np.ndarray:
    """Sweep grid: 0 plus a log-spaced ramp ending at ``auto_lambda_max``.

    The extremes provably reach the pure-reward (lam = 0) and pure-cost
    (lam = lambda_max) regimes.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    lam_max = auto_lambda_max(matrix, pool)
    ramp = np.geomspace(lam_max / span, lam_max, n_points - 1)
    return np.concatenate([[0.0], ramp])


def route_fixed(
    pool: ModelPool, model_index: int, prompts: Sequence[PromptRecord]
) -> RoutingAssignment:
    """Send every prompt to one fixed model."""
    if not 0 <= model_index < len(pool):
        raise DataError(f"model index {model_index} out of range for pool of {len(pool)}")
    return RoutingAssignment(
        prompt_ids=tuple(p.id for p in prompts),
        chosen=np.full(len(prompts), model_index, dtype=np.int64),
        policy_name=f"fixed_{pool.model_ids[model_index]}",
        lam=0.0,
    )


def route_random(
    pool: ModelPool, prompts: Sequence[PromptRecord], seed: int
) -> RoutingAssignment:
    """I.i.d. uniform model choice per prompt, seed-deterministic."""
    rng = substream(seed, "route-random")
    chosen = rng.integers(0, len(pool), size=len(prompts), dtype=np.int64)
    return RoutingAssignment(
        prompt_ids=tuple(p.id for p in prompts),
        chosen=chosen,
        policy_name="random",
        lam=0.0,
    )


def permute_assignment(assignment: RoutingAssignment, seed: int) -> RoutingAssignment:
    """Seeded uniform permutation of the chosen models across prompts.

    Destroys the per-prompt conditioning while preserving the multiset of
    chosen models, and with it the total cost.
    """
    rng = substream(seed, "permutation", assignment.policy_name, assignment.lam)
    order = rng.permutation(len(assignment))
    return RoutingAssignment(
        prompt_ids=assignment.prompt_ids,
        chosen=assignment.chosen[order],
        policy_name="permutation",
        lam=assignment.lam,
    )


def per_category_oracle(
    train_prompts: Sequence[PromptRecord],
    empirical: ERMatrix,
    pool: ModelPool,
    lam: float,
) -> dict[str, int]:
    """Best average cost-adjusted model per category on training data.

    Needs oracle category labels at evaluation time; see
    ``route_by_category``.
    """
    lam = _check_lambda(lam)
    _check_alignment(empirical, pool)
    if empirical.prompt_ids != tuple(p.id for p in train_prompts):
        raise DataError("empirical matrix rows do not match the training prompts")
    if not train_prompts:
        raise DataError("per-category oracle needs at least one training prompt")
    categories = sorted({p.category for p in train_prompts})
    means = np.empty((len(categories), len(pool)))
    for i, category in enumerate(categories):
        rows = [j for j, p in enumerate(train_prompts) if p.category == category]
        means[i] = empirical.values[rows].mean(axis=0)
    chosen = kernels.cost_adjusted_argmax(means, pool.costs, lam)
    return {category: int(idx) for category, idx in zip(categories, chosen)}


def route_by_category(
    table: dict[str, int],
    prompts: Sequence[PromptRecord],
    pool: ModelPool,
    lam: float,
) -> RoutingAssignment:
    """Apply a per-category oracle table; unseen categories are an error."""
    lam = _check_lambda(lam)
    chosen = np.empty(len(prompts), dtype=np.int64)
    for i, p in enumerate(prompts):
        if p.category not in table:
            raise DataError(f"category {p.category!r} was not seen in training")
        chosen[i] = table[p.category]
    return RoutingAssignment(
        prompt_ids=tuple(p.id for p in prompts),
        chosen=chosen,
        policy_name="category_oracle",
        lam=lam,
    )


def softmax_targets(rewards, temperature: float) -> np.ndarray:
    """Row-wise softmax of rewards / temperature (the training target of the
    distribution router)."""
    if not (math.isfinite(temperature) and temperature > 0.0):
        raise ValueError("temperature must be a finite value > 0")
    with np.errstate(over="ignore"):
        r = np.asarray(rewards, dtype=np.float64) / temperature
    if not np.all(np.isfinite(r)):
        raise NumericalError(
            "reward/temperature ratio overflowed; use a larger temperature"
        )
    r = r - r.max(axis=1, keepdims=True)
    e = np.exp(r)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class ZooterModel:
    """Linear-softmax router over per-model reward distributions.

    ``weights`` holds one row per pool model (bias in the last column); raw
    logits act as the per-model reward proxy when routing.
    """

    weights: np.ndarray  # (M, D+1)
    target_temperature: float
    grad_norm: float = field(default=0.0, compare=False)
    iterations: int = field(default=0, compare=False)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or not np.all(np.isfinite(w)):
            raise DataError("router weights must be a finite matrix")
        if not (math.isfinite(self.target_temperature) and self.target_temperature > 0):
            raise DataError("target temperature must be > 0")
        object.__setattr__(self, "weights", w)

    @property
    def n_models(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1

    def logits(self, embeddings) -> np.ndarray:
        x = np.asarray(embeddings, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DataError(
                f"router expects embeddings of dimension {self.dim}, got {x.shape}"
            )
        return x @ self.weights[:, :-1].T + self.weights[:, -1]

    def probabilities(self, embeddings) -> np.ndarray:
        z = self.logits(embeddings)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)


def _spectral_bound(design: np.ndarray) -> float:
    """Deterministic power-iteration upper estimate of sigma_max(design)^2."""
    v = np.full(design.shape[1], 1.0 / math.sqrt(design.shape[1]))
    value = 0.0
    for _ in range(50):
        w = design.T @ (design @ v)
        value = float(np.linalg.norm(w))
        if value == 0.0:
            return 1.0
        v = w / value
    return value * 1.01


def fit_zooter(
    embeddings,
    rewards,
    temperature: float = 1.0,
    l2: float = 0.0,
    max_iter: int = 2000,
    tol: float = 1e-4,
) -> ZooterModel:
    """Fit the linear-softmax router by full-batch gradient descent.

    Minimizes mean KL(softmax(rewards / temperature) || softmax(W x)) plus
    ``l2 * |W|_F^2`` with a fixed step (inverse Lipschitz bound), a zero
    start, and an iteration cap; stops early once the gradient infinity-norm
    is below ``tol``. The residual gradient norm and iteration count are
    recorded on the returned model.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    r = np.asarray(rewards, dtype=np.float64)
    if x.ndim != 2 or r.ndim != 2 or x.shape[0] != r.shape[0]:
        raise DataError("embeddings and reward targets are misaligned")
    if x.shape[0] == 0:
        raise DataError("router fit needs at least one prompt")
    if not (math.isfinite(l2) and l2 >= 0.0):
        raise ValueError("l2 must be a finite value >= 0")
    targets = softmax_targets(r, temperature)

    n, n_models = r.shape
    design = np.hstack([x, np.ones((n, 1))])
    # Softmax cross-entropy curvature is at most 1/2 per sample, hence the
    # 0.5 * sigma_max^2 / n Lipschitz bound for the mean loss.
    step = 1.0 / (0.5 * _spectral_bound(design) / n + 2.0 * l2)

    weights = np.zeros((n_models, design.shape[1]))
    grad_norm = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        z = design @ weights.T
        z_shift = z - z.max(axis=1, keepdims=True)
        e = np.exp(z_shift)
        prob = e / e.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(prob)):
            raise NumericalError(
                "router loss overflowed; use a larger temperature"
            )
        grad = (prob - targets).T @ design / n + 2.0 * l2 * weights
        grad_norm = float(np.abs(grad).max())
        if grad_norm <= tol:
            break
        weights = weights - step * grad
    return ZooterModel(
        weights=weights,
        target_temperature=float(temperature),
        grad_norm=grad_norm,
        iterations=iterations,
    )


def route_zooter(
    model: ZooterModel,
    pool: ModelPool,
    lam: float,
    prompts: Sequence[PromptRecord],
) -> RoutingAssignment:
    """Cost-adjusted argmax over router logits.

    Raw logits stand in for rewards, so this ``lam`` lives on the logit
    scale, not the reward scale; sweeps derive a separate grid for it.
    """
    lam = _check_lambda(lam)
    if model.n_models != len(pool):
        raise DataError("router output size does not match the pool")
    embeddings = (
        np.vstack([p.embedding for p in prompts])
        if prompts
        else np.empty((0, model.dim))
    )
    logits = model.logits(embeddings)
    chosen = kernels.cost_adjusted_argmax(logits, pool.costs, lam)
    return RoutingAssignment(
        prompt_ids=tuple(p.id for p in prompts),
        chosen=chosen,
        policy_name="zooter",
        lam=lam,
    )


def write_assignments_csv(path, assignments: Sequence[RoutingAssignment], pool: ModelPool) -> None:
    """CSV export: one row per (prompt, policy, lam) routing decision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("prompt_id,policy,lambda,chosen_model_id\n")
        for a in assignments:
            for prompt_id, idx in zip(a.prompt_ids, a.chosen):
                fh.write(
                    f"{prompt_id},{a.policy_name},{format(a.lam, '.17g')},"
                    f"{pool.model_ids[idx]}\n"
                )


PolicyFn = Callable[[float], RoutingAssignment]
