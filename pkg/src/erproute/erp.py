"""Pool-level expected-reward scoring.

Builds predicted and empirical expected-reward matrices over a model pool,
turns score gaps into pairwise win probabilities, and evaluates win
prediction with AUROC against a pairwise logistic-regression baseline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.special

from . import kernels
from .dataset import PromptRecord, RewardSampleSet, empirical_er, index_rewards
from .errors import DataError, NumericalError
from .ridge import LinearPredictor
from .rng import substream


@dataclass(frozen=True)
class ModelPool:
    """Ordered model ids with per-model scalar costs; the order is the
    canonical column order everywhere downstream."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        entries = tuple((str(mid), float(cost)) for mid, cost in self.entries)
        ids = [mid for mid, _ in entries]
        if len(set(ids)) != len(ids):
            raise DataError("model pool contains duplicate ids")
        if not entries:
            raise DataError("model pool is empty")
        for mid, cost in entries:
            if not (math.isfinite(cost) and cost > 0.0):
                raise DataError(f"model {mid!r}: cost must be a finite positive number")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(mid for mid, _ in self.entries)

    @property
    def costs(self) -> np.ndarray:
        return np.asarray([cost for _, cost in self.entries], dtype=np.float64)

    def index(self, model_id: str) -> int:
        for i, (mid, _) in enumerate(self.entries):
            if mid == model_id:
                return i
        raise DataError(f"model {model_id!r} is not in the pool")

    def cheapest_index(self) -> int:
        return int(kernels.tie_rank_by_cost(self.costs).argmin())

    def to_dict(self) -> dict:
        return {"models": [{"id": mid, "cost": cost} for mid, cost in self.entries]}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelPool":
        try:
            entries = tuple((m["id"], m["cost"]) for m in obj["models"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed model pool document: {exc}") from exc
        return cls(entries=entries)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModelPool":
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed pool JSON ({exc.msg})") from exc
        return cls.from_dict(obj)


class Provenance(Enum):
    PREDICTED = "predicted"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class ERMatrix:
    """Prompts x models matrix of expected rewards, predicted or empirical."""

    prompt_ids: tuple[str, ...]
    model_ids: tuple[str, ...]
    values: np.ndarray  # (n, M)
    provenance: Provenance

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (len(self.prompt_ids), len(self.model_ids)):
            raise DataError("ER matrix shape does not match prompt/model ids")
        if not np.all(np.isfinite(values)):
            raise DataError("ER matrix contains non-finite values")
        object.__setattr__(self, "prompt_ids", tuple(self.prompt_ids))
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        object.__setattr__(self, "values", values)

    @property
    def n_prompts(self) -> int:
        return self.values.shape[0]

    def column(self, model_id: str) -> np.ndarray:
        return self.values[:, self.model_ids.index(model_id)]


def align_predictors(
    predictors: Iterable[LinearPredictor], pool: ModelPool
) -> list[LinearPredictor]:
    """Order predictors to match the pool, requiring exactly one per model."""
    by_id: dict[str, LinearPredictor] = {}
    for p in predictors:
        if p.model_id in by_id:
            raise DataError(f"duplicate predictor for model {p.model_id!r}")
        by_id[p.model_id] = p
    missing = [mid for mid in pool.model_ids if mid not in by_id]
    if missing:
        raise DataError(f"missing predictors for models: {', '.join(missing)}")
    aligned = [by_id[mid] for mid in pool.model_ids]
    dims = {p.dim for p in aligned}
    if len(dims) > 1:
        raise DataError("predictors disagree on embedding dimension")
    return aligned


def predict_matrix(
    predictors: Sequence[LinearPredictor], prompts: Sequence[PromptRecord]
) -> ERMatrix:
    """Score every prompt under every predictor; columns in predictor order."""
    if not predictors:
        raise DataError("no predictors given")
    ids = [p.model_id for p in predictors]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate predictor model ids")
    dims = {p.dim for p in predictors}
    if len(dims) > 1:
        raise DataError("predictors disagree on embedding dimension")
    dim = dims.pop()
    if prompts:
        embeddings = np.vstack([p.embedding for p in prompts])
        if embeddings.shape[1] != dim:
            raise DataError(
                f"prompt embeddings have dimension {embeddings.shape[1]}, "
                f"predictors expect {dim}"
            )
    else:
        embeddings = np.empty((0, dim))
    values = np.empty((len(prompts), len(predictors)))
    for j, predictor in enumerate(predictors):
        values[:, j] = predictor.predict_batch(embeddings)
    return ERMatrix(
        prompt_ids=tuple(p.id for p in prompts),
        model_ids=tuple(ids),
        values=values,
        provenance=Provenance.PREDICTED,
    )


def empirical_matrix(
    prompts: Sequence[PromptRecord],
    sample_sets: Iterable[RewardSampleSet] | Mapping[tuple[str, str], RewardSampleSet],
    pool: ModelPool,
) -> ERMatrix:
    """Empirical mean-reward matrix over (prompts x pool models)."""
    index = (
        sample_sets if isinstance(sample_sets, Mapping) else index_rewards(sample_sets)
    )
    values = np.empty((len(prompts), len(pool)))
    for i, prompt in enumerate(prompts):
        for j, model_id in enumerate(pool.model_ids):
            samples = index.get((prompt.id, model_id))
            if samples is None:
                raise DataError(f"no reward samples for {prompt.id}/{model_id}")
            values[i, j] = empirical_er(samples)
    return ERMatrix(
        prompt_ids=tuple(p.id for p in prompts),
        model_ids=pool.model_ids,
        values=values,
        provenance=Provenance.EMPIRICAL,
    )


def write_matrix_csv(path, matrix: ERMatrix) -> None:
    """CSV export: header ``prompt_id,<model>,...``; 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["prompt_id", *matrix.model_ids]) + "\n")
        for i, prompt_id in enumerate(matrix.prompt_ids):
            row = [format(v, ".17g") for v in matrix.values[i]]
            fh.write(",".join([prompt_id, *row]) + "\n")


def pairwise_win_score(er_a: float, er_b: float) -> float:
    """Sigmoid of the expected-reward gap: probability-shaped win score of
    model a over model b. Antisymmetric: score(a, b) + score(b, a) == 1."""
    if not (math.isfinite(er_a) and math.isfinite(er_b)):
        raise DataError("win score requires finite expected rewards")
    return float(scipy.special.expit(er_a - er_b))


def auroc(scores, labels) -> float:
    """AUROC of ``scores`` against boolean ``labels`` (Mann-Whitney with half
    credit for ties); requires at least one positive and one negative."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be equal-length vectors")
    if not np.all(np.isfinite(scores)):
        raise DataError("AUROC scores must be finite")
    if labels.all() or not labels.any():
        raise DataError("AUROC is undefined: labels contain a single class")
    return kernels.auroc_rank(scores, labels)


def pairwise_win_labels(
    samples_a: RewardSampleSet, samples_b: RewardSampleSet, seed: int
) -> bool:
    """Ground-truth win label from one seeded reward draw per model.

    True iff the draw for model a strictly exceeds the draw for model b.
    """
    if samples_a.prompt_id != samples_b.prompt_id:
        raise DataError(
            f"prompt mismatch: {samples_a.prompt_id!r} vs {samples_b.prompt_id!r}"
        )
    rng = substream(
        seed, "labels", samples_a.prompt_id, samples_a.model_id, samples_b.model_id
    )
    reward_a = samples_a.rewards[rng.integers(len(samples_a))]
    reward_b = samples_b.rewards[rng.integers(len(samples_b))]
    return bool(reward_a > reward_b)


def fit_pairwise_logistic(
    features,
    labels,
    l2: float,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> np.ndarray:
    """L2-regularized logistic regression on embeddings; returns the (D+1)
    coefficient vector with the unpenalized bias last.

    Damped Newton iterations from a zero start, run until the gradient
    infinity-norm drops below ``tol``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise DataError("features and labels are misaligned")
    if y.all() or not y.any():
        raise DataError("logistic fit requires both classes")
    if not (math.isfinite(l2) and l2 > 0.0):
        raise ValueError("l2 must be a finite value > 0")

    design = np.hstack([x, np.ones((x.shape[0], 1))])
    target = y.astype(np.float64)
    penalty = np.full(design.shape[1], 2.0 * l2)
    penalty[-1] = 0.0  # bias unpenalized: intercept-only fits hit exact log-odds

    def loss(w: np.ndarray) -> float:
        z = design @ w
        return float(
            np.sum(np.logaddexp(0.0, z) - target * z) + l2 * np.dot(w[:-1], w[:-1])
        )

    coef = np.zeros(design.shape[1])
    grad_norm = math.inf
    for _ in range(max_iter):
        z = design @ coef
        prob = scipy.special.expit(z)
        grad = design.T @ (prob - target) + penalty * coef
        grad_norm = float(np.abs(grad).max())
        if grad_norm <= tol:
            return coef
        curvature = prob * (1.0 - prob)
        hessian = design.T @ (design * curvature[:, None]) + np.diag(penalty)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Hessian in logistic fit") from exc
        # Backtracking keeps full Newton steps from overshooting on
        # near-separable data; deterministic halving.
        base = loss(coef)
        descent = float(np.dot(grad, step))
        scale = 1.0
        for _ in range(60):
            candidate = coef - scale * step
            if loss(candidate) <= base - 1e-4 * scale * descent:
                break
            scale *= 0.5
        coef = coef - scale * step
    raise NumericalError(
        f"logistic fit did not converge in {max_iter} iterations "
        f"(|grad|_inf = {grad_norm:.3e})"
    )
