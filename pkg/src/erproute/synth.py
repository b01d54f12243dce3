"""Synthetic benchmark generator with known linear ground truth.

Category-clustered Gaussian embeddings, one true linear reward surface per
model, and Gaussian reward noise: the ideal predictors are known exactly, so
every downstream stage (targets, fits, routing, sweeps) can be checked
against an oracle. Fully deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import PromptRecord, RewardSampleSet
from .erp import ModelPool
from .ridge import LinearPredictor
from .rng import substream


@dataclass(frozen=True)
class SynthConfig:
    n_categories: int = 4
    prompts_per_category: int = 250
    dim: int = 16
    n_models: int = 5
    samples_per_prompt: int = 32
    noise_sigma: float = 0.5
    cluster_spread: float = 1.0
    seed: int = 0

    def __post_init__(self):
        counts = {
            "n_categories": self.n_categories,
            "prompts_per_category": self.prompts_per_category,
            "dim": self.dim,
            "n_models": self.n_models,
            "samples_per_prompt": self.samples_per_prompt,
        }
        for name, value in counts.items():
            if value < 1:
                raise ValueError(f"{name} must be at least 1")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0.0):
            raise ValueError("noise_sigma must be a finite value >= 0")
        if not (math.isfinite(self.cluster_spread) and self.cluster_spread > 0.0):
            raise ValueError("cluster_spread must be a finite value > 0")


@dataclass(frozen=True)
class SynthResult:
    prompts: list[PromptRecord]
    sample_sets: list[RewardSampleSet]
    pool: ModelPool
    true_predictors: list[LinearPredictor]


def generate(config: SynthConfig) -> SynthResult:
    """Draw prompts, reward samples, and the pool, plus the true predictors.

    Per category c: a cluster center mu_c ~ N(0, I) and embeddings
    x ~ N(mu_c, spread^2 I). Per model m: a true surface
    er_m(x) = theta_m . x + b_m with |theta_m| ~ 1; each reward sample is
    er_m(x) + N(0, noise_sigma^2). Costs are log-spaced so every cost gap is
    distinct.
    """
    categories = [f"cat{c:02d}" for c in range(config.n_categories)]
    model_ids = [f"m{j:02d}" for j in range(config.n_models)]
    costs = np.geomspace(8.0, 70.0, config.n_models)
    pool = ModelPool(entries=tuple(zip(model_ids, costs)))

    center_rng = substream(config.seed, "synth", "centers")
    centers = center_rng.standard_normal((config.n_categories, config.dim))

    prompts: list[PromptRecord] = []
    for c, category in enumerate(categories):
        rng = substream(config.seed, "synth", "prompts", category)
        offsets = rng.standard_normal((config.prompts_per_category, config.dim))
        for j in range(config.prompts_per_category):
            prompts.append(
                PromptRecord(
                    id=f"p{c:02d}-{j:04d}",
                    category=category,
                    embedding=centers[c] + config.cluster_spread * offsets[j],
                )
            )

    embeddings = np.vstack([p.embedding for p in prompts])
    true_predictors: list[LinearPredictor] = []
    sample_sets: list[RewardSampleSet] = []
    for model_id in model_ids:
        model_rng = substream(config.seed, "synth", "model", model_id)
        theta = model_rng.standard_normal(config.dim) / math.sqrt(config.dim)
        bias = 0.5 * float(model_rng.standard_normal())
        predictor = LinearPredictor(model_id=model_id, weights=theta, bias=bias, beta=0.0)
        true_predictors.append(predictor)
        true_er = predictor.predict_batch(embeddings)
        reward_rng = substream(config.seed, "synth", "rewards", model_id)
        noise = config.noise_sigma * reward_rng.standard_normal(
            (len(prompts), config.samples_per_prompt)
        )
        samples = true_er[:, None] + noise
        for i, prompt in enumerate(prompts):
            sample_sets.append(
                RewardSampleSet(
                    prompt_id=prompt.id, model_id=model_id, rewards=samples[i]
                )
            )
    return SynthResult(
        prompts=prompts,
        sample_sets=sample_sets,
        pool=pool,
        true_predictors=true_predictors,
    )
