"""Prompt and reward-sample ingestion, empirical expected-reward targets,
and stratified train/test splitting.

File formats (UTF-8 JSON lines, one object per line):

* prompts:  ``{"id": str, "category": str, "embedding": [float, ...]}``
* rewards:  ``{"prompt_id": str, "model_id": str, "rewards": [float, ...]}``
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .rng import substream


class Split(Enum):
    TRAIN = "train"
    TEST = "test"
    UNASSIGNED = "unassigned"


def _as_float_vector(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{what} must be a flat list of numbers")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contains a non-finite value")
    return arr


@dataclass(frozen=True)
class PromptRecord:
    """A prompt's identity, category label, embedding vector, and split tag."""

    id: str
    category: str
    embedding: np.ndarray
    split: Split = Split.UNASSIGNED

    def __post_init__(self):
        object.__setattr__(
            self, "embedding", _as_float_vector(self.embedding, f"embedding of {self.id!r}")
        )

    @property
    def dim(self) -> int:
        return self.embedding.shape[0]


@dataclass(frozen=True)
class RewardSampleSet:
    """The sampled rewards for one (prompt, model) pair."""

    prompt_id: str
    model_id: str
    rewards: np.ndarray

    def __post_init__(self):
        arr = _as_float_vector(
            self.rewards, f"rewards for {self.prompt_id!r}/{self.model_id!r}"
        )
        if arr.shape[0] == 0:
            raise DataError(f"empty rewards for {self.prompt_id!r}/{self.model_id!r}")
        object.__setattr__(self, "rewards", arr)

    def __len__(self) -> int:
        return self.rewards.shape[0]


@dataclass(frozen=True)
class ERDataset:
    """Per-model regression dataset: embeddings against empirical mean rewards."""

    model_id: str
    prompt_ids: tuple[str, ...]
    embeddings: np.ndarray  # (n, D)
    targets: np.ndarray  # (n,)

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        tgt = np.asarray(self.targets, dtype=np.float64)
        if emb.ndim != 2 or tgt.ndim != 1 or emb.shape[0] != tgt.shape[0]:
            raise DataError("embeddings and targets are misaligned")
        if len(self.prompt_ids) != tgt.shape[0]:
            raise DataError("prompt ids and targets are misaligned")
        object.__setattr__(self, "prompt_ids", tuple(self.prompt_ids))
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "targets", tgt)

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


def empirical_er(samples: RewardSampleSet) -> float:
    """Empirical mean reward of one sample set.

    Averaged in exact rational arithmetic with a single rounding at the end,
    so the result is independent of summation order and matches decimal
    expectations (e.g. mean of 1.0, 0.2, 0.0 is exactly 0.4).
    """
    return float(statistics.mean(samples.rewards.tolist()))


def _parse_line(path, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise DataError(f"{path}: line {lineno}: expected a JSON object")
    return obj


def _require(obj: dict, key: str, path, lineno: int):
    if key not in obj:
        raise DataError(f"{path}: line {lineno}: missing field {key!r}")
    return obj[key]


def load_prompts(path) -> list[PromptRecord]:
    """Read a prompts JSONL file, validating ids, dimensions, and finiteness."""
    records: list[PromptRecord] = []
    seen: set[str] = set()
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            obj = _parse_line(path, lineno, line)
            prompt_id = _require(obj, "id", path, lineno)
            category = _require(obj, "category", path, lineno)
            embedding = _require(obj, "embedding", path, lineno)
            if not isinstance(prompt_id, str) or not isinstance(category, str):
                raise DataError(f"{path}: line {lineno}: id and category must be strings")
            if prompt_id in seen:
                raise DataError(f"{path}: line {lineno}: duplicate prompt id {prompt_id!r}")
            try:
                record = PromptRecord(id=prompt_id, category=category, embedding=embedding)
            except (DataError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if dim is None:
                dim = record.dim
            elif record.dim != dim:
                raise DataError(
                    f"{path}: line {lineno}: dimension mismatch "
                    f"(got {record.dim}, expected {dim})"
                )
            seen.add(prompt_id)
            records.append(record)
    return records


def load_rewards(path) -> list[RewardSampleSet]:
    """Read a rewards JSONL file, validating key uniqueness and finiteness."""
    sets: list[RewardSampleSet] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            obj = _parse_line(path, lineno, line)
            prompt_id = _require(obj, "prompt_id", path, lineno)
            model_id = _require(obj, "model_id", path, lineno)
            rewards = _require(obj, "rewards", path, lineno)
            if not isinstance(prompt_id, str) or not isinstance(model_id, str):
                raise DataError(
                    f"{path}: line {lineno}: prompt_id and model_id must be strings"
                )
            key = (prompt_id, model_id)
            if key in seen:
                raise DataError(
                    f"{path}: line {lineno}: duplicate key {prompt_id!r}/{model_id!r}"
                )
            try:
                sample_set = RewardSampleSet(
                    prompt_id=prompt_id, model_id=model_id, rewards=rewards
                )
            except (DataError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            seen.add(key)
            sets.append(sample_set)
    return sets


def write_prompts(path, prompts: Iterable[PromptRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in prompts:
            fh.write(
                json.dumps(
                    {"id": p.id, "category": p.category, "embedding": p.embedding.tolist()}
                )
                + "\n"
            )


def write_rewards(path, sample_sets: Iterable[RewardSampleSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sample_sets:
            fh.write(
                json.dumps(
                    {
                        "prompt_id": s.prompt_id,
                        "model_id": s.model_id,
                        "rewards": s.rewards.tolist(),
                    }
                )
                + "\n"
            )


def stratified_split(
    prompts: Sequence[PromptRecord], seed: int, train_fraction: float
) -> list[PromptRecord]:
    """Assign Train/Test per category: floor(n * train_fraction) go to Train.

    Ids are sorted within each category before the seeded shuffle, so the
    assignment depends only on (ids, categories, seed), not on input order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be strictly between 0 and 1")
    ids = [p.id for p in prompts]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate prompt ids in split input")

    by_category: dict[str, list[str]] = {}
    for p in prompts:
        by_category.setdefault(p.category, []).append(p.id)

    # str() round-trips the shortest decimal, so 0.3 means 3/10, not the
    # slightly-smaller binary double (whose floor would be off by one).
    fraction = Fraction(str(train_fraction))
    assignment: dict[str, Split] = {}
    for category in sorted(by_category):
        cat_ids = sorted(by_category[category])
        rng = substream(seed, "split", category)
        order = rng.permutation(len(cat_ids))
        n_train = int(len(cat_ids) * fraction)
        for rank, idx in enumerate(order):
            assignment[cat_ids[idx]] = Split.TRAIN if rank < n_train else Split.TEST
    return [replace(p, split=assignment[p.id]) for p in prompts]


def index_rewards(
    sample_sets: Iterable[RewardSampleSet],
) -> dict[tuple[str, str], RewardSampleSet]:
    return {(s.prompt_id, s.model_id): s for s in sample_sets}


def build_er_dataset(
    prompts: Sequence[PromptRecord],
    sample_sets: Iterable[RewardSampleSet] | Mapping[tuple[str, str], RewardSampleSet],
    model_id: str,
    split_filter: Split | None = None,
) -> ERDataset:
    """Join prompts with one model's reward sets into a regression dataset.

    Every selected prompt must have samples for ``model_id``; a missing pair
    is an error rather than a silent drop.
    """
    if isinstance(sample_sets, Mapping):
        index = sample_sets
    else:
        index = index_rewards(sample_sets)
    selected = [
        p for p in prompts if split_filter is None or p.split == split_filter
    ]
    dims = {p.dim for p in selected}
    if len(dims) > 1:
        raise DataError("prompts disagree on embedding dimension")
    targets = []
    for p in selected:
        samples = index.get((p.id, model_id))
        if samples is None:
            raise DataError(f"no reward samples for {p.id}/{model_id}")
        targets.append(empirical_er(samples))
    dim = dims.pop() if dims else 0
    embeddings = (
        np.vstack([p.embedding for p in selected])
        if selected
        else np.empty((0, dim))
    )
    return ERDataset(
        model_id=model_id,
        prompt_ids=tuple(p.id for p in selected),
        embeddings=embeddings,
        targets=np.asarray(targets, dtype=np.float64),
    )
