"""Closed-form ridge regression of expected reward on prompt embeddings.

The fit minimizes ``sum_i (w . x_i + b - y_i)^2 + beta * (|w|^2 + b^2)``,
solved exactly through the normal equations on the bias-augmented design
matrix. The bias is a constant-1 feature regularized like every other
coefficient, which keeps the solver a single symmetric positive-definite
factorization across wildly different reward scales.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import ERDataset
from .errors import DataError, NumericalError


@dataclass(frozen=True)
class LinearPredictor:
    """Per-model linear expected-reward predictor: ``w . x + b``."""

    model_id: str
    weights: np.ndarray
    bias: float
    beta: float

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise DataError(f"predictor {self.model_id!r}: weights must be finite 1-D")
        if not math.isfinite(self.bias):
            raise DataError(f"predictor {self.model_id!r}: non-finite bias")
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise DataError(f"predictor {self.model_id!r}: beta must be >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def predict(self, embedding) -> float:
        x = np.ascontiguousarray(embedding, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DataError(
                f"predictor {self.model_id!r}: embedding has shape {x.shape}, "
                f"expected ({self.dim},)"
            )
        return float(np.dot(x, self.weights) + self.bias)

    def predict_batch(self, embeddings: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(embeddings, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DataError(
                f"predictor {self.model_id!r}: batch has shape {x.shape}, "
                f"expected (n, {self.dim})"
            )
        return np.dot(x, self.weights) + self.bias

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "beta": self.beta,
            "dim": self.dim,
            "bias": self.bias,
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LinearPredictor":
        try:
            predictor = cls(
                model_id=obj["model_id"],
                weights=obj["weights"],
                bias=obj["bias"],
                beta=obj["beta"],
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed predictor document: {exc}") from exc
        if predictor.dim != obj.get("dim"):
            raise DataError(
                f"predictor {predictor.model_id!r}: dim field "
                f"{obj.get('dim')} does not match {predictor.dim} weights"
            )
        return predictor

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LinearPredictor":
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed predictor JSON ({exc.msg})") from exc
        return cls.from_dict(obj)


def fit_ridge(dataset: ERDataset, beta: float) -> LinearPredictor:
    """Exact ridge fit via the normal equations on the augmented design.

    For ``beta == 0`` the system must be nonsingular; otherwise the
    regularized Gram matrix is positive definite and the solution unique.
    """
    if not (math.isfinite(beta) and beta >= 0.0):
        raise ValueError("beta must be a finite value >= 0")
    if len(dataset) == 0:
        raise DataError(f"cannot fit {dataset.model_id!r}: dataset is empty")
    if not np.all(np.isfinite(dataset.targets)):
        raise DataError(f"cannot fit {dataset.model_id!r}: non-finite target")

    design = np.hstack([dataset.embeddings, np.ones((len(dataset), 1))])
    gram = design.T @ design + beta * np.eye(design.shape[1])
    rhs = design.T @ dataset.targets
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"normal equations are singular for {dataset.model_id!r} "
            f"(beta={beta}); increase beta"
        ) from exc
    solution = scipy.linalg.cho_solve(factor, rhs)
    return LinearPredictor(
        model_id=dataset.model_id,
        weights=solution[:-1],
        bias=float(solution[-1]),
        beta=float(beta),
    )


def r_squared(predictions, targets) -> float:
    """Coefficient of determination, ``1 - SS_res / SS_tot``.

    Computed against the evaluated set's own target mean; can be negative
    when predictions do worse than that mean.
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.shape[0] == 0:
        raise DataError("predictions and targets must be equal-length nonempty vectors")
    if np.all(t == t[0]):
        raise DataError("R^2 is undefined: targets are all identical")
    ss_res = float(np.sum((p - t) ** 2))
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    return 1.0 - ss_res / ss_tot
