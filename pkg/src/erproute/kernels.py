"""Kernel dispatch: compiled extension when available, NumPy otherwise.

The backend is chosen once at import. Set ``ERP_KERNELS=py`` to force the
NumPy implementations, ``ERP_KERNELS=native`` to require the compiled
extension (ImportError if missing), or leave unset / ``auto`` to prefer the
extension with a silent fallback.
"""

import os

import numpy as np

from . import _kernels_py

_choice = os.environ.get("ERP_KERNELS", "auto")
if _choice not in {"auto", "py", "native"}:
    raise ImportError(f"ERP_KERNELS must be auto, py, or native, not {_choice!r}")

_impl = None
if _choice in ("auto", "native"):
    try:
        from . import _kernels_cy as _impl
    except ImportError:
        if _choice == "native":
            raise
        _impl = None
if _impl is None:
    _impl = _kernels_py


def backend() -> str:
    """Name of the active kernel backend: 'native' or 'python'."""
    return "python" if _impl is _kernels_py else "native"


def tie_rank_by_cost(costs) -> np.ndarray:
    """Rank models by (cost ascending, index ascending); 0 is most preferred."""
    costs = np.asarray(costs, dtype=np.float64)
    order = np.lexsort((np.arange(costs.shape[0]), costs))
    rank = np.empty(costs.shape[0], dtype=np.int64)
    rank[order] = np.arange(costs.shape[0], dtype=np.int64)
    return rank


def cost_adjusted_argmax(values, costs, lam: float) -> np.ndarray:
    """Per row of ``values``, argmax of ``values[i, j] - lam * costs[j]``.

    Exact score ties break toward the cheaper model, then the lower index.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    adjusted = np.multiply(float(lam), costs)
    return np.asarray(
        _impl.cost_adjusted_argmax(values, adjusted, tie_rank_by_cost(costs)),
        dtype=np.int64,
    )


def auroc_rank(scores, labels) -> float:
    """Mann-Whitney AUROC (half credit for ties). Labels must contain both
    classes; callers validate."""
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=bool).view(np.uint8)
    return float(_impl.auroc_rank(scores, labels))


def argmax_tie_weights(values) -> np.ndarray:
    """Per row, weight 1/k on each of the k row-maximal entries, 0 elsewhere."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    return np.asarray(_impl.argmax_tie_weights(values), dtype=np.float64)
