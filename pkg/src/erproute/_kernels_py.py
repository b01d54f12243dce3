"""NumPy kernels: the reference semantics for the compiled variants.

All functions receive C-contiguous float64 / uint8 arrays prepared by
``erproute.kernels``; tie handling uses exact float equality.
"""

import numpy as np
import scipy.stats


def cost_adjusted_argmax(values, adjusted_costs, tie_rank):
    """Per row of ``values``, argmax of ``values[i, j] - adjusted_costs[j]``.

    Exact score ties resolve to the smallest ``tie_rank`` (models pre-ranked
    by cost, then pool index).
    """
    m = values.shape[1]
    scores = values - adjusted_costs
    best = scores.max(axis=1, keepdims=True)
    contender_rank = np.where(scores == best, tie_rank, m)
    return contender_rank.argmin(axis=1).astype(np.int64)


def auroc_rank(scores, labels):
    """Mann-Whitney AUROC with half credit for tied scores.

    Rank sums and tie averages are dyadic rationals, so the result equals
    exhaustive pair enumeration exactly.
    """
    ranks = scipy.stats.rankdata(scores)
    n_pos = int(np.count_nonzero(labels))
    n_neg = labels.shape[0] - n_pos
    u = float(ranks[labels != 0].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def argmax_tie_weights(values):
    """Per row, weight 1/k on each of the k row-maximal entries, 0 elsewhere."""
    best = values.max(axis=1, keepdims=True)
    mask = values == best
    return mask / mask.sum(axis=1, keepdims=True)
