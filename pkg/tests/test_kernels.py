"""Backend-equivalence and semantics tests for the compiled/NumPy kernels."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erproute import kernels
from erproute.kernels import tie_rank_by_cost

from conftest import KERNEL_IMPLS, auroc_bruteforce


def _call_argmax(impl, values, costs, lam):
    values = np.ascontiguousarray(values, dtype=np.float64)
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    adjusted = np.multiply(float(lam), costs)
    return np.asarray(impl.cost_adjusted_argmax(values, adjusted, tie_rank_by_cost(costs)))


def _call_auroc(impl, scores, labels):
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=bool).view(np.uint8)
    return impl.auroc_rank(scores, labels)


def _call_weights(impl, values):
    return np.asarray(impl.argmax_tie_weights(np.ascontiguousarray(values, dtype=np.float64)))


def _reference_argmax(values, costs, lam):
    """Slow per-row reference with explicit tie handling."""
    rank = tie_rank_by_cost(costs)
    out = []
    for row in values:
        scores = [row[j] - lam * costs[j] for j in range(len(costs))]
        best = max(scores)
        tied = [j for j, s in enumerate(scores) if s == best]
        out.append(min(tied, key=lambda j: rank[j]))
    return np.asarray(out)


class TestCostAdjustedArgmax:
    def test_plain_argmax_at_zero(self, kernel_impl):
        values = np.array([[0.1, 0.9, 0.5], [1.0, -1.0, 0.0]])
        costs = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(
            _call_argmax(kernel_impl, values, costs, 0.0), [1, 0]
        )

    def test_ties_prefer_cheap_then_low_index(self, kernel_impl):
        values = np.array([[1.0, 1.0, 1.0]])
        costs = np.array([5.0, 2.0, 2.0])
        assert _call_argmax(kernel_impl, values, costs, 0.0)[0] == 1

    def test_empty_rows(self, kernel_impl):
        out = _call_argmax(kernel_impl, np.empty((0, 3)), np.array([1.0, 2.0, 3.0]), 0.5)
        assert out.shape == (0,)

    @given(
        n=st.integers(min_value=1, max_value=12),
        m=st.integers(min_value=1, max_value=6),
        lam=st.sampled_from([0.0, 0.01, 1.0, 100.0]),
        seed=st.integers(min_value=0, max_value=10_000),
        quantize=st.booleans(),
    )
    @settings(max_examples=80)
    def test_matches_reference_and_backends_agree(self, n, m, lam, seed, quantize):
        rng = np.random.default_rng(seed)
        values = rng.normal(size=(n, m))
        if quantize:  # force exact ties
            values = np.round(values, 1)
        costs = np.round(rng.uniform(1, 5, size=m), 1)
        expected = _reference_argmax(values, costs, lam)
        results = [
            _call_argmax(impl.values[0], values, costs, lam) for impl in KERNEL_IMPLS
        ]
        for got in results:
            np.testing.assert_array_equal(got, expected)


class TestAurocKernel:
    def test_known_value(self, kernel_impl):
        got = _call_auroc(
            kernel_impl, [0.8, 0.6, 0.4, 0.2], [True, False, True, False]
        )
        assert got == 0.75

    def test_all_ties_give_half(self, kernel_impl):
        got = _call_auroc(kernel_impl, [0.5] * 6, [True, False, True, False, True, False])
        assert got == 0.5

    @given(
        n=st.integers(min_value=2, max_value=60),
        seed=st.integers(min_value=0, max_value=10_000),
        levels=st.sampled_from([2, 3, 1000]),
    )
    @settings(max_examples=80)
    def test_equals_bruteforce_exactly(self, n, seed, levels):
        rng = np.random.default_rng(seed)
        scores = np.round(rng.uniform(0, 1, size=n) * levels) / levels
        labels = rng.uniform(size=n) < 0.5
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        expected = auroc_bruteforce(scores, labels)
        for impl in KERNEL_IMPLS:
            assert _call_auroc(impl.values[0], scores, labels) == expected


class TestArgmaxTieWeights:
    def test_unique_winner(self, kernel_impl):
        weights = _call_weights(kernel_impl, [[0.1, 0.9], [0.8, 0.3]])
        np.testing.assert_array_equal(weights, [[0.0, 1.0], [1.0, 0.0]])

    def test_tie_split(self, kernel_impl):
        weights = _call_weights(kernel_impl, [[1.0, 1.0, 0.0]])
        np.testing.assert_array_equal(weights, [[0.5, 0.5, 0.0]])

    @given(
        n=st.integers(min_value=1, max_value=10),
        m=st.integers(min_value=1, max_value=5),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=60)
    def test_rows_sum_to_one_and_backends_agree(self, n, m, seed):
        rng = np.random.default_rng(seed)
        values = np.round(rng.normal(size=(n, m)), 1)
        results = [_call_weights(impl.values[0], values) for impl in KERNEL_IMPLS]
        for got in results:
            np.testing.assert_allclose(got.sum(axis=1), 1.0, atol=1e-12)
            np.testing.assert_array_equal(got, results[0])


def test_tie_rank_orders_by_cost_then_index():
    np.testing.assert_array_equal(
        tie_rank_by_cost([3.0, 1.0, 1.0, 2.0]), [3, 0, 1, 2]
    )


def test_backend_reports_name():
    assert kernels.backend() in {"python", "native"}
