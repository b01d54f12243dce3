"""Acceptance suite: one test per criterion, at the stated tolerances.

The conftest hook prints one PASS/FAIL line per criterion.
"""

import json
import math
import threading
import time
import urllib.request
from pathlib import Path

import numpy as np
import pytest

from erproute.cli import main
from erproute.dataset import (
    RewardSampleSet,
    Split,
    build_er_dataset,
    empirical_er,
    stratified_split,
)
from erproute.erp import (
    ERMatrix,
    Provenance,
    auroc,
    empirical_matrix,
    fit_pairwise_logistic,
    pairwise_win_labels,
    pairwise_win_score,
    predict_matrix,
)
from erproute.evaluation import (
    ParetoPoint,
    mean_cost,
    pareto_frontier,
    prop1_bound,
    prop1_monte_carlo,
    regret,
    sweep,
)
from erproute.dataset import PromptRecord
from erproute.ridge import fit_ridge, r_squared
from erproute.routing import (
    auto_lambda_grid,
    auto_lambda_max,
    fit_zooter,
    permute_assignment,
    route_erp,
    route_fixed,
    route_random,
    route_zooter,
)
from erproute.serve import ServiceState, make_server
from erproute.synth import SynthConfig, generate

from conftest import auroc_bruteforce, ridge_oracle

SEED = 0


class Criterion3Data:
    """Shared instance: 4 categories x 250 prompts, D=16, M=5, K=32, sigma=0.5."""

    def __init__(self):
        start = time.perf_counter()
        config = SynthConfig(
            n_categories=4,
            prompts_per_category=250,
            dim=16,
            n_models=5,
            samples_per_prompt=32,
            noise_sigma=0.5,
            seed=SEED,
        )
        result = generate(config)
        self.pool = result.pool
        self.sample_sets = result.sample_sets
        split = stratified_split(result.prompts, seed=SEED, train_fraction=0.5)
        self.train_prompts = [p for p in split if p.split is Split.TRAIN]
        self.test_prompts = [p for p in split if p.split is Split.TEST]
        self.predictors = [
            fit_ridge(
                build_er_dataset(split, result.sample_sets, mid, Split.TRAIN), beta=1.0
            )
            for mid in self.pool.model_ids
        ]
        self.predicted = predict_matrix(self.predictors, self.test_prompts)
        self.empirical = empirical_matrix(self.test_prompts, result.sample_sets, self.pool)
        self.empirical_train = empirical_matrix(
            self.train_prompts, result.sample_sets, self.pool
        )
        self.elapsed = time.perf_counter() - start


@pytest.fixture(scope="module")
def crit3():
    return Criterion3Data()


def test_criterion_01_ridge_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(5, 51))
        dim = int(rng.integers(1, 21))
        beta = float(rng.choice([0.1, 1.0, 10.0]))
        x = rng.normal(size=(n, dim))
        y = rng.normal(size=n)
        from erproute.dataset import ERDataset

        ds = ERDataset(
            model_id="m",
            prompt_ids=tuple(f"p{i}" for i in range(n)),
            embeddings=x,
            targets=y,
        )
        predictor = fit_ridge(ds, beta=beta)
        expected = ridge_oracle(x, y, beta)
        got = np.concatenate([predictor.weights, [predictor.bias]])
        np.testing.assert_allclose(got, expected, atol=1e-8)
    assert time.perf_counter() - start < 5.0


def test_criterion_02_empirical_mean_workflow():
    samples = RewardSampleSet("prompt", "model", [1.0, 0.2, 0.0])
    assert empirical_er(samples) == 0.4


def test_criterion_03_identifiability(crit3):
    # noiseless: sigma=0, K=1, beta=1e-8 -> test R^2 >= 0.999 per model
    start = time.perf_counter()
    noiseless = generate(
        SynthConfig(
            n_categories=4,
            prompts_per_category=100,
            dim=16,
            n_models=5,
            samples_per_prompt=1,
            noise_sigma=0.0,
            seed=SEED,
        )
    )
    split = stratified_split(noiseless.prompts, seed=SEED, train_fraction=0.5)
    for mid in noiseless.pool.model_ids:
        predictor = fit_ridge(
            build_er_dataset(split, noiseless.sample_sets, mid, Split.TRAIN),
            beta=1e-8,
        )
        test_set = build_er_dataset(split, noiseless.sample_sets, mid, Split.TEST)
        r2 = r_squared(predictor.predict_batch(test_set.embeddings), test_set.targets)
        assert r2 >= 0.999
    noiseless_elapsed = time.perf_counter() - start

    # noisy: sigma=0.5, K=32, D=16, 4x250 prompts, M=5 -> aggregate >= 0.8
    for j in range(len(crit3.pool)):
        predictions = crit3.predicted.values[:, j]
        targets = crit3.empirical.values[:, j]
        assert r_squared(predictions, targets) >= 0.8
    assert crit3.elapsed + noiseless_elapsed < 30.0


def test_criterion_04_auroc_oracle():
    rng = np.random.default_rng(104)
    for _ in range(100):
        n = int(rng.integers(2, 201))
        levels = int(rng.choice([3, 10, 10_000]))  # coarse levels force ties
        scores = np.round(rng.uniform(size=n) * levels) / levels
        labels = rng.uniform(size=n) < float(rng.uniform(0.2, 0.8))
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        assert auroc(scores, labels) == auroc_bruteforce(scores, labels)


def test_criterion_05_erp_vs_logistic_parity(crit3):
    index = {(s.prompt_id, s.model_id): s for s in crit3.sample_sets}
    train_features = np.vstack([p.embedding for p in crit3.train_prompts])
    test_features = np.vstack([p.embedding for p in crit3.test_prompts])
    m = len(crit3.pool)
    for i in range(m):
        for j in range(i + 1, m):
            model_a, model_b = crit3.pool.model_ids[i], crit3.pool.model_ids[j]

            def labels_for(prompts):
                return np.asarray(
                    [
                        pairwise_win_labels(
                            index[(p.id, model_b)], index[(p.id, model_a)], SEED
                        )
                        for p in prompts
                    ],
                    dtype=bool,
                )

            test_labels = labels_for(crit3.test_prompts)
            erp_scores = [
                pairwise_win_score(
                    crit3.predicted.values[k, j], crit3.predicted.values[k, i]
                )
                for k in range(len(crit3.test_prompts))
            ]
            auroc_erp = auroc(erp_scores, test_labels)
            coef = fit_pairwise_logistic(
                train_features, labels_for(crit3.train_prompts), l2=1.0
            )
            auroc_logistic = auroc(
                test_features @ coef[:-1] + coef[-1], test_labels
            )
            assert abs(auroc_erp - auroc_logistic) <= 0.05


def test_criterion_06_routing_limits(crit3):
    at_zero = route_erp(crit3.predicted, crit3.pool, 0.0)
    np.testing.assert_array_equal(
        at_zero.chosen, crit3.predicted.values.argmax(axis=1)
    )
    lam_max = auto_lambda_max(crit3.predicted, crit3.pool)
    cheapest = crit3.pool.cheapest_index()
    for scale in (1.0, 2.0, 10.0):
        pinned = route_erp(crit3.predicted, crit3.pool, lam_max * scale)
        assert (pinned.chosen == cheapest).all()


def test_criterion_07_cost_monotonicity(crit3):
    lam_max = auto_lambda_max(crit3.predicted, crit3.pool)
    grid = np.geomspace(lam_max / 1e4, lam_max, 20)
    costs = [
        mean_cost(route_erp(crit3.predicted, crit3.pool, lam), crit3.pool)
        for lam in grid
    ]
    for earlier, later in zip(costs, costs[1:]):
        assert later <= earlier


def test_criterion_08_pareto_dominance(crit3):
    pool = crit3.pool
    grid = auto_lambda_grid(crit3.predicted, pool, n_points=20)
    erp_points = sweep(
        lambda lam: route_erp(crit3.predicted, pool, lam), grid, crit3.empirical, pool
    )

    def weakly_dominated(point: ParetoPoint) -> bool:
        return any(
            p.mean_cost <= point.mean_cost + 1e-9
            and p.mean_regret <= point.mean_regret + 1e-9
            for p in erp_points
        )

    baselines: list[ParetoPoint] = []
    baselines += sweep(
        lambda lam: route_random(pool, crit3.test_prompts, SEED),
        [0.0],
        crit3.empirical,
        pool,
    )
    baselines += sweep(
        lambda lam: permute_assignment(route_erp(crit3.predicted, pool, lam), SEED),
        grid,
        crit3.empirical,
        pool,
    )
    for model_index in range(len(pool)):
        baselines += sweep(
            lambda lam, i=model_index: route_fixed(pool, i, crit3.test_prompts),
            [0.0],
            crit3.empirical,
            pool,
        )
    for point in baselines:
        assert weakly_dominated(point), point

    # distribution router must stay close to the reward-regression router
    train_embeddings = np.vstack([p.embedding for p in crit3.train_prompts])
    router = fit_zooter(train_embeddings, crit3.empirical_train.values, temperature=1.0)
    logits_matrix = ERMatrix(
        prompt_ids=tuple(p.id for p in crit3.test_prompts),
        model_ids=pool.model_ids,
        values=router.logits(np.vstack([p.embedding for p in crit3.test_prompts])),
        provenance=Provenance.PREDICTED,
    )
    zooter_grid = auto_lambda_grid(logits_matrix, pool, n_points=20)
    zooter_points = sweep(
        lambda lam: route_zooter(router, pool, lam, crit3.test_prompts),
        zooter_grid,
        crit3.empirical,
        pool,
    )
    spread = float(crit3.empirical.values.max() - crit3.empirical.values.min())
    allowance = 0.05 * spread
    for point in pareto_frontier(erp_points):
        matched = [
            z.mean_regret
            for z in zooter_points
            if z.mean_cost <= point.mean_cost + 1e-9
        ]
        assert matched, f"no zooter point at cost <= {point.mean_cost}"
        assert min(matched) <= point.mean_regret + allowance


def test_criterion_09_oracle_regret_and_permutation_multiset(crit3):
    oracle = route_erp(crit3.empirical, crit3.pool, 0.0)
    oracle_regret = regret(crit3.empirical, oracle)
    assert (oracle_regret == 0.0).all()

    permuted = permute_assignment(oracle, seed=SEED)
    np.testing.assert_array_equal(
        np.bincount(oracle.chosen, minlength=len(crit3.pool)),
        np.bincount(permuted.chosen, minlength=len(crit3.pool)),
    )
    assert mean_cost(permuted, crit3.pool) == mean_cost(oracle, crit3.pool)


def test_criterion_10_prop1_monte_carlo():
    n = 100_000
    slack = 4.0 * math.sqrt(0.25 / n)
    for gap in (0.0, 1.0, 2.0, 4.0):
        result = prop1_monte_carlo(0.0, gap, 1.0, n=n, seed=SEED)
        assert result.empirical >= result.bound - slack
    # spot values: bound 1 - 1/e; empirical near Phi(2 / sqrt(2))
    spot = prop1_monte_carlo(0.0, 2.0, 1.0, n=n, seed=SEED)
    assert spot.bound == pytest.approx(1.0 - math.exp(-1.0), abs=1e-15)
    assert prop1_bound(2.0, 1.0) == spot.bound
    gaussian_cdf = 0.5 * (1.0 + math.erf(math.sqrt(2.0) / math.sqrt(2.0)))
    assert spot.empirical == pytest.approx(gaussian_cdf, abs=0.005)
    assert spot.empirical > spot.bound


def test_criterion_11_cli_determinism(tmp_path):
    data = tmp_path / "data"
    run = tmp_path / "run"
    synth_args = [
        "synth", "--out-dir", str(data), "--seed", "3",
        "--categories", "3", "--prompts-per-category", "30",
        "--dim", "6", "--models", "3", "--samples-per-prompt", "8",
    ]
    io_args = [
        "--prompts", str(data / "prompts.jsonl"),
        "--rewards", str(data / "rewards.jsonl"),
        "--pool", str(data / "pool.json"),
        "--out-dir", str(run),
    ]
    pipeline = [
        synth_args,
        ["train", *io_args, "--seed", "3"],
        ["eval", *io_args, "--seed", "3"],
        ["sweep", *io_args, "--seed", "3"],
    ]

    def run_all():
        for argv in pipeline:
            assert main(argv) == 0
        return {
            str(p.relative_to(tmp_path)): p.read_bytes()
            for p in sorted(tmp_path.rglob("*"))
            if p.is_file()
        }

    first = run_all()
    second = run_all()
    assert first == second


def test_criterion_12_service_equivalence(crit3):
    state = ServiceState(pool=crit3.pool, predictors=crit3.predictors)
    server = make_server(state, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    base = f"http://{host}:{port}"
    try:
        with urllib.request.urlopen(f"{base}/healthz") as resp:
            health = json.loads(resp.read())
        assert health["dim"] == 16
        assert health["models"] == list(crit3.pool.model_ids)

        rng = np.random.default_rng(112)
        lam_max = auto_lambda_max(crit3.predicted, crit3.pool)
        for _ in range(1000):
            embedding = rng.normal(size=16)
            lam = float(rng.choice([0.0, 1e-3, 1e-2, 0.1, lam_max, 2 * lam_max]))
            body = json.dumps(
                {"embedding": embedding.tolist(), "lambda": lam}
            ).encode()
            request = urllib.request.Request(
                f"{base}/route", data=body,
                headers={"Content-Type": "application/json"},
            )
            with urllib.request.urlopen(request) as resp:
                payload = json.loads(resp.read())

            record = PromptRecord("request", "", embedding)
            matrix = predict_matrix(crit3.predictors, [record])
            offline = route_erp(matrix, crit3.pool, lam)
            assert payload["chosen_model_id"] == crit3.pool.model_ids[offline.chosen[0]]
            adjusted = matrix.values[0] - np.multiply(lam, crit3.pool.costs)
            for j, score in enumerate(payload["scores"]):
                assert format(score["predicted_er"], ".17g") == format(
                    matrix.values[0, j], ".17g"
                )
                assert format(score["cost_adjusted_score"], ".17g") == format(
                    adjusted[j], ".17g"
                )
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
