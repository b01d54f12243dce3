"""Command-line pipeline: generate synthetic data, train per-model
predictors, evaluate prediction quality, sweep routing policies, check the
subgaussian win-rate bound, and serve routing decisions.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 numerical
failure. ``ERP_LOG_LEVEL`` (error|warn|info|debug) controls verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import (
    Split,
    build_er_dataset,
    empirical_er,
    index_rewards,
    load_prompts,
    load_rewards,
    stratified_split,
    write_prompts,
    write_rewards,
)
from .erp import (
    ERMatrix,
    ModelPool,
    Provenance,
    align_predictors,
    auroc,
    empirical_matrix,
    fit_pairwise_logistic,
    pairwise_win_labels,
    pairwise_win_score,
    predict_matrix,
    write_matrix_csv,
)
from .errors import DataError, NumericalError
from .evaluation import (
    ParetoPoint,
    mean_cost,
    pareto_frontier,
    per_category_r2,
    prop1_monte_carlo,
    regret,
    win_rate_table,
    write_pareto_csv,
)
from .ridge import LinearPredictor, fit_ridge
from .routing import (
    auto_lambda_grid,
    fit_zooter,
    per_category_oracle,
    permute_assignment,
    route_by_category,
    route_erp,
    route_fixed,
    route_random,
    route_zooter,
    write_assignments_csv,
)
from .synth import SynthConfig, generate

logger = logging.getLogger("erproute")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

ALL_POLICIES = ("erp", "zooter", "fixed", "random", "permutation", "oracle")
PAIRWISE_LOGISTIC_L2 = 1.0


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _configure_logging() -> None:
    name = os.environ.get("ERP_LOG_LEVEL", "warn").lower()
    level = _LOG_LEVELS.get(name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(level)


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def _predictor_path(out_dir: Path, model_id: str) -> Path:
    return out_dir / f"predictor_{_safe_name(model_id)}.json"


def _manifest(args, subcommand: str, hyperparameters: dict, inputs: dict) -> dict:
    return {
        "subcommand": subcommand,
        "seed": args.seed,
        "inputs": inputs,
        "hyperparameters": hyperparameters,
    }


def _parse_lambda_grid(text: str):
    if text == "auto":
        return None
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda grid {text!r}")
    if not grid or any(not math.isfinite(v) or v < 0.0 for v in grid):
        raise argparse.ArgumentTypeError("lambda grid needs finite values >= 0")
    return grid


def _parse_policies(text: str):
    names = [p.strip() for p in text.split(",") if p.strip()]
    unknown = [p for p in names if p not in ALL_POLICIES]
    if unknown or not names:
        raise argparse.ArgumentTypeError(
            f"policies must be a comma list from {', '.join(ALL_POLICIES)}"
        )
    return tuple(names)


def _parse_bind(text: str):
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"bind address must be host:port, got {text!r}")
    return host, int(port)


# ---------------------------------------------------------------------------
# shared loading steps


def _load_inputs(args):
    prompts = load_prompts(args.prompts)
    rewards = load_rewards(args.rewards)
    pool = ModelPool.load(args.pool)
    return prompts, rewards, pool


def _apply_split_manifest(prompts, out_dir: Path):
    path = out_dir / "split.json"
    if not path.exists():
        raise DataError(f"missing split manifest {path}; run train first")
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    assignments = manifest.get("assignments", {})
    if set(assignments) != {p.id for p in prompts}:
        raise DataError("split manifest does not cover exactly the given prompts")
    return [replace(p, split=Split(assignments[p.id])) for p in prompts], manifest


def _load_predictors(out_dir: Path, pool: ModelPool, dim: int):
    predictors = []
    for model_id in pool.model_ids:
        path = _predictor_path(out_dir, model_id)
        if not path.exists():
            raise DataError(f"missing predictor file for model {model_id!r}: {path}")
        predictors.append(LinearPredictor.load(path))
    aligned = align_predictors(predictors, pool)
    if aligned[0].dim != dim:
        raise DataError(
            f"predictors have dimension {aligned[0].dim}, prompts have {dim}"
        )
    return aligned


def _split_halves(split_prompts):
    train = [p for p in split_prompts if p.split == Split.TRAIN]
    test = [p for p in split_prompts if p.split == Split.TEST]
    if not train or not test:
        raise DataError("both splits must be nonempty")
    return train, test


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    try:
        config = SynthConfig(
            n_categories=args.categories,
            prompts_per_category=args.prompts_per_category,
            dim=args.dim,
            n_models=args.models,
            samples_per_prompt=args.samples_per_prompt,
            noise_sigma=args.noise_sigma,
            cluster_spread=args.cluster_spread,
            seed=args.seed,
        )
    except ValueError as exc:
        args.parser.error(str(exc))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = generate(config)
    write_prompts(out_dir / "prompts.jsonl", result.prompts)
    write_rewards(out_dir / "rewards.jsonl", result.sample_sets)
    result.pool.save(out_dir / "pool.json")
    _write_json(
        out_dir / "ground_truth.json", [p.to_dict() for p in result.true_predictors]
    )
    _write_json(
        out_dir / "manifest_synth.json",
        _manifest(
            args,
            "synth",
            hyperparameters={
                "n_categories": config.n_categories,
                "prompts_per_category": config.prompts_per_category,
                "dim": config.dim,
                "n_models": config.n_models,
                "samples_per_prompt": config.samples_per_prompt,
                "noise_sigma": config.noise_sigma,
                "cluster_spread": config.cluster_spread,
            },
            inputs={},
        ),
    )
    logger.info("wrote synthetic dataset to %s", out_dir)
    return 0


def cmd_train(args) -> int:
    prompts, rewards, pool = _load_inputs(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split_prompts = stratified_split(prompts, args.seed, args.train_fraction)
    index = index_rewards(rewards)

    seen_paths: dict[str, str] = {}
    for model_id in pool.model_ids:
        path = _predictor_path(out_dir, model_id)
        if str(path) in seen_paths:
            raise DataError(
                f"models {seen_paths[str(path)]!r} and {model_id!r} collide on {path}"
            )
        seen_paths[str(path)] = model_id
        train_set = build_er_dataset(split_prompts, index, model_id, Split.TRAIN)
        fit_ridge(train_set, args.beta).save(path)

    _write_json(
        out_dir / "split.json",
        {
            "seed": args.seed,
            "train_fraction": args.train_fraction,
            "assignments": {p.id: p.split.value for p in split_prompts},
        },
    )
    _write_json(
        out_dir / "manifest_train.json",
        _manifest(
            args,
            "train",
            hyperparameters={"beta": args.beta, "train_fraction": args.train_fraction},
            inputs={
                "prompts": str(args.prompts),
                "rewards": str(args.rewards),
                "pool": str(args.pool),
            },
        ),
    )
    logger.info("trained %d predictors into %s", len(pool), out_dir)
    return 0


def _pair_labels(prompts, index, model_a, model_b, mode: str, seed: int) -> np.ndarray:
    """Boolean labels "model_b beats model_a", one per prompt."""
    labels = []
    for p in prompts:
        set_a = index[(p.id, model_a)]
        set_b = index[(p.id, model_b)]
        if mode == "sample":
            labels.append(pairwise_win_labels(set_b, set_a, seed))
        else:
            labels.append(empirical_er(set_b) > empirical_er(set_a))
    return np.asarray(labels, dtype=bool)


def cmd_eval(args) -> int:
    prompts, rewards, pool = _load_inputs(args)
    out_dir = Path(args.out_dir)
    split_prompts, split_manifest = _apply_split_manifest(prompts, out_dir)
    dim = split_prompts[0].dim if split_prompts else 0
    predictors = _load_predictors(out_dir, pool, dim)
    index = index_rewards(rewards)
    train_prompts, test_prompts = _split_halves(split_prompts)

    predicted = predict_matrix(predictors, test_prompts)
    empirical = empirical_matrix(test_prompts, index, pool)

    r2_report = {
        model_id: per_category_r2(predictors[j], test_prompts, empirical.values[:, j])
        for j, model_id in enumerate(pool.model_ids)
    }

    m = len(pool)
    auroc_erp = [[None] * m for _ in range(m)]
    auroc_logistic = [[None] * m for _ in range(m)]
    train_features = np.vstack([p.embedding for p in train_prompts])
    test_features = np.vstack([p.embedding for p in test_prompts])
    for i in range(m):
        for j in range(i + 1, m):
            model_a, model_b = pool.model_ids[i], pool.model_ids[j]
            test_labels = _pair_labels(
                test_prompts, index, model_a, model_b, args.label_mode, args.seed
            )
            erp_scores = [
                pairwise_win_score(predicted.values[k, j], predicted.values[k, i])
                for k in range(len(test_prompts))
            ]
            auroc_erp[i][j] = auroc(erp_scores, test_labels)
            train_labels = _pair_labels(
                train_prompts, index, model_a, model_b, args.label_mode, args.seed
            )
            coef = fit_pairwise_logistic(
                train_features, train_labels, l2=PAIRWISE_LOGISTIC_L2
            )
            auroc_logistic[i][j] = auroc(
                test_features @ coef[:-1] + coef[-1], test_labels
            )

    categories = [p.category for p in test_prompts]
    win_rates = {
        "ground_truth": [
            {"category": t.category, "fractions": t.fractions.tolist()}
            for t in win_rate_table(empirical, categories)
        ],
        "predicted": [
            {"category": t.category, "fractions": t.fractions.tolist()}
            for t in win_rate_table(predicted, categories)
        ],
    }
    scatter = {
        model_id: [
            {
                "prompt_id": pid,
                "predicted": float(predicted.values[k, j]),
                "empirical": float(empirical.values[k, j]),
            }
            for k, pid in enumerate(predicted.prompt_ids)
        ]
        for j, model_id in enumerate(pool.model_ids)
    }

    manifest = _manifest(
        args,
        "eval",
        hyperparameters={
            "label_mode": args.label_mode,
            "pairwise_logistic_l2": PAIRWISE_LOGISTIC_L2,
            "train_fraction": split_manifest.get("train_fraction"),
        },
        inputs={
            "prompts": str(args.prompts),
            "rewards": str(args.rewards),
            "pool": str(args.pool),
        },
    )
    report = {
        "manifest": manifest,
        "model_ids": list(pool.model_ids),
        "r2": r2_report,
        "auroc": {"erp": auroc_erp, "pairwise_logistic": auroc_logistic},
        "win_rates": win_rates,
        "scatter": scatter,
    }
    _write_json(out_dir / "report.json", report)
    write_matrix_csv(out_dir / "er_predicted.csv", predicted)
    write_matrix_csv(out_dir / "er_empirical.csv", empirical)
    _write_json(out_dir / "manifest_eval.json", manifest)
    logger.info("wrote evaluation report to %s", out_dir / "report.json")
    return 0


def cmd_sweep(args) -> int:
    prompts, rewards, pool = _load_inputs(args)
    out_dir = Path(args.out_dir)
    split_prompts, split_manifest = _apply_split_manifest(prompts, out_dir)
    dim = split_prompts[0].dim if split_prompts else 0
    predictors = _load_predictors(out_dir, pool, dim)
    index = index_rewards(rewards)
    train_prompts, test_prompts = _split_halves(split_prompts)

    predicted = predict_matrix(predictors, test_prompts)
    empirical = empirical_matrix(test_prompts, index, pool)
    empirical_train = empirical_matrix(train_prompts, index, pool)

    explicit_grid = args.lambda_grid
    reward_grid = (
        np.asarray(explicit_grid, dtype=np.float64)
        if explicit_grid is not None
        else auto_lambda_grid(predicted, pool)
    )

    points: list[ParetoPoint] = []
    assignments = []

    def record(policy_fn, lambdas):
        for lam in lambdas:
            assignment = policy_fn(float(lam))
            assignments.append(assignment)
            points.append(
                ParetoPoint(
                    lam=float(lam),
                    mean_cost=mean_cost(assignment, pool),
                    mean_regret=float(regret(empirical, assignment).mean()),
                    policy_name=assignment.policy_name,
                )
            )

    if "erp" in args.policies:
        record(lambda lam: route_erp(predicted, pool, lam), reward_grid)
    if "zooter" in args.policies:
        train_embeddings = np.vstack([p.embedding for p in train_prompts])
        router = fit_zooter(
            train_embeddings,
            empirical_train.values,
            temperature=args.zooter_temperature,
        )
        if router.grad_norm > 1e-4:
            logger.warning(
                "router fit stopped at the iteration cap (|grad|_inf = %.3e)",
                router.grad_norm,
            )
        test_embeddings = np.vstack([p.embedding for p in test_prompts])
        logits_matrix = ERMatrix(
            prompt_ids=tuple(p.id for p in test_prompts),
            model_ids=pool.model_ids,
            values=router.logits(test_embeddings),
            provenance=Provenance.PREDICTED,
        )
        zooter_grid = (
            np.asarray(explicit_grid, dtype=np.float64)
            if explicit_grid is not None
            else auto_lambda_grid(logits_matrix, pool)
        )
        record(lambda lam: route_zooter(router, pool, lam, test_prompts), zooter_grid)
    if "fixed" in args.policies:
        for model_index in range(len(pool)):
            record(
                lambda lam, i=model_index: route_fixed(pool, i, test_prompts), [0.0]
            )
    if "random" in args.policies:
        record(lambda lam: route_random(pool, test_prompts, args.seed), [0.0])
    if "permutation" in args.policies:
        record(
            lambda lam: permute_assignment(route_erp(predicted, pool, lam), args.seed),
            reward_grid,
        )
    if "oracle" in args.policies:
        record(
            lambda lam: route_by_category(
                per_category_oracle(train_prompts, empirical_train, pool, lam),
                test_prompts,
                pool,
                lam,
            ),
            reward_grid,
        )

    write_pareto_csv(out_dir / "sweep.csv", points)
    for policy_name in sorted({p.policy_name for p in points}):
        frontier = pareto_frontier([p for p in points if p.policy_name == policy_name])
        write_pareto_csv(out_dir / f"frontier_{_safe_name(policy_name)}.csv", frontier)
    write_assignments_csv(out_dir / "assignments.csv", assignments, pool)
    _write_json(
        out_dir / "manifest_sweep.json",
        _manifest(
            args,
            "sweep",
            hyperparameters={
                "lambda_grid": "auto" if explicit_grid is None else explicit_grid,
                "zooter_temperature": args.zooter_temperature,
                "policies": list(args.policies),
                "train_fraction": split_manifest.get("train_fraction"),
            },
            inputs={
                "prompts": str(args.prompts),
                "rewards": str(args.rewards),
                "pool": str(args.pool),
            },
        ),
    )
    logger.info("wrote %d sweep points to %s", len(points), out_dir / "sweep.csv")
    return 0


def cmd_prop1(args) -> int:
    if args.n < 1:
        args.parser.error("--n must be at least 1")
    if not (math.isfinite(args.sigma) and args.sigma > 0):
        args.parser.error("--sigma must be a finite value > 0")
    result = prop1_monte_carlo(args.mu0, args.mu1, args.sigma, args.n, args.seed)
    slack = 4.0 * math.sqrt(0.25 / args.n)
    satisfied = result.empirical >= result.bound - slack
    print(
        json.dumps(
            {
                "mu0": args.mu0,
                "mu1": args.mu1,
                "sigma": args.sigma,
                "n": args.n,
                "seed": args.seed,
                "empirical_win_probability": result.empirical,
                "bound": result.bound,
                "monte_carlo_slack": slack,
                "satisfied": satisfied,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0 if satisfied else 3


def cmd_serve(args) -> int:
    from .serve import load_state, make_server

    state = load_state(args.predictors_dir, args.pool, args.default_lambda)
    host, port = args.bind
    server = make_server(state, host, port)
    logger.info(
        "serving %d models (dim %d) on %s:%s",
        len(state.pool),
        state.dim,
        server.server_address[0],
        server.server_address[1],
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="erproute", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(parser=p)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--categories", type=int, default=4)
    p_synth.add_argument("--prompts-per-category", type=int, default=250)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--models", type=int, default=5)
    p_synth.add_argument("--samples-per-prompt", type=int, default=32)
    p_synth.add_argument("--noise-sigma", type=float, default=0.5)
    p_synth.add_argument("--cluster-spread", type=float, default=1.0)
    add_common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    def add_io(p):
        p.add_argument("--prompts", required=True)
        p.add_argument("--rewards", required=True)
        p.add_argument("--pool", required=True)
        p.add_argument("--out-dir", required=True)

    p_train = sub.add_parser("train", help="fit per-model ridge predictors")
    add_io(p_train)
    p_train.add_argument("--beta", type=float, default=1.0)
    p_train.add_argument("--train-fraction", type=float, default=0.5)
    add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="R^2, AUROC, and win-rate report")
    add_io(p_eval)
    p_eval.add_argument("--label-mode", choices=("sample", "mean"), default="sample")
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="policy sweep over the lambda grid")
    add_io(p_sweep)
    p_sweep.add_argument("--lambda-grid", type=_parse_lambda_grid, default="auto")
    p_sweep.add_argument("--zooter-temperature", type=float, default=1.0)
    p_sweep.add_argument("--policies", type=_parse_policies, default=ALL_POLICIES)
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_prop1 = sub.add_parser("prop1", help="subgaussian win-rate bound check")
    p_prop1.add_argument("--mu0", type=float, required=True)
    p_prop1.add_argument("--mu1", type=float, required=True)
    p_prop1.add_argument("--sigma", type=float, default=1.0)
    p_prop1.add_argument("--n", type=int, default=100_000)
    add_common(p_prop1)
    p_prop1.set_defaults(func=cmd_prop1)

    p_serve = sub.add_parser("serve", help="HTTP routing service")
    p_serve.add_argument("--predictors-dir", required=True)
    p_serve.add_argument("--pool", required=True)
    p_serve.add_argument("--bind", type=_parse_bind, default=("127.0.0.1", 8080))
    p_serve.add_argument("--default-lambda", type=float, default=0.0)
    add_common(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        logger.error("%s", exc)
        print(f"erproute: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        logger.error("%s", exc)
        print(f"erproute: numerical error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    raise SystemExit(main())
