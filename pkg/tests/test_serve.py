import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from erproute.dataset import PromptRecord
from erproute.erp import ModelPool, predict_matrix
from erproute.ridge import LinearPredictor
from erproute.routing import route_erp
from erproute.serve import ServiceState, decide, load_state, make_server

DIM = 4
POOL = ModelPool((("cheap", 8.0), ("mid", 20.0), ("big", 70.0)))


def _predictors():
    rng = np.random.default_rng(13)
    return [
        LinearPredictor(mid, rng.normal(size=DIM), float(rng.normal()), 1.0)
        for mid in POOL.model_ids
    ]


@pytest.fixture(scope="module")
def server_url():
    state = ServiceState(pool=POOL, predictors=_predictors(), default_lambda=0.01)
    server = make_server(state, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def _get(url):
    try:
        with urllib.request.urlopen(url) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def _post(url, payload, raw=None):
    body = raw if raw is not None else json.dumps(payload).encode()
    req = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


class TestHealth:
    def test_healthz(self, server_url):
        status, payload = _get(f"{server_url}/healthz")
        assert status == 200
        assert payload == {
            "status": "ok",
            "dim": DIM,
            "models": ["cheap", "mid", "big"],
        }

    def test_unknown_path(self, server_url):
        status, payload = _get(f"{server_url}/nope")
        assert status == 404

    def test_not_ready_returns_503(self):
        state = ServiceState(
            pool=POOL, predictors=_predictors(), default_lambda=0.0, ready=False
        )
        server = make_server(state, "127.0.0.1", 0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        host, port = server.server_address
        try:
            status, payload = _get(f"http://{host}:{port}/healthz")
            assert status == 503
            assert payload == {"status": "loading"}
            status, _ = _post(
                f"http://{host}:{port}/route", {"embedding": [0.0] * DIM}
            )
            assert status == 503
        finally:
            server.shutdown()
            server.server_close()
            thread.join(timeout=5)


class TestRoute:
    def test_matches_offline_policy(self, server_url):
        predictors = _predictors()
        rng = np.random.default_rng(7)
        for lam in (0.0, 0.01, 5.0):
            embedding = rng.normal(size=DIM)
            status, payload = _post(
                f"{server_url}/route",
                {"embedding": embedding.tolist(), "lambda": lam},
            )
            assert status == 200
            record = PromptRecord("request", "", embedding)
            matrix = predict_matrix(predictors, [record])
            offline = route_erp(matrix, POOL, lam)
            assert payload["chosen_model_id"] == POOL.model_ids[offline.chosen[0]]
            for j, score in enumerate(payload["scores"]):
                assert score["model_id"] == POOL.model_ids[j]
                assert score["predicted_er"] == matrix.values[0, j]

    def test_default_lambda_applies(self, server_url):
        embedding = [1.0, -1.0, 0.5, 0.0]
        status, with_default = _post(f"{server_url}/route", {"embedding": embedding})
        assert status == 200
        status, explicit = _post(
            f"{server_url}/route", {"embedding": embedding, "lambda": 0.01}
        )
        assert with_default == explicit

    def test_huge_lambda_routes_cheapest(self, server_url):
        status, payload = _post(
            f"{server_url}/route",
            {"embedding": [0.0] * DIM, "lambda": 1e9},
        )
        assert status == 200
        assert payload["chosen_model_id"] == "cheap"

    def test_cost_adjusted_scores_consistent(self, server_url):
        status, payload = _post(
            f"{server_url}/route", {"embedding": [0.3] * DIM, "lambda": 0.5}
        )
        assert status == 200
        for score, cost in zip(payload["scores"], POOL.costs):
            assert score["cost_adjusted_score"] == pytest.approx(
                score["predicted_er"] - 0.5 * cost, abs=1e-12
            )

    def test_malformed_json(self, server_url):
        status, payload = _post(f"{server_url}/route", None, raw=b"{not json")
        assert status == 400
        assert "malformed" in payload["error"]

    def test_wrong_dimension(self, server_url):
        status, payload = _post(f"{server_url}/route", {"embedding": [1.0, 2.0]})
        assert status == 400
        assert "length 2" in payload["error"]

    def test_non_numeric_embedding(self, server_url):
        status, payload = _post(
            f"{server_url}/route", {"embedding": ["a"] * DIM}
        )
        assert status == 400

    def test_non_finite_embedding(self, server_url):
        status, payload = _post(
            f"{server_url}/route", None,
            raw=json.dumps({"embedding": [1.0, 2.0, 3.0, 4.0]}).replace(
                "1.0", "NaN"
            ).encode(),
        )
        assert status == 400

    def test_negative_lambda(self, server_url):
        status, payload = _post(
            f"{server_url}/route", {"embedding": [0.0] * DIM, "lambda": -1}
        )
        assert status == 400

    def test_missing_embedding_field(self, server_url):
        status, payload = _post(f"{server_url}/route", {"lambda": 0.0})
        assert status == 400


class TestLoadState:
    def test_loads_from_directory(self, tmp_path):
        pool_path = tmp_path / "pool.json"
        POOL.save(pool_path)
        for p in _predictors():
            p.save(tmp_path / f"predictor_{p.model_id}.json")
        # unrelated JSON in the same directory is skipped
        (tmp_path / "manifest_train.json").write_text('{"subcommand": "train"}')
        state = load_state(tmp_path, pool_path, default_lambda=0.25)
        assert state.dim == DIM
        assert [p.model_id for p in state.predictors] == list(POOL.model_ids)
        assert state.default_lambda == 0.25

    def test_missing_predictor(self, tmp_path):
        pool_path = tmp_path / "pool.json"
        POOL.save(pool_path)
        _predictors()[0].save(tmp_path / "predictor_cheap.json")
        from erproute.errors import DataError

        with pytest.raises(DataError, match="missing predictors"):
            load_state(tmp_path, pool_path)

    def test_decide_function_shape(self):
        state = ServiceState(pool=POOL, predictors=_predictors())
        payload = decide(state, np.zeros(DIM), 0.0)
        assert set(payload) == {"chosen_model_id", "scores"}
        assert len(payload["scores"]) == len(POOL)
