"""Minimal HTTP routing service over trained predictors.

Clients POST an embedding (and optionally an exchange rate) to ``/route``
and get back the chosen model plus per-model predicted and cost-adjusted
scores; ``/healthz`` reports readiness, dimension, and pool. The service
scores embeddings only — there is no text handling and no proxying to model
backends — and its decisions match the offline routing policy exactly
because it runs the same code on the same shapes.

Predictor state is immutable after load, so the threaded server needs no
locks; shutdown completes in-flight requests.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .dataset import PromptRecord
from .erp import ModelPool, align_predictors, predict_matrix
from .errors import DataError
from .ridge import LinearPredictor
from .routing import route_erp

logger = logging.getLogger("erproute.serve")


class RequestError(Exception):
    """Client-side request problem -> HTTP 400."""


@dataclass
class ServiceState:
    pool: ModelPool
    predictors: list[LinearPredictor]
    default_lambda: float = 0.0
    ready: bool = field(default=True)

    @property
    def dim(self) -> int:
        return self.predictors[0].dim


def load_state(
    predictors_dir, pool_path, default_lambda: float = 0.0
) -> ServiceState:
    """Load the pool and one predictor JSON per pool model from a directory."""
    if not (math.isfinite(default_lambda) and default_lambda >= 0.0):
        raise DataError("default lambda must be a finite value >= 0")
    pool = ModelPool.load(pool_path)
    directory = Path(predictors_dir)
    files = sorted(directory.glob("*.json"))
    predictors = []
    for path in files:
        try:
            predictors.append(LinearPredictor.load(path))
        except DataError:
            continue  # unrelated JSON (manifests, split files) may share the dir
    aligned = align_predictors(predictors, pool)
    return ServiceState(pool=pool, predictors=aligned, default_lambda=default_lambda)


def decide(state: ServiceState, embedding: np.ndarray, lam: float) -> dict:
    """Route one embedding; the same call path as offline routing."""
    record = PromptRecord(id="request", category="", embedding=embedding)
    matrix = predict_matrix(state.predictors, [record])
    assignment = route_erp(matrix, state.pool, lam)
    adjusted = matrix.values[0] - np.multiply(lam, state.pool.costs)
    chosen = int(assignment.chosen[0])
    return {
        "chosen_model_id": state.pool.model_ids[chosen],
        "scores": [
            {
                "model_id": model_id,
                "predicted_er": float(matrix.values[0, j]),
                "cost_adjusted_score": float(adjusted[j]),
            }
            for j, model_id in enumerate(state.pool.model_ids)
        ],
    }


def _parse_route_request(state: ServiceState, body: bytes) -> tuple[np.ndarray, float]:
    try:
        obj = json.loads(body)
    except json.JSONDecodeError as exc:
        raise RequestError(f"malformed JSON body: {exc.msg}") from exc
    if not isinstance(obj, dict) or "embedding" not in obj:
        raise RequestError("request must be a JSON object with an 'embedding' field")
    raw = obj["embedding"]
    if not isinstance(raw, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
    ):
        raise RequestError("'embedding' must be a list of numbers")
    embedding = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(embedding)):
        raise RequestError("'embedding' contains a non-finite value")
    if embedding.shape != (state.dim,):
        raise RequestError(
            f"'embedding' has length {embedding.shape[0]}, expected {state.dim}"
        )
    lam = obj.get("lambda", state.default_lambda)
    if isinstance(lam, bool) or not isinstance(lam, (int, float)):
        raise RequestError("'lambda' must be a number")
    lam = float(lam)
    if not (math.isfinite(lam) and lam >= 0.0):
        raise RequestError("'lambda' must be a finite value >= 0")
    return embedding, lam


class _Handler(BaseHTTPRequestHandler):
    @property
    def state(self) -> ServiceState:
        return self.server.state  # type: ignore[attr-defined]

    def log_message(self, fmt, *fmt_args):
        logger.debug("%s %s", self.address_string(), fmt % fmt_args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/healthz":
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        if not self.state.ready:
            self._send_json(503, {"status": "loading"})
            return
        self._send_json(
            200,
            {
                "status": "ok",
                "dim": self.state.dim,
                "models": list(self.state.pool.model_ids),
            },
        )

    def do_POST(self):
        if self.path != "/route":
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        if not self.state.ready:
            self._send_json(503, {"status": "loading"})
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        try:
            embedding, lam = _parse_route_request(self.state, body)
        except RequestError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(200, decide(self.state, embedding, lam))


class RoutingServer(ThreadingHTTPServer):
    daemon_threads = False  # graceful shutdown waits for in-flight requests
    block_on_close = True

    def __init__(self, state: ServiceState, address):
        self.state = state
        super().__init__(address, _Handler)


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8080):
    """Bind the threaded server; port 0 picks a free port."""
    return RoutingServer(state, (host, port))
