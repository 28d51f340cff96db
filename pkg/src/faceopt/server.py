"""Serve an in-process evaluator over the JSON wire protocol."""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .evaluators import EMOTIONS, Evaluator, encode_response
from .space import ParameterSpace

log = logging.getLogger(__name__)

DEFAULT_PATH = "/evaluate"


def _handler(evaluator: Evaluator, space: ParameterSpace, path: str):
    class Handler(BaseHTTPRequestHandler):
        def _reply(self, code: int, body: bytes) -> None:
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _error(self, code: int, message: str) -> None:
            self._reply(code, json.dumps({"error": message}).encode())

        def do_POST(self):
            if self.path != path:
                return self._error(404, f"unknown path {self.path}")
            length = int(self.headers.get("Content-Length") or 0)
            try:
                body = json.loads(self.rfile.read(length))
            except json.JSONDecodeError as exc:
                return self._error(400, f"invalid JSON: {exc}")
            if not isinstance(body, dict) or set(body) != {"actuators", "target"}:
                return self._error(400, "request must hold exactly 'actuators' and 'target'")
            if body["target"] not in EMOTIONS:
                return self._error(400, f"unknown target {body['target']!r}")
            raw = body["actuators"]
            if not isinstance(raw, dict):
                return self._error(400, "'actuators' must be an object")
            try:
                vector = {int(k): v for k, v in raw.items()}
            except ValueError:
                return self._error(400, "actuator ids must be decimal strings")
            if any(isinstance(v, bool) or not isinstance(v, int) for v in vector.values()):
                return self._error(400, "actuator values must be integers")
            report = space.validate(vector)
            if not report.ok:
                return self._error(422, "; ".join(v.message for v in report.violations))
            result = evaluator.evaluate(vector, body["target"])
            self._reply(200, encode_response(result.scores))

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(evaluator: Evaluator, space: ParameterSpace, host: str = "127.0.0.1", port: int = 0,
                path: str = DEFAULT_PATH) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _handler(evaluator, space, path))
    server.daemon_threads = True
    return server


def serve_in_thread(evaluator: Evaluator, space: ParameterSpace, host: str = "127.0.0.1", port: int = 0,
                    path: str = DEFAULT_PATH) -> tuple[ThreadingHTTPServer, str]:
    """Start a background server; returns it with its endpoint URL. Call ``shutdown()`` when done."""
    server = make_server(evaluator, space, host, port, path)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}{path}"
