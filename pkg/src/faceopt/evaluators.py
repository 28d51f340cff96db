"""Black-box objective contract plus the HTTP client for external scorers.

Every evaluator maps a validated actuator vector to probability scores over
the seven basic emotions; the campaign objective is the score of its target
emotion.

Wire protocol (HTTP POST, JSON)::

    request  {"actuators": {"<id>": <int>, ...}, "target": "<emotion>"}
    response {"scores": {"anger": <float>, ..., "neutral": <float>}}
"""

from __future__ import annotations

import json
import math
import socket
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

EMOTIONS = ("anger", "disgust", "fear", "happiness", "sadness", "surprise", "neutral")

SUM_TOLERANCE = 1e-6
RENORMALIZE_TOLERANCE = 1e-3


class EvaluatorError(RuntimeError):
    pass


class TransportError(EvaluatorError):
    """Timeout or connection failure; safe to retry."""


class MalformedResponseError(EvaluatorError):
    """The evaluator answered, but not with a valid score record."""

    def __init__(self, message: str, raw: str | bytes | None = None):
        super().__init__(message)
        self.raw = raw


class InvalidScoresError(ValueError):
    pass


def check_emotion(label: str) -> str:
    if label not in EMOTIONS:
        raise ValueError(f"unknown emotion {label!r}; expected one of {', '.join(EMOTIONS)}")
    return label


@dataclass(frozen=True)
class EmotionScores:
    scores: Mapping[str, float]

    def __post_init__(self):
        labels = set(self.scores)
        if labels != set(EMOTIONS):
            raise InvalidScoresError(
                f"emotion labels mismatch: missing {sorted(set(EMOTIONS) - labels)}, "
                f"unexpected {sorted(labels - set(EMOTIONS))}"
            )
        for k, v in self.scores.items():
            if not isinstance(v, (int, float)) or not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise InvalidScoresError(f"score for {k} is {v!r}, outside [0, 1]")
        total = math.fsum(self.scores.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise InvalidScoresError(f"scores sum to {total!r}, not 1")
        object.__setattr__(self, "scores", {k: float(self.scores[k]) for k in EMOTIONS})

    def __getitem__(self, label: str) -> float:
        return self.scores[label]

    def top(self) -> str:
        return max(EMOTIONS, key=lambda e: self.scores[e])

    def to_dict(self) -> dict[str, float]:
        return dict(self.scores)


@dataclass(frozen=True)
class EvaluationResult:
    scores: EmotionScores
    objective: float
    latency: float
    evaluator_id: str


@runtime_checkable
class Evaluator(Protocol):
    evaluator_id: str

    def evaluate(self, vector: Mapping[int, int], target: str) -> EvaluationResult: ...


def parse_scores(raw: str | bytes) -> EmotionScores:
    """Decode a wire response, renormalizing only float-serialization noise."""
    try:
        body = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedResponseError(f"response is not JSON: {exc}", raw) from None
    if not isinstance(body, dict) or not isinstance(body.get("scores"), dict):
        raise MalformedResponseError("response lacks a 'scores' object", raw)
    scores = body["scores"]
    labels = set(scores)
    if labels != set(EMOTIONS):
        raise MalformedResponseError(
            f"response labels mismatch: missing {sorted(set(EMOTIONS) - labels)}, "
            f"unexpected {sorted(labels - set(EMOTIONS))}",
            raw,
        )
    values = {}
    for k in EMOTIONS:
        v = scores[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise MalformedResponseError(f"score for {k} is not a finite number: {v!r}", raw)
        values[k] = float(v)
    total = math.fsum(values.values())
    if abs(total - 1.0) > RENORMALIZE_TOLERANCE:
        raise MalformedResponseError(f"scores sum to {total!r}", raw)
    if abs(total - 1.0) > SUM_TOLERANCE:
        values = {k: v / total for k, v in values.items()}
    try:
        return EmotionScores(values)
    except InvalidScoresError as exc:
        raise MalformedResponseError(str(exc), raw) from None


def encode_request(vector: Mapping[int, int], target: str) -> bytes:
    body = {"actuators": {str(a): int(v) for a, v in sorted(vector.items())}, "target": target}
    return json.dumps(body, sort_keys=False).encode()


def encode_response(scores: EmotionScores) -> bytes:
    return json.dumps({"scores": scores.to_dict()}).encode()


def external_evaluate(
    endpoint: str,
    vector: Mapping[int, int],
    timeout: float,
    target: str = "neutral",
    *,
    retries: int = 2,
    backoff: float = 0.1,
) -> EmotionScores:
    """POST one actuator vector to ``endpoint`` and return the validated scores.

    Transport failures (timeouts, refused connections, 5xx) are retried up to
    ``retries`` times with exponential backoff; malformed answers are not.
    """
    payload = encode_request(vector, target)
    last: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(backoff * 2 ** (attempt - 1))
        req = urllib.request.Request(
            endpoint, data=payload, method="POST", headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            body = exc.read()
            if exc.code >= 500:
                last = exc
                continue
            raise MalformedResponseError(f"HTTP {exc.code} from evaluator", body) from None
        except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
            last = exc
            continue
        return parse_scores(raw)
    raise TransportError(f"evaluator at {endpoint} failed after {retries + 1} attempts: {last}")


class ExternalEvaluator:
    """Evaluator backed by a remote scorer speaking the wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2, backoff: float = 0.5):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.evaluator_id = f"external:{endpoint}"

    def evaluate(self, vector: Mapping[int, int], target: str) -> EvaluationResult:
        check_emotion(target)
        t0 = time.perf_counter()
        scores = external_evaluate(
            self.endpoint, vector, self.timeout, target, retries=self.retries, backoff=self.backoff
        )
        return EvaluationResult(scores, scores[target], time.perf_counter() - t0, self.evaluator_id)


class QuadraticBowl:
    """Separable concave test objective on a small lattice.

    ``y = 1 - |v - optimum|^2 / norm`` with ``norm`` the largest squared
    distance reachable in the box, so ``y`` lies in [0, 1]. The target emotion
    receives ``y`` and the other six share ``1 - y`` equally.
    """

    def __init__(self, optimum: Sequence[int], actuators: Sequence[int], lower: int, upper: int):
        if len(optimum) != len(actuators):
            raise ValueError("optimum and actuators differ in length")
        self.optimum = np.asarray(optimum, dtype=float)
        self.actuators = tuple(actuators)
        far = np.maximum(self.optimum - lower, upper - self.optimum)
        self.norm = float((far**2).sum()) or 1.0
        self.evaluator_id = "quadratic-bowl"

    def value(self, coords: Sequence[float]) -> float:
        d = np.asarray(coords, dtype=float) - self.optimum
        return float(1.0 - (d @ d) / self.norm)

    def evaluate(self, vector: Mapping[int, int], target: str) -> EvaluationResult:
        check_emotion(target)
        y = self.value([vector[a] for a in self.actuators])
        rest = (1.0 - y) / (len(EMOTIONS) - 1)
        scores = EmotionScores({e: (y if e == target else rest) for e in EMOTIONS})
        return EvaluationResult(scores, scores[target], 0.0, self.evaluator_id)
