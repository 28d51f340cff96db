"""Deterministic synthetic face scorer.

Actuator commands are mapped linearly onto FACS action-unit intensities and
compared against one prototype AU pattern per emotion; a softmax over the
negative weighted distances yields the seven emotion probabilities. Each
prototype pattern is the activation of a concrete lattice point, so the best
expression for every emotion is known by construction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .evaluators import EMOTIONS, EmotionScores, EvaluationResult, check_emotion
from .space import ParameterSpace, ReducedPoint

FULL_SCALE = 255

# Action unit -> contributing actuators. Actuators 6/7 drive two units.
AU_ACTUATORS: dict[str, tuple[int, ...]] = {
    "upper lid raiser": (1, 2),
    "cheek raiser": (6, 7, 9, 13),
    "lid tightener": (6, 7),
    "outer brow raiser": (8, 12),
    "inner brow raiser": (10, 14),
    "brow lowerer": (11, 15),
    "cheek puller": (16, 17),
    "lip corner puller": (18, 22),
    "lip corner depressor": (19, 23),
    "lip stretcher": (20, 24),
    "lip funneler": (28, 29),
    "nose wrinkler": (30,),
    "jaw dropper": (32,),
}
AU_LABELS = tuple(AU_ACTUATORS)

# Per-emotion actuator settings whose activations become the prototype AU
# patterns. Keys are the left actuator of each mirror pair; unlisted are 0.
PROTOTYPE_SETTINGS: dict[str, dict[int, int]] = {
    "anger": {11: 255, 1: 200, 6: 230},
    "disgust": {30: 255, 19: 200, 6: 80},
    "fear": {10: 230, 8: 200, 11: 150, 1: 255, 20: 230, 32: 150},
    "happiness": {9: 255, 6: 120, 18: 255, 16: 150},
    "sadness": {10: 255, 11: 180, 19: 230},
    "surprise": {10: 255, 8: 255, 1: 255, 32: 200},
    "neutral": {},
}

DEFAULT_TEMPERATURE = 0.25
MIN_SEPARATION = 0.5
MIN_SELF_SCORE = 0.9


class SimulatorConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EmotionPrototype:
    emotion: str
    target: Mapping[str, float]
    weight: Mapping[str, float]

    def __post_init__(self):
        if set(self.target) != set(self.weight):
            raise SimulatorConfigError(f"{self.emotion}: target and weight keys differ")
        if any(w < 0 for w in self.weight.values()):
            raise SimulatorConfigError(f"{self.emotion}: negative weight")

    def distance(self, au: Mapping[str, float]) -> float:
        return math.sqrt(sum(self.weight[k] * (au.get(k, 0.0) - t) ** 2 for k, t in self.target.items()))


def au_activation(v: Mapping[int, int]) -> dict[str, float]:
    """Mean of value/255 over each unit's actuators; absent actuators count as 0."""
    return {
        label: sum(v.get(a, 0) for a in acts) / (FULL_SCALE * len(acts))
        for label, acts in AU_ACTUATORS.items()
    }


def emotion_scores(au: Mapping[str, float], prototypes: Sequence[EmotionPrototype], temperature: float) -> EmotionScores:
    _check_cover(prototypes)
    if not temperature > 0:
        raise SimulatorConfigError("temperature must be positive")
    by_emotion = {p.emotion: p for p in prototypes}
    logits = np.array([-by_emotion[e].distance(au) / temperature for e in EMOTIONS])
    logits -= logits.max()
    w = np.exp(logits)
    p = w / w.sum()
    return EmotionScores({e: float(x) for e, x in zip(EMOTIONS, p)})


def _check_cover(prototypes: Sequence[EmotionPrototype]) -> None:
    names = [p.emotion for p in prototypes]
    if sorted(names) != sorted(EMOTIONS):
        dupes = sorted({n for n in names if names.count(n) > 1})
        missing = sorted(set(EMOTIONS) - set(names))
        raise SimulatorConfigError(f"prototypes must cover each emotion once (duplicates {dupes}, missing {missing})")


def setting_vector(setting: Mapping[int, int], space: ParameterSpace) -> dict[int, int]:
    """Full actuator vector for a prototype setting, mirrored across each group."""
    coords = [0] * space.dim
    for actuator, value in setting.items():
        coords[space.group_index(actuator)] = value
    return space.expand(coords)


def default_prototypes() -> list[EmotionPrototype]:
    # AU targets come from the bundled space, so they do not depend on the
    # space a simulator is later asked to score
    space = ParameterSpace.default()
    protos = []
    for emotion in EMOTIONS:
        target = au_activation(setting_vector(PROTOTYPE_SETTINGS[emotion], space))
        protos.append(EmotionPrototype(emotion, target, {k: 1.0 for k in target}))
    return protos


class FaceSimulator:
    """In-process stand-in for camera capture plus emotion recognition."""

    evaluator_id = "face-sim"

    def __init__(
        self,
        space: ParameterSpace | None = None,
        prototypes: Sequence[EmotionPrototype] | None = None,
        temperature: float = DEFAULT_TEMPERATURE,
        min_separation: float = MIN_SEPARATION,
        min_self_score: float = MIN_SELF_SCORE,
    ):
        self.space = space or ParameterSpace.default()
        self.prototypes = list(prototypes) if prototypes is not None else default_prototypes()
        self.temperature = temperature
        _check_cover(self.prototypes)
        by_emotion = {p.emotion: p for p in self.prototypes}
        for i, a in enumerate(EMOTIONS):
            for b in EMOTIONS[i + 1:]:
                d = by_emotion[a].distance(by_emotion[b].target)
                if d < min_separation:
                    raise SimulatorConfigError(f"prototypes {a} and {b} only {d:.3f} apart (< {min_separation})")
        for p in self.prototypes:
            s = emotion_scores(p.target, self.prototypes, temperature)[p.emotion]
            if s <= min_self_score:
                raise SimulatorConfigError(f"{p.emotion} prototype scores {s:.3f} on itself (<= {min_self_score})")
        self._optima: dict[str, ReducedPoint] = {}

    def au_activation(self, v: Mapping[int, int]) -> dict[str, float]:
        return au_activation(v)

    def scores(self, v: Mapping[int, int]) -> EmotionScores:
        return emotion_scores(au_activation(v), self.prototypes, self.temperature)

    def simulate(self, v: Mapping[int, int], target: str) -> EvaluationResult:
        check_emotion(target)
        t0 = time.perf_counter()
        scores = self.scores(v)
        return EvaluationResult(scores, scores[target], time.perf_counter() - t0, self.evaluator_id)

    evaluate = simulate

    def score_points(self, points: np.ndarray, target: str) -> np.ndarray:
        """Target-emotion scores for many reduced points at once (vectorized)."""
        points = np.atleast_2d(points)
        mix = np.zeros((len(AU_LABELS), self.space.dim))
        for r, acts in enumerate(AU_ACTUATORS.values()):
            for a in acts:
                try:
                    mix[r, self.space.group_index(a)] += 1.0 / len(acts)
                except KeyError:
                    pass
        au = points @ mix.T / FULL_SCALE
        targets = np.array([[p.target[k] for k in AU_LABELS] for p in self._ordered()])
        weights = np.array([[p.weight[k] for k in AU_LABELS] for p in self._ordered()])
        d = np.sqrt((weights[None] * (au[:, None, :] - targets[None]) ** 2).sum(-1))
        logits = -d / self.temperature
        logits -= logits.max(1, keepdims=True)
        w = np.exp(logits)
        return (w / w.sum(1, keepdims=True))[:, EMOTIONS.index(target)]

    def _ordered(self) -> list[EmotionPrototype]:
        by_emotion = {p.emotion: p for p in self.prototypes}
        return [by_emotion[e] for e in EMOTIONS]

    def prototype_point(self, emotion: str) -> ReducedPoint:
        check_emotion(emotion)
        missing = set(PROTOTYPE_SETTINGS[emotion]) - set(self.space.actuators)
        if missing:
            raise SimulatorConfigError(f"{emotion} prototype uses actuators {sorted(missing)} outside this space")
        return self.space.reduce(setting_vector(PROTOTYPE_SETTINGS[emotion], self.space))

    def optimal_point(self, emotion: str) -> ReducedPoint:
        """Best lattice point for ``emotion``, refined from its prototype setting.

        Starts at the prototype point and climbs over single-coordinate moves
        of 64, 16, 4 and 1 units until no move improves the score.
        """
        check_emotion(emotion)
        if emotion not in self._optima:
            space = self.space
            current = np.array(self.prototype_point(emotion), dtype=np.int64)
            best = self.score_points(current[None], emotion)[0]
            steps = (64, 16, 4, 1)
            while True:
                moves = []
                for i in range(space.dim):
                    for s in steps:
                        for sign in (1, -1):
                            q = current.copy()
                            q[i] += sign * s
                            moves.append(q)
                moves = space.project_array(np.array(moves))
                vals = self.score_points(moves, emotion)
                j = int(np.argmax(vals))
                if vals[j] <= best:
                    break
                current, best = moves[j], vals[j]
            self._optima[emotion] = tuple(int(c) for c in current)
        return self._optima[emotion]

    def optimal_score(self, emotion: str) -> float:
        return self.simulate(self.space.expand(self.optimal_point(emotion)), emotion).objective
