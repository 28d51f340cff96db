"""Rating-table analysis: normalized target ratings, Pearson correlation, OLS lines.

Ratings tables are CSV with the header::

    stimulus,condition,target,rater,anger,disgust,fear,happiness,sadness,surprise,neutral

An optional first line ``# scale: 1-7`` (or ``# scale: 0-1`` for machine
scores) declares the rating scale; 1-7 is assumed when absent.
"""

from __future__ import annotations

import csv
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .evaluators import EMOTIONS

RATING_HEADER = ("stimulus", "condition", "target", "rater", *EMOTIONS)
_SCALE_RE = re.compile(r"^#\s*scale\s*[:=]\s*(-?[\d.]+)\s*-\s*(-?[\d.]+)\s*$")


class RatingsError(ValueError):
    pass


class UndefinedRatingError(RatingsError):
    pass


class DegenerateInputError(ValueError):
    def __init__(self, which: str):
        super().__init__(f"{which} values are constant; correlation is undefined")
        self.which = which


@dataclass(frozen=True)
class RatingRow:
    stimulus: str
    condition: str
    target: str
    rater: str
    ratings: Mapping[str, float]


@dataclass
class RatingMatrix:
    rows: list[RatingRow]
    scale: tuple[float, float] = (1.0, 7.0)

    def __post_init__(self):
        lo, hi = self.scale
        for r in self.rows:
            if r.target not in EMOTIONS:
                raise RatingsError(f"stimulus {r.stimulus}: unknown target {r.target!r}")
            if set(r.ratings) != set(EMOTIONS):
                raise RatingsError(f"stimulus {r.stimulus}: ratings must cover all seven emotions")
            for e, v in r.ratings.items():
                if not lo <= v <= hi:
                    raise RatingsError(f"stimulus {r.stimulus}, rater {r.rater}: {e}={v} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class Correlation:
    r: float
    slope: float
    intercept: float
    n: int


def normalized_target_rating(row: RatingRow) -> float:
    total = math.fsum(row.ratings.values())
    if total <= 0:
        raise UndefinedRatingError(f"stimulus {row.stimulus}, rater {row.rater}: ratings sum to {total}")
    return row.ratings[row.target] / total


def correlate(machine: Sequence[float], human: Sequence[float]) -> Correlation:
    """Pearson r and the least-squares line ``human = slope * machine + intercept``."""
    x = np.asarray(machine, dtype=float)
    y = np.asarray(human, dtype=float)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} machine vs {len(y)} human values")
    if len(x) < 3:
        raise ValueError("need at least 3 paired values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0:
        raise DegenerateInputError("machine")
    if syy == 0:
        raise DegenerateInputError("human")
    sxy = dx @ dy
    slope = sxy / sxx
    return Correlation(float(sxy / math.sqrt(sxx * syy)), float(slope), float(y.mean() - slope * x.mean()), len(x))


def read_ratings(path: str | Path) -> RatingMatrix:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise RatingsError(f"cannot read {path}: {exc.strerror}") from None
    scale = (1.0, 7.0)
    if lines and lines[0].startswith("#"):
        m = _SCALE_RE.match(lines[0].strip())
        if not m:
            raise RatingsError(f"{path}: unrecognized header comment {lines[0]!r}")
        scale = (float(m.group(1)), float(m.group(2)))
        if scale[0] >= scale[1]:
            raise RatingsError(f"{path}: empty scale {scale}")
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader, None)
    if tuple(h.strip() for h in header or ()) != RATING_HEADER:
        raise RatingsError(f"{path}: header must be {','.join(RATING_HEADER)}")
    rows = []
    for n, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(RATING_HEADER):
            raise RatingsError(f"{path}:{n}: expected {len(RATING_HEADER)} fields, got {len(rec)}")
        try:
            ratings = {e: float(v) for e, v in zip(EMOTIONS, rec[4:])}
        except ValueError:
            raise RatingsError(f"{path}:{n}: non-numeric rating") from None
        rows.append(RatingRow(rec[0], rec[1], rec[2], rec[3], ratings))
    return RatingMatrix(rows, scale)


def summarize(matrix: RatingMatrix) -> dict[tuple[str, str], dict[str, float]]:
    """Mean raw and normalized target rating per (target emotion, condition)."""
    groups: dict[tuple[str, str], list[RatingRow]] = defaultdict(list)
    for r in matrix.rows:
        groups[(r.target, r.condition)].append(r)
    return {
        key: {
            "n": len(rows),
            "raw": math.fsum(r.ratings[r.target] for r in rows) / len(rows),
            "normalized": math.fsum(normalized_target_rating(r) for r in rows) / len(rows),
        }
        for key, rows in sorted(groups.items())
    }


def stimulus_means(matrix: RatingMatrix, normalized: bool = False) -> dict[str, tuple[str, float]]:
    """Per stimulus: its target emotion and the mean target rating over raters."""
    acc: dict[str, list[float]] = defaultdict(list)
    targets: dict[str, str] = {}
    for r in matrix.rows:
        targets.setdefault(r.stimulus, r.target)
        if targets[r.stimulus] != r.target:
            raise RatingsError(f"stimulus {r.stimulus} listed with two targets")
        acc[r.stimulus].append(normalized_target_rating(r) if normalized else r.ratings[r.target])
    return {s: (targets[s], math.fsum(v) / len(v)) for s, v in sorted(acc.items())}


def correlate_by_emotion(
    machine: RatingMatrix, human: RatingMatrix, normalized: bool = False
) -> dict[str, tuple[Correlation | None, list[tuple[str, float, float]]]]:
    """Machine-vs-human target ratings over shared stimuli, per target emotion.

    The correlation is ``None`` when an emotion has fewer than three shared
    stimuli or one side is constant.
    """
    m = stimulus_means(machine, normalized)
    h = stimulus_means(human, normalized)
    out = {}
    for emotion in EMOTIONS:
        pairs = [(s, m[s][1], h[s][1]) for s in sorted(set(m) & set(h)) if m[s][0] == emotion]
        if not pairs:
            continue
        try:
            c = correlate([p[1] for p in pairs], [p[2] for p in pairs])
        except ValueError:
            c = None
        out[emotion] = (c, pairs)
    return out


def normalized_rows(matrix: RatingMatrix) -> Iterable[tuple[RatingRow, float]]:
    for r in matrix.rows:
        yield r, normalized_target_rating(r)
