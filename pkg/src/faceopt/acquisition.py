"""UCB scoring and the search for the next lattice point to evaluate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection

import numpy as np

from .gp import GpModel, Posterior, predict_batch
from .space import ParameterSpace, ReducedPoint


class SearchExhausted(RuntimeError):
    """Every reachable candidate has already been evaluated."""


@dataclass(frozen=True)
class AcquisitionConfig:
    beta: float = 2.0
    n_candidates: int = 2048
    n_local_steps: int = 20
    local_step_sizes: tuple[int, ...] = (1, 4, 16)
    # +1 scores mean + beta*std; -1 reproduces the minus-sign form literally.
    sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "local_step_sizes", tuple(int(s) for s in self.local_step_sizes))
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be at least 1")
        if self.n_local_steps < 0:
            raise ValueError("n_local_steps must be non-negative")
        if not self.local_step_sizes or min(self.local_step_sizes) < 1:
            raise ValueError("local_step_sizes must be positive integers")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "n_candidates": self.n_candidates,
            "n_local_steps": self.n_local_steps,
            "local_step_sizes": list(self.local_step_sizes),
            "sign": self.sign,
        }


def ucb(post: Posterior, beta: float, sign: int = 1) -> float:
    return post.mean + sign * beta * post.stddev


def ucb_batch(model: GpModel, space: ParameterSpace, points: np.ndarray, cfg: AcquisitionConfig) -> np.ndarray:
    mean, sd = predict_batch(model, space, points)
    return mean + cfg.sign * cfg.beta * sd


def _unvisited_mask(points: np.ndarray, visited: Collection[ReducedPoint]) -> np.ndarray:
    if not visited:
        return np.ones(len(points), dtype=bool)
    return np.fromiter((tuple(row) not in visited for row in points.tolist()), dtype=bool, count=len(points))


def _perturb(space: ParameterSpace, points: np.ndarray, steps: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    coord = rng.integers(0, space.dim, size=n)
    size = np.asarray(steps)[rng.integers(0, len(steps), size=n)]
    sign = rng.choice([-1, 1], size=n)
    moved = points.copy()
    moved[np.arange(n), coord] += sign * size
    return space.project_array(moved)


def _neighbours(space: ParameterSpace, point: np.ndarray, steps: tuple[int, ...]) -> np.ndarray:
    moves = []
    for i in range(space.dim):
        for s in steps:
            for sign in (1, -1):
                q = point.copy()
                q[i] += sign * s
                moves.append(q)
    return space.project_array(np.array(moves))


def propose_next(
    model: GpModel,
    space: ParameterSpace,
    cfg: AcquisitionConfig,
    visited: Collection[ReducedPoint],
    rng_seed,
) -> ReducedPoint:
    """Return the highest-UCB unvisited point found by multistart hill-climbing.

    Candidates are random lattice draws (or the full lattice when
    ``n_candidates`` covers it) plus one random local step from every visited
    point. The best unvisited candidate then seeds a best-improvement
    coordinate climb over ``local_step_sizes``.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    visited = visited if isinstance(visited, (set, frozenset, dict)) else set(map(tuple, visited))

    if cfg.n_candidates >= space.lattice_size:
        candidates = space.enumerate_lattice()
    else:
        candidates = space.sample_batch(rng, cfg.n_candidates)
    if visited:
        seen = np.array(sorted(visited), dtype=np.int64)
        candidates = np.vstack([candidates, _perturb(space, seen, cfg.local_step_sizes, rng)])

    open_mask = _unvisited_mask(candidates, visited)
    if not open_mask.any():
        raise SearchExhausted(f"all {len(candidates)} candidates were already evaluated")
    candidates = candidates[open_mask]
    scores = ucb_batch(model, space, candidates, cfg)
    best = int(np.argmax(scores))
    current, current_score = candidates[best], scores[best]

    for _ in range(cfg.n_local_steps):
        nbrs = _neighbours(space, current, cfg.local_step_sizes)
        nbrs = nbrs[_unvisited_mask(nbrs, visited)]
        if not len(nbrs):
            break
        nbr_scores = ucb_batch(model, space, nbrs, cfg)
        j = int(np.argmax(nbr_scores))
        if nbr_scores[j] <= current_score:
            break
        current, current_score = nbrs[j], nbr_scores[j]

    return tuple(int(c) for c in current)
