"""Sequential Bayesian-optimization campaign: initial design, then fit/propose/evaluate."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .acquisition import AcquisitionConfig, propose_next
from .evaluators import EmotionScores, EvaluatorError, Evaluator, check_emotion
from .gp import Dataset, KernelConfig, Posterior, fit, kernel_grid, predict, select_hyperparameters
from .space import ParameterSpace, ReducedPoint

log = logging.getLogger(__name__)

FAILURE_POLICIES = ("retry-once", "skip-round", "abort")
MAX_RESAMPLE = 10_000


@dataclass(frozen=True)
class HyperparameterConfig:
    """Optional ML-II grid search, repeated every ``interval`` BO rounds."""

    enabled: bool = True
    interval: int = 10
    lengthscales: tuple[float, ...] = (0.1, 0.2, 0.4, 0.8, 1.6)
    signal_variances: tuple[float, ...] = (0.01, 0.1, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(x) for x in self.lengthscales))
        object.__setattr__(self, "signal_variances", tuple(float(x) for x in self.signal_variances))
        if self.interval < 1:
            raise ValueError("hyperparameter interval must be at least 1")

    def to_dict(self) -> dict:
        return {
            "enabled": self.enabled,
            "interval": self.interval,
            "lengthscales": list(self.lengthscales),
            "signal_variances": list(self.signal_variances),
        }


@dataclass(frozen=True)
class LoopConfig:
    target: str
    rounds: int = 100
    n_init: int = 10
    seed: int = 0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    hyperparameters: HyperparameterConfig = field(default_factory=HyperparameterConfig)
    on_eval_failure: str = "abort"
    initial_points: tuple[ReducedPoint, ...] = ()

    def __post_init__(self):
        check_emotion(self.target)
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.n_init < 1:
            raise ValueError("n_init must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.on_eval_failure not in FAILURE_POLICIES:
            raise ValueError(f"on_eval_failure must be one of {FAILURE_POLICIES}")
        object.__setattr__(self, "initial_points", tuple(tuple(int(c) for c in p) for p in self.initial_points))

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "rounds": self.rounds,
            "n_init": self.n_init,
            "seed": self.seed,
            "kernel": self.kernel.to_dict(),
            "acquisition": self.acquisition.to_dict(),
            "hyperparameters": self.hyperparameters.to_dict(),
            "on_eval_failure": self.on_eval_failure,
            "initial_points": [list(p) for p in self.initial_points],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LoopConfig":
        d = dict(d)
        if "kernel" in d:
            d["kernel"] = KernelConfig(**d["kernel"])
        if "acquisition" in d:
            a = dict(d["acquisition"])
            if "local_step_sizes" in a:
                a["local_step_sizes"] = tuple(a["local_step_sizes"])
            d["acquisition"] = AcquisitionConfig(**a)
        if "hyperparameters" in d:
            d["hyperparameters"] = HyperparameterConfig(**d["hyperparameters"])
        if "initial_points" in d:
            d["initial_points"] = tuple(tuple(p) for p in d["initial_points"])
        return cls(**d)


@dataclass(frozen=True)
class RoundRecord:
    index: int
    point: ReducedPoint
    vector: dict[int, int]
    scores: EmotionScores | None
    objective: float | None
    posterior: Posterior | None
    incumbent: float | None
    wall_time: float
    status: str = "ok"
    kernel: KernelConfig | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "status": self.status,
            "point": list(self.point),
            "vector": {str(a): v for a, v in self.vector.items()},
            "scores": self.scores.to_dict() if self.scores else None,
            "objective": self.objective,
            "posterior": {"mean": self.posterior.mean, "stddev": self.posterior.stddev} if self.posterior else None,
            "incumbent": self.incumbent,
            "kernel": self.kernel.to_dict() if self.kernel else None,
            "wall_time": self.wall_time,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RoundRecord":
        post = d.get("posterior")
        return cls(
            index=int(d["index"]),
            point=tuple(int(c) for c in d["point"]),
            vector={int(a): int(v) for a, v in d["vector"].items()},
            scores=EmotionScores(d["scores"]) if d.get("scores") else None,
            objective=d.get("objective"),
            posterior=Posterior(post["mean"], post["stddev"]) if post else None,
            incumbent=d.get("incumbent"),
            wall_time=float(d["wall_time"]),
            status=d.get("status", "ok"),
            kernel=KernelConfig(**d["kernel"]) if d.get("kernel") else None,
            error=d.get("error"),
        )


@dataclass
class CampaignResult:
    records: list[RoundRecord]
    status: str  # "complete" | "aborted" | "running"
    best_point: ReducedPoint | None
    best_value: float | None

    def trace(self) -> list[tuple[int, float]]:
        return incumbent_trace(self.records)


def round_rng(seed: int, index: int) -> np.random.Generator:
    """Per-round stream; mixing (seed, index) through SeedSequence keeps resumes exact."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def dataset_from_records(records: Sequence[RoundRecord]) -> Dataset:
    ds = Dataset()
    for r in records:
        if r.ok:
            ds.add(r.point, r.objective)
    return ds


def incumbent_trace(records: Sequence[RoundRecord]) -> list[tuple[int, float]]:
    if not records:
        raise ValueError("no records")
    trace, best = [], -math.inf
    for r in records:
        if r.ok:
            best = max(best, r.objective)
        if best > -math.inf:
            trace.append((r.index, best))
    return trace


def best_of(records: Sequence[RoundRecord]) -> tuple[ReducedPoint | None, float | None]:
    best_point, best_value = None, None
    for r in records:
        if r.ok and (best_value is None or r.objective > best_value):
            best_point, best_value = r.point, r.objective
    return best_point, best_value


class _KernelSchedule:
    """Kernel in force at each round; a pure function of the records so far."""

    def __init__(self, space: ParameterSpace, cfg: LoopConfig):
        self.space = space
        self.cfg = cfg
        self._cache: dict[int, KernelConfig] = {}
        hp = cfg.hyperparameters
        self.grid = kernel_grid(hp.lengthscales, hp.signal_variances, cfg.kernel.noise_variance)

    def at(self, index: int, records: Sequence[RoundRecord]) -> KernelConfig:
        hp = self.cfg.hyperparameters
        if not hp.enabled:
            return self.cfg.kernel
        anchor = self.cfg.n_init + ((index - self.cfg.n_init) // hp.interval) * hp.interval
        if anchor not in self._cache:
            ds = dataset_from_records([r for r in records if r.index < anchor])
            self._cache[anchor] = (
                select_hyperparameters(ds, self.space, self.grid) if len(ds) else self.cfg.kernel
            )
        return self._cache[anchor]


def _initial_point(space: ParameterSpace, cfg: LoopConfig, index: int, rng, visited) -> ReducedPoint:
    if index < len(cfg.initial_points):
        return space.project(cfg.initial_points[index])
    for _ in range(MAX_RESAMPLE):
        p = space.sample_uniform(rng)
        if p not in visited:
            return p
    raise RuntimeError("could not draw an unvisited initial point")


def run_campaign(
    space: ParameterSpace,
    evaluator: Evaluator,
    cfg: LoopConfig,
    *,
    records: Sequence[RoundRecord] = (),
    on_record: Callable[[RoundRecord], None] | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> CampaignResult:
    """Run (or continue) a campaign until ``cfg.rounds`` records exist.

    ``records`` holds rounds already played, e.g. replayed from a log; every
    round draws from its own RNG stream so continuing reproduces an
    uninterrupted run. ``on_record`` sees each new record before the next
    round starts and is where persistence hooks in.
    """
    records = list(records)
    schedule = _KernelSchedule(space, cfg)
    visited = {r.point for r in records}
    status = "complete"

    for index in range(len(records), cfg.rounds):
        t0 = clock()
        rng = round_rng(cfg.seed, index)
        posterior = kernel = None
        dataset = dataset_from_records(records)
        if index < cfg.n_init or len(dataset) == 0:
            point = _initial_point(space, cfg, index, rng, visited)
        else:
            kernel = schedule.at(index, records)
            model = fit(dataset, kernel, space)
            point = propose_next(model, space, cfg.acquisition, visited, rng)
            posterior = predict(model, space, point)
        vector = space.expand(point)

        attempts = 2 if cfg.on_eval_failure == "retry-once" else 1
        result, error = None, None
        for _ in range(attempts):
            try:
                result = evaluator.evaluate(vector, cfg.target)
                break
            except EvaluatorError as exc:
                error = f"{type(exc).__name__}: {exc}"
                log.warning("round %d evaluation failed: %s", index, error)

        prev = records[-1].incumbent if records else None
        if result is not None:
            incumbent = result.objective if prev is None else max(prev, result.objective)
            rec = RoundRecord(index, point, vector, result.scores, result.objective, posterior,
                              incumbent, clock() - t0, "ok", kernel)
        else:
            rec = RoundRecord(index, point, vector, None, None, posterior, prev, clock() - t0,
                              "failed", kernel, error)
        if on_record is not None:
            on_record(rec)
        records.append(rec)
        visited.add(point)
        if not rec.ok and cfg.on_eval_failure != "skip-round":
            status = "aborted"
            break

    best_point, best_value = best_of(records)
    return CampaignResult(records, status, best_point, best_value)


def random_baseline(
    space: ParameterSpace, evaluator: Evaluator, budget: int, seed: int, target: str, **kwargs
) -> list[tuple[int, float]]:
    """Uniform sampling with ``budget`` evaluations; the same stream as a BO initial design."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    cfg = LoopConfig(target=target, rounds=budget, n_init=budget, seed=seed, **kwargs)
    return run_campaign(space, evaluator, cfg).trace()


def with_overrides(cfg: LoopConfig, **changes) -> LoopConfig:
    return replace(cfg, **changes)
