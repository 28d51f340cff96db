"""Gaussian-process regression over normalized lattice points.

Inputs are mapped affinely from the lattice bounds onto ``[0, 1]^d`` and
modelled with an isotropic squared-exponential kernel. Targets are centred on
their empirical mean, which then serves as the constant prior mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .space import ParameterSpace, ReducedPoint

JITTER_LEVELS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class GpFitError(RuntimeError):
    def __init__(self, message: str, jitters: Sequence[float] = ()):
        super().__init__(message)
        self.jitters = tuple(jitters)


@dataclass(frozen=True)
class KernelConfig:
    lengthscale: float = 0.2
    signal_variance: float = 1.0
    noise_variance: float = 1e-4

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if not self.noise_variance >= 0:
            raise ValueError(f"noise_variance must be non-negative, got {self.noise_variance}")

    def to_dict(self) -> dict:
        return {
            "lengthscale": self.lengthscale,
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }


@dataclass(frozen=True)
class Observation:
    point: ReducedPoint
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"observation value must be finite, got {self.value}")


class Dataset:
    """Ordered observations with unique points.

    Re-adding a point overwrites its value in place, so the latest value wins
    and first-seen order is kept.
    """

    def __init__(self, observations: Iterable[Observation] = ()):
        self._index: dict[ReducedPoint, int] = {}
        self._obs: list[Observation] = []
        for ob in observations:
            self.add(ob.point, ob.value)

    def add(self, point: Sequence[int], value: float) -> None:
        point = tuple(int(c) for c in point)
        ob = Observation(point, float(value))
        if point in self._index:
            self._obs[self._index[point]] = ob
        else:
            self._index[point] = len(self._obs)
            self._obs.append(ob)

    def __len__(self) -> int:
        return len(self._obs)

    def __iter__(self):
        return iter(self._obs)

    def __contains__(self, point) -> bool:
        return tuple(point) in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self._obs == other._obs

    @property
    def observations(self) -> list[Observation]:
        return list(self._obs)

    def points(self) -> np.ndarray:
        return np.array([ob.point for ob in self._obs], dtype=float)

    def values(self) -> np.ndarray:
        return np.array([ob.value for ob in self._obs], dtype=float)


@dataclass(frozen=True)
class Posterior:
    mean: float
    stddev: float


@dataclass(frozen=True)
class GpModel:
    kernel: KernelConfig
    train_inputs: np.ndarray
    train_targets: np.ndarray
    target_mean: float
    factor: np.ndarray
    solve_cache: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return len(self.train_targets)

    def summary(self) -> dict:
        return {**self.kernel.to_dict(), "n": self.n, "jitter": self.jitter,
                "log_marginal_likelihood": log_marginal_likelihood(self)}


def normalize(space: ParameterSpace, p) -> np.ndarray:
    """Affine map of lattice coordinates onto [0, 1]; works on one point or a batch."""
    x = np.asarray(p, dtype=float)
    return (x - space.lower) / (space.upper - space.lower)


def sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d2, 0.0)


def kernel_matrix(k: KernelConfig, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return k.signal_variance * np.exp(-sq_distances(a, b) / (2.0 * k.lengthscale**2))


def kernel_eval(k: KernelConfig, u: Sequence[float], w: Sequence[float]) -> float:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != w.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {w.shape}")
    d2 = float(((u - w) ** 2).sum())
    return k.signal_variance * math.exp(-d2 / (2.0 * k.lengthscale**2))


def _cholesky(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    tried = []
    n = len(matrix)
    for jitter in JITTER_LEVELS:
        tried.append(jitter)
        try:
            return np.linalg.cholesky(matrix + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            continue
    raise GpFitError(f"covariance not positive definite after jitter {tried[1:]}", tried[1:])


def fit(dataset: Dataset, kernel: KernelConfig, space: ParameterSpace) -> GpModel:
    if len(dataset) == 0:
        raise ValueError("cannot fit a GP to an empty dataset")
    x = normalize(space, dataset.points())
    if x.min() < 0 or x.max() > 1:
        raise ValueError("training point outside the lattice bounds")
    y = dataset.values()
    y_mean = float(y.mean())
    yc = y - y_mean
    cov = kernel_matrix(kernel, x, x) + kernel.noise_variance * np.eye(len(y))
    factor, jitter = _cholesky(cov)
    alpha = cho_solve((factor, True), yc)
    return GpModel(kernel, x, yc, y_mean, factor, alpha, jitter)


def predict_normalized(model: GpModel, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and stddev at already-normalized query rows."""
    xq = np.atleast_2d(xq)
    ks = kernel_matrix(model.kernel, model.train_inputs, xq)
    mean = model.target_mean + ks.T @ model.solve_cache
    v = solve_triangular(model.factor, ks, lower=True)
    var = model.kernel.signal_variance - (v * v).sum(0)
    return mean, np.sqrt(np.maximum(var, 0.0))


def predict_batch(model: GpModel, space: ParameterSpace, points) -> tuple[np.ndarray, np.ndarray]:
    return predict_normalized(model, normalize(space, np.atleast_2d(points)))


def predict(model: GpModel, space: ParameterSpace, p: ReducedPoint) -> Posterior:
    mean, sd = predict_batch(model, space, [p])
    return Posterior(float(mean[0]), float(sd[0]))


def log_marginal_likelihood(model: GpModel) -> float:
    n = model.n
    return float(
        -0.5 * model.train_targets @ model.solve_cache
        - np.log(np.diag(model.factor)).sum()
        - 0.5 * n * math.log(2 * math.pi)
    )


def select_hyperparameters(dataset: Dataset, space: ParameterSpace, grid: Sequence[KernelConfig]) -> KernelConfig:
    """ML-II over a fixed grid; the earliest entry wins ties."""
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    best, best_ll = grid[0], -math.inf
    for k in grid:
        try:
            ll = log_marginal_likelihood(fit(dataset, k, space))
        except GpFitError:
            continue
        if ll > best_ll:
            best, best_ll = k, ll
    return best


def kernel_grid(lengthscales: Iterable[float], signal_variances: Iterable[float], noise_variance: float) -> list[KernelConfig]:
    return [KernelConfig(ls, sv, noise_variance) for ls in lengthscales for sv in signal_variances]
