"""Campaign configuration files (YAML).

Top-level sections, all optional except ``loop.target``::

    space:          {preset: nikola} | {file: path} | inline lower/upper/groups/constraints
    kernel:         lengthscale, signal_variance, noise_variance
    hyperparameters: enabled, interval, lengthscales, signal_variances
    acquisition:    beta, n_candidates, n_local_steps, local_step_sizes, sign
    loop:           target, rounds, n_init, seed, on_eval_failure, initial_points
    evaluator:      backend (simulator | external | quadratic) plus backend options

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

from .acquisition import AcquisitionConfig
from .evaluators import Evaluator, ExternalEvaluator, QuadraticBowl
from .facesim import DEFAULT_TEMPERATURE, FaceSimulator
from .gp import KernelConfig
from .loop import HyperparameterConfig, LoopConfig
from .space import ParameterSpace, SpaceError

SECTIONS = {"space", "kernel", "hyperparameters", "acquisition", "loop", "evaluator"}
LOOP_KEYS = {"target", "rounds", "n_init", "seed", "on_eval_failure", "initial_points"}
EVALUATOR_KEYS = {
    "simulator": {"backend", "temperature"},
    "external": {"backend", "endpoint", "timeout", "retries", "backoff"},
    "quadratic": {"backend", "optimum"},
}
BUNDLED = {"nikola": "nikola_space.yaml"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    space: ParameterSpace
    loop: LoopConfig
    evaluator: Mapping = field(default_factory=lambda: {"backend": "simulator"})

    def build_evaluator(self) -> Evaluator:
        return build_evaluator(self.evaluator, self.space)

    def with_loop(self, **changes) -> "CampaignConfig":
        return replace(self, loop=replace(self.loop, **changes))


def _only(section: str, data: Mapping, allowed: set) -> dict:
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {section!r} must be a mapping")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return dict(data)


def load_space_section(data: Mapping | None, base: Path) -> ParameterSpace:
    data = dict(data or {"preset": "nikola"})
    try:
        if "preset" in data:
            _only("space", data, {"preset"})
            name = data["preset"]
            if name not in BUNDLED:
                raise ConfigError(f"unknown space preset {name!r}")
            text = resources.files("faceopt.data").joinpath(BUNDLED[name]).read_text()
            return ParameterSpace.from_dict(yaml.safe_load(text))
        if "file" in data:
            _only("space", data, {"file"})
            return ParameterSpace.load(base / data["file"])
        return ParameterSpace.from_dict(data)
    except (SpaceError, OSError) as exc:
        raise ConfigError(f"space: {exc}") from None


def build_evaluator(spec: Mapping, space: ParameterSpace) -> Evaluator:
    backend = spec.get("backend", "simulator")
    if backend not in EVALUATOR_KEYS:
        raise ConfigError(f"unknown evaluator backend {backend!r}")
    _only("evaluator", spec, EVALUATOR_KEYS[backend])
    if backend == "simulator":
        return FaceSimulator(space, temperature=float(spec.get("temperature", DEFAULT_TEMPERATURE)))
    if backend == "external":
        if "endpoint" not in spec:
            raise ConfigError("external evaluator needs an 'endpoint'")
        return ExternalEvaluator(
            spec["endpoint"],
            timeout=float(spec.get("timeout", 30.0)),
            retries=int(spec.get("retries", 2)),
            backoff=float(spec.get("backoff", 0.5)),
        )
    optimum = spec.get("optimum")
    if optimum is None or len(optimum) != space.dim:
        raise ConfigError(f"quadratic evaluator needs an 'optimum' with {space.dim} coordinates")
    return QuadraticBowl(optimum, [g.members[0] for g in space.groups], space.lower, space.upper)


def parse_config(data: Mapping, base: Path = Path(".")) -> CampaignConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    space = load_space_section(data.get("space"), base)
    try:
        kernel = KernelConfig(**_only("kernel", data.get("kernel"), {"lengthscale", "signal_variance", "noise_variance"}))
        hp = HyperparameterConfig(
            **_only("hyperparameters", data.get("hyperparameters"), {"enabled", "interval", "lengthscales", "signal_variances"})
        )
        acq = _only("acquisition", data.get("acquisition"),
                    {"beta", "n_candidates", "n_local_steps", "local_step_sizes", "sign"})
        if "local_step_sizes" in acq:
            acq["local_step_sizes"] = tuple(acq["local_step_sizes"])
        acquisition = AcquisitionConfig(**acq)
        loop = _only("loop", data.get("loop"), LOOP_KEYS)
        if "target" not in loop:
            raise ConfigError("loop.target is required")
        loop_cfg = LoopConfig(kernel=kernel, acquisition=acquisition, hyperparameters=hp, **loop)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    for i, p in enumerate(loop_cfg.initial_points):
        if len(p) != space.dim:
            raise ConfigError(f"initial point {i} has {len(p)} coordinates, space has {space.dim}")
    evaluator = dict(data.get("evaluator") or {"backend": "simulator"})
    cfg = CampaignConfig(space, loop_cfg, evaluator)
    try:
        cfg.build_evaluator()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"evaluator: {exc}") from None
    return cfg


def load_config(path: str | Path) -> CampaignConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(data, path.parent)


def bundled_config(name: str) -> CampaignConfig:
    """Load one of the configs shipped in ``faceopt/data`` (e.g. ``campaign_sim``)."""
    text = resources.files("faceopt.data").joinpath(f"{name}.yaml").read_text()
    return parse_config(yaml.safe_load(text))
