"""Constrained integer actuator lattice and its symmetry-reduced coordinates.

A :class:`ParameterSpace` ties mirror-image actuators into symmetry groups so
that a search point (a :data:`ReducedPoint`) carries one integer per group.
``expand`` turns a reduced point into a full actuator command vector and
``reduce`` inverts it. Antagonist constraints cap the summed command of two
actuators that pull the same tissue in opposite directions; ``project``
repairs points that break them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

ActuatorVector = dict[int, int]
ReducedPoint = tuple[int, ...]

SeedLike = int | np.random.Generator | np.random.SeedSequence | None

_SPACE_KEYS = {"lower", "upper", "groups", "constraints"}
_CONSTRAINT_KEYS = {"first", "second", "cap"}


class SpaceError(ValueError):
    """Raised for malformed spaces or points that cannot be mapped."""


class DimensionError(SpaceError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected {expected} coordinates, got {actual}")
        self.expected = expected
        self.actual = actual


class BoundsError(SpaceError):
    def __init__(self, index: int, value, lower: int, upper: int):
        super().__init__(f"coordinate {index} = {value!r} outside [{lower}, {upper}]")
        self.index = index


class SymmetryError(SpaceError):
    def __init__(self, group: tuple[int, ...], values: Mapping[int, int]):
        shown = ", ".join(f"{a}={values[a]}" for a in group)
        super().__init__(f"symmetry group {list(group)} disagrees: {shown}")
        self.group = group


class ConstraintError(SpaceError):
    def __init__(self, violations: list["Violation"]):
        super().__init__("; ".join(v.message for v in violations))
        self.violations = violations


@dataclass(frozen=True)
class SymmetryGroup:
    members: tuple[int, ...]

    def __post_init__(self):
        if not self.members:
            raise SpaceError("symmetry group must not be empty")
        object.__setattr__(self, "members", tuple(sorted(int(m) for m in self.members)))


@dataclass(frozen=True)
class AntagonistConstraint:
    first: int
    second: int
    cap: int

    def __post_init__(self):
        if self.first == self.second:
            raise SpaceError(f"antagonist constraint pairs actuator {self.first} with itself")
        if not 0 <= self.cap <= 510:
            raise SpaceError(f"antagonist cap {self.cap} outside [0, 510]")


@dataclass(frozen=True)
class Violation:
    kind: str  # "bounds" | "symmetry" | "constraint" | "keys"
    actuators: tuple[int, ...]
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ParameterSpace:
    """Immutable lattice definition.

    Groups are stored sorted by their smallest actuator id; that order is
    the coordinate order of every :data:`ReducedPoint`.
    """

    groups: tuple[SymmetryGroup, ...]
    constraints: tuple[AntagonistConstraint, ...] = ()
    lower: int = 0
    upper: int = 255

    def __post_init__(self):
        groups = tuple(g if isinstance(g, SymmetryGroup) else SymmetryGroup(tuple(g)) for g in self.groups)
        groups = tuple(sorted(groups, key=lambda g: g.members[0]))
        object.__setattr__(self, "groups", groups)
        object.__setattr__(
            self,
            "constraints",
            tuple(c if isinstance(c, AntagonistConstraint) else AntagonistConstraint(**c) for c in self.constraints),
        )
        if not groups:
            raise SpaceError("space needs at least one symmetry group")
        if not 0 <= self.lower < self.upper:
            raise SpaceError(f"bad bounds [{self.lower}, {self.upper}]")
        seen: dict[int, int] = {}
        for gi, g in enumerate(groups):
            for a in g.members:
                if a in seen:
                    raise SpaceError(f"actuator {a} appears in more than one group")
                seen[a] = gi
        object.__setattr__(self, "_group_of", seen)
        for c in self.constraints:
            for a in (c.first, c.second):
                if a not in seen:
                    raise SpaceError(f"constraint references inactive actuator {a}")
            if c.cap < 2 * self.lower:
                raise SpaceError(f"cap {c.cap} unreachable with lower bound {self.lower}")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping) -> "ParameterSpace":
        unknown = set(data) - _SPACE_KEYS
        if unknown:
            raise SpaceError(f"unknown space keys: {sorted(unknown)}")
        if "groups" not in data:
            raise SpaceError("space definition needs 'groups'")
        constraints = []
        for c in data.get("constraints") or []:
            extra = set(c) - _CONSTRAINT_KEYS
            if extra:
                raise SpaceError(f"unknown constraint keys: {sorted(extra)}")
            constraints.append(AntagonistConstraint(int(c["first"]), int(c["second"]), int(c["cap"])))
        return cls(
            groups=tuple(SymmetryGroup(tuple(int(a) for a in g)) for g in data["groups"]),
            constraints=tuple(constraints),
            lower=int(data.get("lower", 0)),
            upper=int(data.get("upper", 255)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ParameterSpace":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise SpaceError(f"{path}: space file must hold a mapping")
        return cls.from_dict(data)

    @classmethod
    def default(cls) -> "ParameterSpace":
        """The bundled 14-group, 24-actuator space."""
        text = resources.files("faceopt.data").joinpath("nikola_space.yaml").read_text()
        return cls.from_dict(yaml.safe_load(text))

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "groups": [list(g.members) for g in self.groups],
            "constraints": [{"first": c.first, "second": c.second, "cap": c.cap} for c in self.constraints],
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- shape ---------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.groups)

    @property
    def actuators(self) -> tuple[int, ...]:
        return tuple(sorted(self._group_of))

    def group_index(self, actuator: int) -> int:
        return self._group_of[actuator]

    @property
    def lattice_size(self) -> int:
        return (self.upper - self.lower + 1) ** self.dim

    def _constraint_columns(self) -> list[tuple[int, int, int]]:
        return [(self._group_of[c.first], self._group_of[c.second], c.cap) for c in self.constraints]

    # -- mapping -------------------------------------------------------------

    def _check_point(self, p: Sequence) -> None:
        if len(p) != self.dim:
            raise DimensionError(self.dim, len(p))
        for i, v in enumerate(p):
            if int(v) != v or not self.lower <= v <= self.upper:
                raise BoundsError(i, v, self.lower, self.upper)

    def expand(self, p: Sequence[int]) -> ActuatorVector:
        self._check_point(p)
        vector = {a: int(p[gi]) for gi, g in enumerate(self.groups) for a in g.members}
        broken = self._constraint_violations(vector)
        if broken:
            raise ConstraintError(broken)
        return dict(sorted(vector.items()))

    def reduce(self, v: Mapping[int, int]) -> ReducedPoint:
        keys = set(v)
        if keys != set(self._group_of):
            raise SpaceError(
                f"actuator set mismatch: missing {sorted(set(self._group_of) - keys)}, "
                f"unexpected {sorted(keys - set(self._group_of))}"
            )
        coords = []
        for gi, g in enumerate(self.groups):
            values = {v[a] for a in g.members}
            if len(values) != 1:
                raise SymmetryError(g.members, v)
            value = values.pop()
            if int(value) != value or not self.lower <= value <= self.upper:
                raise BoundsError(gi, value, self.lower, self.upper)
            coords.append(int(value))
        return tuple(coords)

    def _constraint_violations(self, v: Mapping[int, int]) -> list[Violation]:
        out = []
        for c in self.constraints:
            total = v[c.first] + v[c.second]
            if total > c.cap:
                out.append(
                    Violation(
                        "constraint",
                        (c.first, c.second),
                        f"actuators {c.first}+{c.second} = {v[c.first]}+{v[c.second]} = {total} > cap {c.cap}",
                    )
                )
        return out

    def validate(self, v: Mapping[int, int]) -> ValidationReport:
        report = ValidationReport()
        active = set(self._group_of)
        missing, extra = active - set(v), set(v) - active
        if missing or extra:
            report.violations.append(
                Violation("keys", tuple(sorted(missing | extra)), f"missing {sorted(missing)}, unexpected {sorted(extra)}")
            )
        for a in sorted(set(v) & active):
            value = v[a]
            if int(value) != value or not self.lower <= value <= self.upper:
                report.violations.append(
                    Violation("bounds", (a,), f"actuator {a} = {value!r} outside [{self.lower}, {self.upper}]")
                )
        for g in self.groups:
            present = [a for a in g.members if a in v]
            if len({v[a] for a in present}) > 1:
                shown = ", ".join(f"{a}={v[a]}" for a in present)
                report.violations.append(Violation("symmetry", g.members, f"group {list(g.members)} disagrees: {shown}"))
        if not missing:
            report.violations.extend(self._constraint_violations(v))
        return report

    # -- repair and sampling --------------------------------------------------

    def project_array(self, points: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`project` over the rows of ``points``."""
        x = np.clip(np.rint(np.asarray(points, dtype=float)), self.lower, self.upper).astype(np.int64)
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise DimensionError(self.dim, x.shape[1])
        for i, j, cap in self._constraint_columns():
            a, b = x[:, i], x[:, j]
            total = a + b
            bad = total > cap
            if not bad.any():
                continue
            # integer floor of value * cap / total; exact, no float rounding
            new_a = np.where(bad, (a * cap) // np.maximum(total, 1), a)
            new_b = np.where(bad, (b * cap) // np.maximum(total, 1), b)
            x[:, i] = np.maximum(new_a, self.lower)
            x[:, j] = np.maximum(new_b, self.lower)
        return x

    def project(self, p: Sequence[float]) -> ReducedPoint:
        if len(p) != self.dim:
            raise DimensionError(self.dim, len(p))
        return tuple(int(c) for c in self.project_array(np.asarray(p, dtype=float)[None, :])[0])

    def sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raw = rng.integers(self.lower, self.upper + 1, size=(n, self.dim))
        return self.project_array(raw)

    def sample_uniform(self, rng_seed: SeedLike) -> ReducedPoint:
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        return tuple(int(c) for c in self.sample_batch(rng, 1)[0])

    def enumerate_lattice(self) -> np.ndarray:
        """Every constraint-satisfying lattice point in lexicographic order."""
        axes = [np.arange(self.lower, self.upper + 1)] * self.dim
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        keep = np.ones(len(grid), dtype=bool)
        for i, j, cap in self._constraint_columns():
            keep &= grid[:, i] + grid[:, j] <= cap
        return grid[keep]

    def is_valid_point(self, p: Sequence[int]) -> bool:
        try:
            self.expand(p)
        except SpaceError:
            return False
        return True


def grouped(members: Iterable[Iterable[int]], **kwargs) -> ParameterSpace:
    """Shorthand for building a space from plain lists of actuator ids."""
    return ParameterSpace(groups=tuple(SymmetryGroup(tuple(m)) for m in members), **kwargs)
