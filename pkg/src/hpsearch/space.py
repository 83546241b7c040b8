"""Parameter search space: declaration, random sampling and unit-cube normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

Value = Union[float, int, str]

KINDS = ("continuous", "discrete", "categorical", "opaque")


class SpaceError(ValueError):
    """Raised for invalid parameter declarations or parameter sets."""


@dataclass(frozen=True)
class ParameterSpec:
    """A single declared hyperparameter.

    ``continuous`` parameters live on ``[low, high]``; every other kind draws
    from the finite ``values`` tuple. ``opaque`` values are literal strings
    forwarded verbatim to the target and never interpreted numerically.
    Only continuous parameters may be searched by Bayesian optimization.
    """

    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    values: tuple[Value, ...] = ()
    bayes_eligible: bool | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name.isidentifier():
            raise SpaceError(f"parameter name {self.name!r} is not an identifier")
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")

        if self.kind == "continuous":
            if self.low is None or self.high is None:
                raise SpaceError(f"{self.name}: continuous parameter needs low and high")
            lo, hi = float(self.low), float(self.high)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise SpaceError(f"{self.name}: bounds must be finite")
            if lo >= hi:
                raise SpaceError(f"{self.name}: low ({lo}) must be < high ({hi})")
            object.__setattr__(self, "low", lo)
            object.__setattr__(self, "high", hi)
            if self.values:
                raise SpaceError(f"{self.name}: continuous parameter takes no value set")
            if self.bayes_eligible is None:
                object.__setattr__(self, "bayes_eligible", True)
            return

        if self.low is not None or self.high is not None:
            raise SpaceError(f"{self.name}: bounds only apply to continuous parameters")
        values = tuple(self.values)
        if not values:
            raise SpaceError(f"{self.name}: empty value set")
        if self.kind == "discrete":
            for v in values:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SpaceError(f"{self.name}: discrete values must be numbers, got {v!r}")
                if not math.isfinite(v):
                    raise SpaceError(f"{self.name}: discrete values must be finite")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise SpaceError(f"{self.name}: discrete values must be strictly increasing")
        else:
            if not all(isinstance(v, str) for v in values):
                raise SpaceError(f"{self.name}: {self.kind} values must be strings")
            if len(set(values)) != len(values):
                raise SpaceError(f"{self.name}: duplicate {self.kind} value")
        object.__setattr__(self, "values", values)
        if self.bayes_eligible:
            raise SpaceError(f"{self.name}: only continuous parameters can be bayes-eligible")
        object.__setattr__(self, "bayes_eligible", False)

    @property
    def is_numeric(self) -> bool:
        return self.kind in ("continuous", "discrete")

    def contains(self, value: Value) -> bool:
        if self.kind == "continuous":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return False
            return self.low <= value <= self.high
        if self.kind == "discrete":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return False
        elif not isinstance(value, str):
            return False
        return value in self.values

    def sample(self, rng: np.random.Generator) -> Value:
        if self.kind == "continuous":
            return float(rng.uniform(self.low, self.high))
        return self.values[int(rng.integers(len(self.values)))]

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "continuous":
            out["low"] = self.low
            out["high"] = self.high
            if not self.bayes_eligible:
                out["bayes"] = False
        else:
            out["values"] = list(self.values)
        return out


def continuous(name: str, low: float, high: float, *, bayes: bool = True) -> ParameterSpec:
    return ParameterSpec(name, "continuous", low=low, high=high, bayes_eligible=bayes)


def discrete(name: str, values: Iterable[float]) -> ParameterSpec:
    return ParameterSpec(name, "discrete", values=tuple(values))


def categorical(name: str, values: Iterable[str]) -> ParameterSpec:
    return ParameterSpec(name, "categorical", values=tuple(values))


def opaque(name: str, values: Iterable[str]) -> ParameterSpec:
    return ParameterSpec(name, "opaque", values=tuple(values))


@dataclass(frozen=True)
class ParameterSet:
    """Resolved value for every parameter of a space, in native units."""

    values: Mapping[str, Value]

    def __getitem__(self, name: str) -> Value:
        return self.values[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[str, Value]:
        return dict(self.values)


@dataclass(frozen=True)
class SearchSpace:
    specs: tuple[ParameterSpec, ...]
    _by_name: dict[str, ParameterSpec] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        specs = tuple(self.specs)
        if not specs:
            raise SpaceError("a search space needs at least one parameter")
        by_name: dict[str, ParameterSpec] = {}
        for spec in specs:
            if not isinstance(spec, ParameterSpec):
                raise SpaceError(f"expected ParameterSpec, got {type(spec).__name__}")
            if spec.name in by_name:
                raise SpaceError(f"duplicate parameter name {spec.name!r}")
            by_name[spec.name] = spec
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "_by_name", by_name)

    def __getitem__(self, name: str) -> ParameterSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise SpaceError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[ParameterSpec]:
        return iter(self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    @property
    def bayes_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs if s.bayes_eligible)

    @property
    def continuous_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs if s.kind == "continuous")

    def validate(self, pset: ParameterSet | Mapping[str, Value]) -> ParameterSet:
        """Check a full assignment against the space and return it as a ParameterSet."""
        values = pset.values if isinstance(pset, ParameterSet) else pset
        missing = [n for n in self.names if n not in values]
        extra = [n for n in values if n not in self._by_name]
        if missing or extra:
            raise SpaceError(f"parameter set mismatch: missing={missing} unknown={extra}")
        for spec in self.specs:
            if not spec.contains(values[spec.name]):
                raise SpaceError(f"{spec.name}: value {values[spec.name]!r} outside its domain")
        if isinstance(pset, ParameterSet):
            return pset
        return ParameterSet({n: values[n] for n in self.names})

    def to_dict(self) -> dict:
        return {s.name: s.to_dict() for s in self.specs}


def define_space(specs: Sequence[ParameterSpec]) -> SearchSpace:
    return SearchSpace(tuple(specs))


def sample_random(space: SearchSpace, rng: np.random.Generator) -> ParameterSet:
    """Draw one value per parameter, in declaration order."""
    return ParameterSet({spec.name: spec.sample(rng) for spec in space.specs})


def _resolve_names(space: SearchSpace, names: Sequence[str] | None) -> tuple[str, ...]:
    if names is None:
        names = space.bayes_names
    names = tuple(names)
    if not names:
        raise SpaceError("no bayes-eligible parameters to normalize")
    for n in names:
        if not space[n].bayes_eligible:
            raise SpaceError(f"{n}: parameter is not bayes-eligible")
    # keep declaration order regardless of the caller's ordering
    return tuple(n for n in space.names if n in names)


def normalize(
    space: SearchSpace,
    pset: ParameterSet | Mapping[str, Value],
    names: Sequence[str] | None = None,
) -> np.ndarray:
    """Map the bayes-eligible values of ``pset`` onto the unit cube.

    ``names`` restricts the output to a subset of bayes-eligible parameters;
    the output always follows declaration order.
    """
    names = _resolve_names(space, names)
    out = np.empty(len(names))
    for i, n in enumerate(names):
        spec = space[n]
        out[i] = (float(pset[n]) - spec.low) / (spec.high - spec.low)
    return out


def denormalize(
    space: SearchSpace, unit: Sequence[float], names: Sequence[str] | None = None
) -> dict[str, float]:
    """Inverse of :func:`normalize`; results are clipped onto the declared bounds."""
    names = _resolve_names(space, names)
    unit = np.asarray(unit, dtype=float)
    if unit.shape != (len(names),):
        raise SpaceError(f"expected a vector of length {len(names)}, got shape {unit.shape}")
    out = {}
    for n, u in zip(names, unit):
        spec = space[n]
        v = spec.low + float(u) * (spec.high - spec.low)
        out[n] = min(max(v, spec.low), spec.high)
    return out
