"""Experiment schedule: which strategy resolves each parameter of each planned set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .space import SearchSpace, Value

EXPLICIT = "explicit"
RANDOM = "random"
BAYES = "bayes"


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class StrategyTag:
    kind: str
    value: Value | None = None

    def __post_init__(self) -> None:
        if self.kind not in (EXPLICIT, RANDOM, BAYES):
            raise PlanError(f"unknown strategy {self.kind!r}")
        if self.kind != EXPLICIT and self.value is not None:
            raise PlanError(f"{self.kind} tag carries no value")


RANDOM_TAG = StrategyTag(RANDOM)
BAYES_TAG = StrategyTag(BAYES)


@dataclass(frozen=True)
class PlanEntry:
    set_index: int
    assignments: Mapping[str, StrategyTag]

    @property
    def bayes_names(self) -> tuple[str, ...]:
        return tuple(n for n, t in self.assignments.items() if t.kind == BAYES)

    @property
    def has_bayes(self) -> bool:
        return any(t.kind == BAYES for t in self.assignments.values())


@dataclass(frozen=True)
class SearchPlan:
    entries: tuple[PlanEntry, ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise PlanError("a plan needs at least one entry")
        for i, e in enumerate(self.entries):
            if e.set_index != i:
                raise PlanError(f"entry {i} has set_index {e.set_index}; indices must be contiguous from 0")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> PlanEntry:
        return self.entries[i]


def build_plan(
    space: SearchSpace,
    explicit_rows: Sequence[Mapping[str, Value]] = (),
    n_random: int = 0,
    n_bayes: int = 0,
    bayes_params: Sequence[str] | None = None,
) -> SearchPlan:
    """Materialize the full schedule.

    Order is: explicit rows (unspecified parameters fall back to random),
    then ``n_random`` all-random sets, then ``n_bayes`` sets that search
    ``bayes_params`` by Bayesian optimization and draw everything else at
    random. ``bayes_params=None`` means every bayes-eligible parameter.
    """
    if n_random < 0 or n_bayes < 0:
        raise PlanError("set counts must be >= 0")
    if bayes_params is None:
        bayes_params = space.bayes_names
    bayes_params = tuple(bayes_params)
    for name in bayes_params:
        if name not in space:
            raise PlanError(f"bayes parameter {name!r} is not in the space")
        if not space[name].bayes_eligible:
            raise PlanError(f"parameter {name!r} is not bayes-eligible (only continuous parameters are)")
    if n_bayes > 0 and not bayes_params:
        raise PlanError("bayes sets requested but no bayes parameters available")

    entries: list[PlanEntry] = []
    for row in explicit_rows:
        assignments = {}
        for name in row:
            if name not in space:
                raise PlanError(f"explicit row names unknown parameter {name!r}")
        for spec in space:
            if spec.name in row:
                value = row[spec.name]
                if not spec.contains(value):
                    raise PlanError(f"explicit value {value!r} for {spec.name!r} is outside its domain")
                if spec.kind == "continuous":
                    value = float(value)
                elif spec.kind == "discrete":
                    value = spec.values[spec.values.index(value)]
                assignments[spec.name] = StrategyTag(EXPLICIT, value)
            else:
                assignments[spec.name] = RANDOM_TAG
        entries.append(PlanEntry(len(entries), assignments))

    for _ in range(n_random):
        entries.append(PlanEntry(len(entries), {n: RANDOM_TAG for n in space.names}))

    for _ in range(n_bayes):
        assignments = {n: (BAYES_TAG if n in bayes_params else RANDOM_TAG) for n in space.names}
        entries.append(PlanEntry(len(entries), assignments))

    if not entries:
        raise PlanError("empty plan: no explicit rows, random or bayes sets")
    return SearchPlan(tuple(entries))
