"""Experiment configuration: strict TOML schema, also readable from ``experiment.json``.

Schema (every key outside this list is rejected)::

    seed = 7                  # required
    workers = 4               # default 1
    repetitions = 1           # default 1
    backend = "pool"          # "pool" or "serial"
    output = "runs/griewank"  # optional, relative to the working directory

    [space.<name>]
    kind = "continuous"       # continuous | discrete | categorical | opaque
    low = -5.0                # continuous only
    high = 5.0                # continuous only
    bayes = true              # continuous only, default true
    values = [16, 32, 64]     # the other kinds

    [plan]
    explicit = [{x = 0.0}]    # partial rows; missing parameters are random
    n_random = 15
    n_bayes = 15
    bayes_params = ["x", "y"] # default: all bayes-eligible parameters

    [acquisition]
    xi = 0.01                 # default max(0.01*|best|, 1e-4)
    n_candidates = 2000
    pending_radius = 0.02
    min_init = 3

    [target]
    kind = "builtin"          # or "subprocess"
    name = "griewank"         # builtin only
    sleep = 0.0               # builtin sleep_then_quadratic only
    command = ["python", "train.py"]   # subprocess only
    args = []                 # subprocess only, "{name}" fields substituted
    env = {}                  # subprocess only, extra environment
    timeout = 600.0           # seconds, optional
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .acquisition import AcquisitionConfig
from .plan import PlanError, SearchPlan, build_plan
from .space import ParameterSpec, SearchSpace, SpaceError, Value
from .targets import TargetSpec

BACKENDS = ("pool", "serial")
SIDECAR_ONLY_KEYS = ("schema_version", "completed", "summary")


class ConfigError(ValueError):
    def __init__(self, key: str | None, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    space: SearchSpace
    target: TargetSpec
    seed: int
    n_random: int = 0
    n_bayes: int = 0
    explicit: tuple[Mapping[str, Value], ...] = ()
    bayes_params: tuple[str, ...] | None = None
    workers: int = 1
    repetitions: int = 1
    backend: str = "pool"
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    min_init: int = 3
    output: str | None = None

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions", "must be >= 1")
        if self.backend not in BACKENDS:
            raise ConfigError("backend", f"must be one of {BACKENDS}")
        if self.min_init < 1:
            raise ConfigError("acquisition.min_init", "must be >= 1")

    def build_plan(self) -> SearchPlan:
        return build_plan(self.space, self.explicit, self.n_random, self.n_bayes, self.bayes_params)

    def with_overrides(self, **changes: Any) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        plan: dict = {"n_random": self.n_random, "n_bayes": self.n_bayes}
        if self.explicit:
            plan["explicit"] = [dict(row) for row in self.explicit]
        if self.bayes_params is not None:
            plan["bayes_params"] = list(self.bayes_params)
        acq = self.acquisition.to_dict()
        acq["min_init"] = self.min_init
        out = {
            "seed": self.seed,
            "workers": self.workers,
            "repetitions": self.repetitions,
            "backend": self.backend,
            "space": self.space.to_dict(),
            "plan": plan,
            "acquisition": acq,
            "target": self.target.to_dict(),
        }
        if self.output is not None:
            out["output"] = self.output
        return out


# -- validation helpers -------------------------------------------------------


def _check_keys(d: Mapping, allowed: tuple[str, ...], path: str) -> None:
    if not isinstance(d, Mapping):
        raise ConfigError(path or None, "expected a table")
    for k in d:
        if k not in allowed:
            key = f"{path}.{k}" if path else k
            raise ConfigError(key, f"unknown key (allowed: {', '.join(allowed)})")


def _int(d: Mapping, key: str, path: str, default=None, required=False) -> int:
    full = f"{path}.{key}" if path else key
    if key not in d:
        if required:
            raise ConfigError(full, "required key is missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(full, f"expected an integer, got {v!r}")
    return v


def _float(d: Mapping, key: str, path: str, default=None) -> float | None:
    full = f"{path}.{key}" if path else key
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(full, f"expected a finite number, got {v!r}")
    return float(v)


def _str_list(d: Mapping, key: str, path: str, default=None) -> tuple[str, ...] | None:
    full = f"{path}.{key}" if path else key
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise ConfigError(full, f"expected a list of strings, got {v!r}")
    return tuple(v)


def space_from_dict(d: Mapping, path: str = "space") -> SearchSpace:
    if not isinstance(d, Mapping) or not d:
        raise ConfigError(path, "at least one parameter must be declared")
    specs = []
    for name, body in d.items():
        p = f"{path}.{name}"
        _check_keys(body, ("kind", "low", "high", "bayes", "values"), p)
        kind = body.get("kind")
        if kind is None:
            raise ConfigError(f"{p}.kind", "required key is missing")
        bayes = body.get("bayes")
        if bayes is not None and not isinstance(bayes, bool):
            raise ConfigError(f"{p}.bayes", "expected true or false")
        values = body.get("values", [])
        if not isinstance(values, list):
            raise ConfigError(f"{p}.values", "expected a list")
        try:
            specs.append(
                ParameterSpec(
                    name,
                    kind,
                    low=_float(body, "low", p),
                    high=_float(body, "high", p),
                    values=tuple(values),
                    bayes_eligible=bayes,
                )
            )
        except SpaceError as exc:
            raise ConfigError(p, str(exc)) from None
    return SearchSpace(tuple(specs))


def target_from_dict(d: Mapping, path: str = "target") -> TargetSpec:
    _check_keys(d, ("kind", "name", "sleep", "command", "args", "env", "timeout"), path)
    kind = d.get("kind")
    if kind is None:
        raise ConfigError(f"{path}.kind", "required key is missing")
    env = d.get("env", {})
    if not isinstance(env, Mapping) or not all(isinstance(v, str) for v in env.values()):
        raise ConfigError(f"{path}.env", "expected a table of strings")
    try:
        return TargetSpec(
            kind=kind,
            name=d.get("name"),
            command=_str_list(d, "command", path, ()),
            args=_str_list(d, "args", path, ()),
            timeout=_float(d, "timeout", path),
            sleep=_float(d, "sleep", path, 0.0),
            env=dict(env),
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def config_from_dict(d: Mapping) -> ExperimentConfig:
    _check_keys(
        d,
        ("seed", "workers", "repetitions", "backend", "output", "space", "plan", "acquisition", "target"),
        "",
    )
    seed = _int(d, "seed", "")
    if seed is None:
        raise ConfigError("seed", "an explicit integer seed is required for reproducibility")
    if "space" not in d:
        raise ConfigError("space", "required table is missing")
    space = space_from_dict(d["space"])
    if "target" not in d:
        raise ConfigError("target", "required table is missing")
    target = target_from_dict(d["target"])

    plan = d.get("plan", {})
    _check_keys(plan, ("explicit", "n_random", "n_bayes", "bayes_params"), "plan")
    explicit = plan.get("explicit", [])
    if not isinstance(explicit, list) or not all(isinstance(r, Mapping) for r in explicit):
        raise ConfigError("plan.explicit", "expected a list of tables")
    for i, row in enumerate(explicit):
        for k in row:
            if k not in space:
                raise ConfigError(f"plan.explicit[{i}].{k}", "not a declared parameter")
    bayes_params = _str_list(plan, "bayes_params", "plan")
    if bayes_params is not None:
        for name in bayes_params:
            if name not in space:
                raise ConfigError("plan.bayes_params", f"{name!r} is not a declared parameter")
            if not space[name].bayes_eligible:
                raise ConfigError(
                    "plan.bayes_params",
                    f"{name!r} is {space[name].kind}; only continuous parameters can be searched by Bayesian optimization",
                )

    acq = d.get("acquisition", {})
    _check_keys(acq, ("xi", "n_candidates", "pending_radius", "min_init"), "acquisition")
    try:
        acquisition = AcquisitionConfig(
            xi=_float(acq, "xi", "acquisition"),
            n_candidates=_int(acq, "n_candidates", "acquisition", 2000),
            pending_radius=_float(acq, "pending_radius", "acquisition", 0.02),
        )
    except ValueError as exc:
        raise ConfigError("acquisition", str(exc)) from None

    output = d.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "expected a path string")
    backend = d.get("backend", "pool")
    if not isinstance(backend, str):
        raise ConfigError("backend", "expected a string")

    cfg = ExperimentConfig(
        space=space,
        target=target,
        seed=seed,
        n_random=_int(plan, "n_random", "plan", 0),
        n_bayes=_int(plan, "n_bayes", "plan", 0),
        explicit=tuple(dict(r) for r in explicit),
        bayes_params=bayes_params,
        workers=_int(d, "workers", "", 1),
        repetitions=_int(d, "repetitions", "", 1),
        backend=backend,
        acquisition=acquisition,
        min_init=_int(acq, "min_init", "acquisition", 3),
        output=output,
    )
    try:
        cfg.build_plan()
    except PlanError as exc:
        raise ConfigError("plan", str(exc)) from None
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Load a TOML config, or the resolved config archived in an ``experiment.json``."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(None, f"cannot read {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            d = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(None, f"{path}: invalid JSON: {exc}") from None
        if isinstance(d, dict):
            d = {k: v for k, v in d.items() if k not in SIDECAR_ONLY_KEYS}
    else:
        try:
            d = tomllib.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(None, f"{path}: {exc}") from None
    return config_from_dict(d)
