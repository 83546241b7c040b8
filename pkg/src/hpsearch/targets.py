"""Black-box objectives: analytic built-ins and the external-process protocol.

Subprocess protocol
-------------------
The command is launched once per repetition. Every parameter is passed both
as a ``--param NAME=VALUE`` argument pair and as the environment variable
``PHS_PARAM_<NAME>`` (name upper-cased); the 0-based repetition index is in
``PHS_REP``. Floats are written as shortest round-trip decimals, strings
verbatim. The target reports its result as the last non-blank line of
stdout, in plain decimal or scientific notation. Anything else on stdout is
ignored, so targets may log freely.
"""

from __future__ import annotations

import os
import re
import subprocess
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .space import ParameterSet, SearchSpace, Value

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class TargetError(RuntimeError):
    """A target evaluation failed. ``kind`` is one of exit, timeout, spawn, parse, value."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.detail = message


def griewank(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("griewank needs at least one coordinate")
    i = np.arange(1, x.size + 1)
    return float(1.0 + np.sum(x**2) / 4000.0 - np.prod(np.cos(x / np.sqrt(i))))


def sphere(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("sphere needs at least one coordinate")
    return float(np.sum(x**2))


def rosenbrock(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("rosenbrock needs at least two coordinates")
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def shifted_quadratic(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("quadratic needs at least one coordinate")
    return float(np.sum((x - 0.3) ** 2))


BUILTINS: dict[str, Callable[[Sequence[float]], float]] = {
    "griewank": griewank,
    "sphere": sphere,
    "rosenbrock": rosenbrock,
    "sleep_then_quadratic": shifted_quadratic,
}


@dataclass(frozen=True)
class TargetSpec:
    """How to evaluate the objective.

    ``builtin`` targets read the continuous parameters in declaration order.
    ``sleep`` only affects ``sleep_then_quadratic``. For ``subprocess``
    targets ``args`` is appended after ``command`` with ``{name}`` fields
    replaced by the formatted parameter values, before the ``--param`` pairs.
    """

    kind: str
    name: str | None = None
    command: tuple[str, ...] = ()
    args: tuple[str, ...] = ()
    timeout: float | None = None
    sleep: float = 0.0
    env: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "command", tuple(self.command))
        object.__setattr__(self, "args", tuple(self.args))
        if self.kind == "builtin":
            if self.name not in BUILTINS:
                raise ValueError(f"unknown builtin target {self.name!r}; choose from {sorted(BUILTINS)}")
            if self.command or self.args:
                raise ValueError("builtin targets take no command")
        elif self.kind == "subprocess":
            if not self.command or not all(isinstance(c, str) and c for c in self.command):
                raise ValueError("subprocess target needs a nonempty command")
        else:
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.timeout is not None and not self.timeout > 0:
            raise ValueError("timeout must be > 0")
        if not self.sleep >= 0:
            raise ValueError("sleep must be >= 0")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "builtin":
            out["name"] = self.name
            if self.sleep:
                out["sleep"] = self.sleep
        else:
            out["command"] = list(self.command)
            if self.args:
                out["args"] = list(self.args)
            if self.env:
                out["env"] = dict(self.env)
        if self.timeout is not None:
            out["timeout"] = self.timeout
        return out


def format_value(value: Value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("boolean parameter values are not supported")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def eval_builtin(name: str, pset: ParameterSet | Mapping[str, Value], space: SearchSpace, sleep: float = 0.0) -> float:
    try:
        fn = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin target {name!r}") from None
    x = [float(pset[n]) for n in space.continuous_names]
    if name == "sleep_then_quadratic" and sleep > 0:
        time.sleep(sleep)
    return fn(x)


def parse_result(stdout: str) -> float:
    lines = [ln for ln in stdout.splitlines() if ln.strip()]
    if not lines:
        raise TargetError("parse", "no output on stdout")
    last = lines[-1].strip()
    if not _NUMBER_RE.fullmatch(last):
        raise TargetError("parse", f"last stdout line is not a number: {last[:200]!r}")
    return float(last)


def build_invocation(
    spec: TargetSpec, pset: ParameterSet | Mapping[str, Value], repetition: int
) -> tuple[list[str], dict[str, str]]:
    formatted = {n: format_value(pset[n]) for n in pset}
    argv = list(spec.command)
    argv += [a.format_map(formatted) for a in spec.args]
    env = dict(os.environ)
    env.update(spec.env)
    for n, v in formatted.items():
        argv += ["--param", f"{n}={v}"]
        env[f"PHS_PARAM_{n.upper()}"] = v
    env["PHS_REP"] = str(repetition)
    return argv, env


def eval_subprocess(spec: TargetSpec, pset: ParameterSet | Mapping[str, Value], repetition: int = 0) -> float:
    argv, env = build_invocation(spec, pset, repetition)
    try:
        proc = subprocess.run(
            argv,
            env=env,
            stdin=subprocess.DEVNULL,
            capture_output=True,
            timeout=spec.timeout,
        )
    except subprocess.TimeoutExpired as exc:
        stderr = _decode(exc.stderr)
        raise TargetError("timeout", f"no result after {spec.timeout}s{_tail(stderr)}") from None
    except OSError as exc:
        raise TargetError("spawn", f"cannot launch {argv[0]!r}: {exc}") from None
    stderr = _decode(proc.stderr)
    if proc.returncode != 0:
        raise TargetError("exit", f"exit status {proc.returncode}{_tail(stderr)}")
    try:
        return parse_result(_decode(proc.stdout))
    except TargetError as exc:
        raise TargetError("parse", exc.detail + _tail(stderr)) from None


def _decode(data: bytes | str | None) -> str:
    if data is None:
        return ""
    if isinstance(data, str):
        return data
    return data.decode("utf-8", errors="replace")


def _tail(stderr: str, limit: int = 2000) -> str:
    stderr = stderr.strip()
    if not stderr:
        return ""
    if len(stderr) > limit:
        stderr = "..." + stderr[-limit:]
    return f"; stderr: {stderr}"


class Target:
    """Callable wrapper: ``target(pset, repetition) -> float``."""

    def __init__(self, spec: TargetSpec, space: SearchSpace):
        self.spec = spec
        self.space = space
        if spec.kind == "builtin":
            n = len(space.continuous_names)
            if n == 0:
                raise ValueError(f"builtin {spec.name!r} needs at least one continuous parameter")
            if spec.name == "rosenbrock" and n < 2:
                raise ValueError("rosenbrock needs at least two continuous parameters")

    def __call__(self, pset: ParameterSet | Mapping[str, Value], repetition: int = 0) -> float:
        if self.spec.kind == "builtin":
            return eval_builtin(self.spec.name, pset, self.space, self.spec.sleep)
        return eval_subprocess(self.spec, pset, repetition)


def make_target(spec: TargetSpec, space: SearchSpace) -> Target:
    return Target(spec, space)
