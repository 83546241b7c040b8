"""Master/worker scheduling of plan entries.

The master hands plan entries to free workers in index order and appends
each finished record to the store as soon as it arrives. Workers resolve
their own parameters at task start: random values come from a per-set
random stream, bayes values from a GP fitted to whatever trials have
finished by then, with the points other workers are currently evaluating
passed along as pending.

Random and explicit values depend only on ``(seed, set_index)`` and are
therefore identical for any pool size. Bayes proposals depend on which
trials happened to be finished and may differ between pool sizes.
"""

from __future__ import annotations

import heapq
import logging
import math
import shutil
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .acquisition import AcquisitionConfig, propose
from .config import ExperimentConfig
from .plan import BAYES, EXPLICIT, RANDOM, PlanEntry
from .space import ParameterSet, SearchSpace, denormalize, normalize, sample_random
from .store import (
    EXPERIMENT_FILE,
    FAILED,
    OK,
    TRIALS_FILE,
    TrialRecord,
    TrialStore,
    best_trial,
    write_experiment,
)
from .surrogate import fit_auto
from .targets import TargetError, make_target

log = logging.getLogger(__name__)

RANDOM_STREAM = 0
BAYES_STREAM = 1

Target = Callable[[ParameterSet, int], float]
Clock = Callable[[], int]


class EngineError(RuntimeError):
    pass


class AllTrialsFailed(EngineError):
    def __init__(self, summary: "ExperimentSummary"):
        super().__init__(f"all {summary.total} trials failed")
        self.summary = summary


def utc_micros() -> int:
    return time.time_ns() // 1000


@dataclass(frozen=True)
class WorkerPool:
    size: int = 1
    backend: str = "pool"

    def __post_init__(self) -> None:
        if self.size < 1:
            raise EngineError("worker pool size must be >= 1")
        if self.backend not in ("pool", "serial"):
            raise EngineError(f"unknown back end {self.backend!r}")
        if self.backend == "serial" and self.size != 1:
            raise EngineError("the serial back end has exactly one worker")


@dataclass(frozen=True)
class Task:
    entry: PlanEntry
    seed: int
    repetitions: int = 1

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise EngineError("repetitions must be >= 1")

    def rng(self, stream: int) -> np.random.Generator:
        return task_rng(self.seed, self.entry.set_index, stream)


def task_rng(seed: int, set_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, set_index, stream])


@dataclass(frozen=True)
class Resolution:
    values: ParameterSet
    provenance: Mapping[str, str]

    @property
    def fallback(self) -> bool:
        return "random-fallback" in self.provenance.values()


@dataclass
class ExperimentSummary:
    total: int
    failed: int
    best: TrialRecord | None
    duration_s: float
    directory: Path | None = None
    records: tuple[TrialRecord, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        out = {"total": self.total, "failed": self.failed, "duration_s": self.duration_s}
        if self.best is not None:
            out["best"] = {
                "set_index": self.best.set_index,
                "result": self.best.result,
                "values": dict(self.best.values),
            }
        return out


def resolve_parameters(
    entry: PlanEntry,
    space: SearchSpace,
    snapshot: Sequence[TrialRecord],
    pending: Sequence[Mapping],
    seed: int,
    *,
    acquisition: AcquisitionConfig = AcquisitionConfig(),
    min_init: int = 3,
) -> Resolution:
    """Turn a plan entry into concrete values.

    A full random draw is always made first from the set's random stream so
    random columns do not depend on which parameters end up searched by BO.
    Bayes-tagged parameters fall back to that draw (flagged
    ``random-fallback``) until ``min_init`` trials have finite results.
    """
    base = sample_random(space, task_rng(seed, entry.set_index, RANDOM_STREAM))
    values: dict = {}
    prov: dict[str, str] = {}
    for name in space.names:
        tag = entry.assignments[name]
        if tag.kind == EXPLICIT:
            values[name], prov[name] = tag.value, "explicit"
        elif tag.kind == RANDOM:
            values[name], prov[name] = base[name], "random"
        else:
            values[name], prov[name] = base[name], "random-fallback"

    bayes_names = entry.bayes_names
    if bayes_names:
        finished = [r for r in snapshot if r.ok and math.isfinite(r.result)]
        if len(finished) >= min_init:
            X = np.array([normalize(space, r.values, bayes_names) for r in finished])
            y = np.array([r.result for r in finished])
            model = fit_auto(X, y)
            pend = [normalize(space, p, bayes_names) for p in pending]
            proposal = propose(model, pend, acquisition, task_rng(seed, entry.set_index, BAYES_STREAM))
            for name, v in denormalize(space, proposal.point, bayes_names).items():
                values[name], prov[name] = v, BAYES

    return Resolution(space.validate(values), prov)


def _mean(xs: Sequence[float]) -> float:
    # anchored at the first value so identical repetitions average to themselves exactly
    x0 = xs[0]
    return x0 + math.fsum(x - x0 for x in xs) / len(xs)


def execute_trial(
    task: Task,
    resolved: Resolution,
    target: Target,
    *,
    worker_id: int = 0,
    clock: Clock = utc_micros,
    timeout: float | None = None,
    start_ts: int | None = None,
) -> TrialRecord:
    """Evaluate ``target`` ``task.repetitions`` times; any failing repetition fails the trial."""
    start = clock() if start_ts is None else start_ts
    results: list[float] = []
    diagnostic = None
    for rep in range(task.repetitions):
        t0 = time.monotonic()
        try:
            value = float(target(resolved.values, rep))
        except TargetError as exc:
            diagnostic = f"repetition {rep}: {exc}"
            break
        except Exception as exc:
            diagnostic = f"repetition {rep}: error: {type(exc).__name__}: {exc}"
            break
        if timeout is not None and time.monotonic() - t0 > timeout:
            diagnostic = f"repetition {rep}: timeout: no result within {timeout}s"
            break
        if not math.isfinite(value):
            diagnostic = f"repetition {rep}: value: non-finite result {value!r}"
            break
        results.append(value)
    end = clock()
    ok = diagnostic is None
    return TrialRecord(
        set_index=task.entry.set_index,
        values=resolved.values.as_dict(),
        provenance=dict(resolved.provenance),
        repetition_results=tuple(results),
        result=_mean(results) if ok else math.nan,
        status=OK if ok else FAILED,
        worker_id=worker_id,
        start_ts=start,
        end_ts=max(end, start),
        diagnostic=diagnostic,
    )


class _PendingPoints:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._points: dict[int, ParameterSet] = {}

    def add(self, index: int, pset: ParameterSet) -> None:
        with self._lock:
            self._points[index] = pset

    def discard(self, index: int) -> None:
        with self._lock:
            self._points.pop(index, None)

    def view(self) -> list[ParameterSet]:
        with self._lock:
            return [self._points[i] for i in sorted(self._points)]


class _Runner:
    def __init__(self, config: ExperimentConfig, target: Target, store: TrialStore, clock: Clock):
        self.config = config
        self.space = config.space
        self.target = target
        self.store = store
        self.clock = clock
        self.pending = _PendingPoints()

    def run_task(self, entry: PlanEntry, worker_id: int) -> TrialRecord:
        """Worker side: resolve, register as pending, evaluate. Never raises."""
        task = Task(entry, self.config.seed, self.config.repetitions)
        start = self.clock()
        try:
            resolved = resolve_parameters(
                entry,
                self.space,
                self.store.snapshot(),
                self.pending.view(),
                self.config.seed,
                acquisition=self.config.acquisition,
                min_init=self.config.min_init,
            )
        except Exception as exc:
            log.warning("set %d: parameter resolution failed: %s", entry.set_index, exc)
            return self._resolution_failure(entry, worker_id, start, exc)
        self.pending.add(entry.set_index, resolved.values)
        return execute_trial(
            task,
            resolved,
            self.target,
            worker_id=worker_id,
            clock=self.clock,
            timeout=self.config.target.timeout,
            start_ts=start,
        )

    def _resolution_failure(self, entry: PlanEntry, worker_id: int, start: int, exc: Exception) -> TrialRecord:
        base = sample_random(self.space, task_rng(self.config.seed, entry.set_index, RANDOM_STREAM))
        values, prov = {}, {}
        for name in self.space.names:
            tag = entry.assignments[name]
            if tag.kind == EXPLICIT:
                values[name], prov[name] = tag.value, "explicit"
            else:
                values[name] = base[name]
                prov[name] = "random" if tag.kind == RANDOM else "random-fallback"
        return TrialRecord(
            set_index=entry.set_index,
            values=values,
            provenance=prov,
            repetition_results=(),
            result=math.nan,
            status=FAILED,
            worker_id=worker_id,
            start_ts=start,
            end_ts=max(self.clock(), start),
            diagnostic=f"parameter resolution failed: {type(exc).__name__}: {exc}",
        )

    def finish(self, record: TrialRecord) -> None:
        """Master side: persist, then stop treating the point as pending."""
        self.store.append(record)
        self.pending.discard(record.set_index)
        log.info(
            "set %d done on worker %d: %s %s",
            record.set_index,
            record.worker_id,
            record.status,
            record.result,
        )

    def run_serial(self, entries: Sequence[PlanEntry]) -> None:
        for entry in entries:
            self.finish(self.run_task(entry, 0))

    def run_pool(self, entries: Sequence[PlanEntry], size: int) -> None:
        free = list(range(size))
        heapq.heapify(free)
        in_flight = {}
        next_i = 0
        with ThreadPoolExecutor(max_workers=size, thread_name_prefix="hpsearch-worker") as ex:
            while next_i < len(entries) or in_flight:
                while free and next_i < len(entries):
                    wid = heapq.heappop(free)
                    fut = ex.submit(self.run_task, entries[next_i], wid)
                    in_flight[fut] = (entries[next_i].set_index, wid)
                    next_i += 1
                done, _ = wait(in_flight, return_when=FIRST_COMPLETED)
                for fut in sorted(done, key=lambda f: in_flight[f][0]):
                    _, wid = in_flight.pop(fut)
                    self.finish(fut.result())
                    heapq.heappush(free, wid)


def prepare_directory(directory, *, overwrite: bool = False) -> Path:
    directory = Path(directory)
    if (directory / TRIALS_FILE).exists() or (directory / EXPERIMENT_FILE).exists():
        if not overwrite:
            raise EngineError(f"{directory} already holds an experiment (use overwrite to replace it)")
        for name in (TRIALS_FILE, EXPERIMENT_FILE):
            (directory / name).unlink(missing_ok=True)
        shutil.rmtree(directory / "figures", ignore_errors=True)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def run_experiment(
    config: ExperimentConfig,
    target: Target | None = None,
    pool: WorkerPool | None = None,
    *,
    directory=None,
    clock: Clock = utc_micros,
    overwrite: bool = False,
    fsync: bool = True,
) -> ExperimentSummary:
    """Run every plan entry once and persist the trials under ``directory``.

    ``experiment.json`` is written up front with ``completed: false`` and
    rewritten with ``completed: true`` once the last record is durable, so an
    interrupted run is recognisable. Raises AllTrialsFailed (after
    finalizing the store) when no trial succeeded.
    """
    plan = config.build_plan()
    if pool is None:
        pool = WorkerPool(config.workers, config.backend) if config.backend == "pool" else WorkerPool(1, "serial")
    if target is None:
        target = make_target(config.target, config.space)
    directory = directory if directory is not None else config.output
    if directory is None:
        raise EngineError("no output directory given")
    directory = prepare_directory(directory, overwrite=overwrite)

    meta = config.to_dict()
    meta["workers"] = pool.size
    meta["backend"] = pool.backend
    meta["output"] = str(directory)
    meta["completed"] = False
    write_experiment(directory, meta)

    t0 = time.perf_counter()
    with TrialStore.create(config.space, directory / TRIALS_FILE, fsync=fsync) as store:
        runner = _Runner(config, target, store, clock)
        if pool.backend == "serial":
            runner.run_serial(plan.entries)
        else:
            runner.run_pool(plan.entries, pool.size)
        records = store.snapshot()
    duration = time.perf_counter() - t0

    failed = sum(1 for r in records if not r.ok)
    best = best_trial(records) if failed < len(records) else None
    summary = ExperimentSummary(len(records), failed, best, duration, directory, records)
    meta["completed"] = True
    meta["summary"] = summary.to_dict()
    write_experiment(directory, meta)
    if best is None:
        raise AllTrialsFailed(summary)
    return summary
