"""Append-only trial store backed by ``trials.csv`` plus an ``experiment.json`` sidecar.

``trials.csv`` columns, in order::

    set_index, status, result, repetition_results, worker_id, start_ts, end_ts,
    param:<name>, prov:<name>   (one pair per parameter, declaration order)
    diagnostic

Floats are written with ``repr`` (shortest round-trip form) so a reload is
bit-exact. Repetition results are joined with ``;``. Timestamps are integer
UTC microseconds since the epoch.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import threading
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import space_from_dict
from .space import SearchSpace, Value

TRIALS_FILE = "trials.csv"
EXPERIMENT_FILE = "experiment.json"
SCHEMA_VERSION = 1

OK = "ok"
FAILED = "failed"
PROVENANCES = ("explicit", "random", "bayes", "random-fallback")

BASE_COLUMNS = ("set_index", "status", "result", "repetition_results", "worker_id", "start_ts", "end_ts")


class StoreError(RuntimeError):
    pass


class StoreParseError(StoreError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def clean_diagnostic(text: str | None) -> str | None:
    """One printable line: control characters become ``\\xNN``/``\\uNNNN`` escapes."""
    if not text:
        return None
    out = []
    for ch in text:
        if unicodedata.category(ch)[0] == "C":
            code = ord(ch)
            out.append(f"\\x{code:02x}" if code < 0x100 else f"\\u{code:04x}" if code < 0x10000 else f"\\U{code:08x}")
        else:
            out.append(ch)
    return "".join(out)


@dataclass(frozen=True)
class TrialRecord:
    set_index: int
    values: Mapping[str, Value]
    provenance: Mapping[str, str]
    repetition_results: tuple[float, ...]
    result: float
    status: str
    worker_id: int
    start_ts: int
    end_ts: int
    diagnostic: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "repetition_results", tuple(float(r) for r in self.repetition_results))
        result = float(self.result)
        # one canonical NaN: payload and sign bits do not survive a text format
        object.__setattr__(self, "result", math.nan if math.isnan(result) else result)
        object.__setattr__(self, "diagnostic", clean_diagnostic(self.diagnostic))
        if self.status not in (OK, FAILED):
            raise StoreError(f"unknown status {self.status!r}")
        if self.status == OK and not math.isfinite(self.result):
            raise StoreError(f"trial {self.set_index}: ok status requires a finite result")
        if self.start_ts > self.end_ts:
            raise StoreError(f"trial {self.set_index}: start_ts after end_ts")
        if set(self.values) != set(self.provenance):
            raise StoreError(f"trial {self.set_index}: provenance keys differ from parameter names")
        for n, p in self.provenance.items():
            if p not in PROVENANCES:
                raise StoreError(f"trial {self.set_index}: unknown provenance {p!r} for {n!r}")

    @property
    def ok(self) -> bool:
        return self.status == OK

    @property
    def provenance_class(self) -> str:
        """``bayes`` if any value was proposed by the surrogate, else ``random`` or ``explicit``."""
        provs = set(self.provenance.values())
        if "bayes" in provs:
            return "bayes"
        if provs & {"random", "random-fallback"}:
            return "random"
        return "explicit"


def best_trial(records: Iterable[TrialRecord]) -> TrialRecord:
    """Lowest result among ok records; ties go to the lowest set_index."""
    ok = [r for r in records if r.ok]
    if not ok:
        raise StoreError("no successful trials")
    return min(ok, key=lambda r: (r.result, r.set_index))


# -- CSV encoding -------------------------------------------------------------


def header(space: SearchSpace) -> list[str]:
    cols = list(BASE_COLUMNS)
    for name in space.names:
        cols += [f"param:{name}", f"prov:{name}"]
    cols.append("diagnostic")
    return cols


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_value(space: SearchSpace, name: str, value: Value) -> str:
    spec = space[name]
    if spec.kind == "continuous":
        return _fmt_float(value)
    if spec.kind == "discrete":
        return repr(value)
    return value


def encode_row(space: SearchSpace, rec: TrialRecord) -> list[str]:
    row = [
        str(rec.set_index),
        rec.status,
        _fmt_float(rec.result),
        ";".join(_fmt_float(r) for r in rec.repetition_results),
        str(rec.worker_id),
        str(rec.start_ts),
        str(rec.end_ts),
    ]
    for name in space.names:
        row += [_fmt_value(space, name, rec.values[name]), rec.provenance[name]]
    row.append(rec.diagnostic or "")
    return row


def format_row(space: SearchSpace, rec: TrialRecord) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(encode_row(space, rec))
    return buf.getvalue()


def _parse_value(space: SearchSpace, name: str, text: str) -> Value:
    spec = space[name]
    if spec.kind == "continuous":
        return float(text)
    if spec.kind == "discrete":
        for v in spec.values:
            if repr(v) == text:
                return v
        raise ValueError(f"{text!r} is not a declared value of {name!r}")
    if text not in spec.values:
        raise ValueError(f"{text!r} is not a declared value of {name!r}")
    return text


def decode_row(space: SearchSpace, row: Sequence[str]) -> TrialRecord:
    cols = header(space)
    if len(row) != len(cols):
        raise ValueError(f"expected {len(cols)} fields, got {len(row)}")
    set_index, status, result, reps, worker, start, end = row[:7]
    values, prov = {}, {}
    for i, name in enumerate(space.names):
        values[name] = _parse_value(space, name, row[7 + 2 * i])
        prov[name] = row[8 + 2 * i]
    return TrialRecord(
        set_index=int(set_index),
        values=values,
        provenance=prov,
        repetition_results=tuple(float(r) for r in reps.split(";")) if reps else (),
        result=float(result),
        status=status,
        worker_id=int(worker),
        start_ts=int(start),
        end_ts=int(end),
        diagnostic=row[-1] or None,
    )


def write_trials(path, space: SearchSpace, records: Iterable[TrialRecord]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header(space))
        for rec in records:
            w.writerow(encode_row(space, rec))


def read_trials(path, space: SearchSpace) -> list[TrialRecord]:
    """Load every record from ``path``; malformed content raises StoreParseError with its line."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    if not text:
        raise StoreParseError(path, 1, "missing header")
    if not text.endswith("\n"):
        raise StoreParseError(path, text.count("\n") + 1, "truncated line (no terminating newline)")
    reader = csv.reader(io.StringIO(text, newline=""))
    records: list[TrialRecord] = []
    seen: set[int] = set()
    try:
        for row in reader:
            if reader.line_num == 1:
                if row != header(space):
                    raise StoreParseError(path, 1, f"unexpected header {row}")
                continue
            line = reader.line_num
            try:
                rec = decode_row(space, row)
            except (ValueError, StoreError) as exc:
                raise StoreParseError(path, line, str(exc)) from None
            if rec.set_index in seen:
                raise StoreParseError(path, line, f"duplicate set_index {rec.set_index}")
            seen.add(rec.set_index)
            records.append(rec)
    except csv.Error as exc:
        raise StoreParseError(path, reader.line_num, f"malformed CSV: {exc}") from None
    return records


class TrialStore:
    """Append-only record set, optionally mirrored to a CSV file.

    ``append`` is linearizable (one lock); ``snapshot`` is a lock-free read of
    an immutable tuple that is swapped in only after the row is durable.
    """

    def __init__(self, space: SearchSpace, path=None, *, records: Sequence[TrialRecord] = (), fsync: bool = True):
        self.space = space
        self.path = Path(path) if path is not None else None
        self.fsync = fsync
        self._lock = threading.Lock()
        self._records: tuple[TrialRecord, ...] = tuple(records)
        self._indices = {r.set_index for r in self._records}
        self._fh = None
        if self.path is not None:
            self._fh = self.path.open("a", encoding="utf-8", newline="")

    @classmethod
    def create(cls, space: SearchSpace, path, *, fsync: bool = True) -> "TrialStore":
        path = Path(path)
        with path.open("x", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(header(space))
            fh.flush()
            if fsync:
                os.fsync(fh.fileno())
        return cls(space, path, fsync=fsync)

    @classmethod
    def open(cls, space: SearchSpace, path, *, fsync: bool = True) -> "TrialStore":
        return cls(space, path, records=read_trials(path, space), fsync=fsync)

    def append(self, rec: TrialRecord) -> None:
        if set(rec.values) != set(self.space.names):
            raise StoreError(f"trial {rec.set_index}: values do not match the space")
        line = format_row(self.space, rec) if self._fh is not None else None
        with self._lock:
            if rec.set_index in self._indices:
                raise StoreError(f"duplicate set_index {rec.set_index}")
            if self._fh is not None:
                self._fh.write(line)
                self._fh.flush()
                if self.fsync:
                    os.fsync(self._fh.fileno())
            self._indices.add(rec.set_index)
            self._records = self._records + (rec,)

    def snapshot(self) -> tuple[TrialRecord, ...]:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "TrialStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# -- experiment sidecar -------------------------------------------------------


def write_experiment(directory, meta: Mapping) -> None:
    """Atomically (re)write ``experiment.json``."""
    directory = Path(directory)
    out = {"schema_version": SCHEMA_VERSION, **meta}
    tmp = directory / (EXPERIMENT_FILE + ".tmp")
    tmp.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, directory / EXPERIMENT_FILE)


def read_experiment(directory) -> dict:
    path = Path(directory) / EXPERIMENT_FILE
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StoreError(f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise StoreError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise StoreError(f"{path}: unsupported schema_version {meta.get('schema_version')!r}")
    return meta


@dataclass
class LoadedExperiment:
    directory: Path
    meta: dict
    space: SearchSpace
    records: list[TrialRecord] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return bool(self.meta.get("completed"))


def load_experiment(directory) -> LoadedExperiment:
    """Read an experiment directory. Incomplete runs load fine; check ``.completed``."""
    directory = Path(directory)
    trials = directory / TRIALS_FILE
    if not trials.exists():
        raise StoreError(f"{trials} not found")
    meta = read_experiment(directory)
    space = space_from_dict(meta["space"], "space")
    return LoadedExperiment(directory, meta, space, read_trials(trials, space))
