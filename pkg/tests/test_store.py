import json
import math

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from hpsearch.store import (
    StoreError,
    StoreParseError,
    TrialRecord,
    TrialStore,
    best_trial,
    format_row,
    header,
    load_experiment,
    read_experiment,
    read_trials,
    write_experiment,
    write_trials,
)

from store_cases import SPACE, concurrent_append, records, same_record, simple_record


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(records(), max_size=8, unique_by=lambda r: r.set_index))
def test_round_trip_is_exact(tmp_path, recs):
    path = tmp_path / "trials.csv"
    write_trials(path, SPACE, recs)
    back = read_trials(path, SPACE)
    assert len(back) == len(recs)
    assert all(same_record(a, b) for a, b in zip(recs, back))


def test_nan_result_round_trips(tmp_path):
    rec = TrialRecord(0, {"lr": 0.1, "x": 0.0, "batch_size": 16, "opt": "sgd"},
                      {"lr": "random", "x": "random", "batch_size": "random", "opt": "random"},
                      (), math.nan, "failed", 0, 5, 9, "exit: exit status 1")
    path = tmp_path / "t.csv"
    write_trials(path, SPACE, [rec])
    (back,) = read_trials(path, SPACE)
    assert math.isnan(back.result)
    assert back.diagnostic == "exit: exit status 1"
    assert "nan" in path.read_text().splitlines()[1]


def test_header_layout():
    cols = header(SPACE)
    assert cols[:7] == ["set_index", "status", "result", "repetition_results", "worker_id", "start_ts", "end_ts"]
    assert cols[7:9] == ["param:lr", "prov:lr"]
    assert cols[-1] == "diagnostic"


def test_record_validation():
    base = simple_record(0)
    with pytest.raises(StoreError):
        TrialRecord(**{**base.__dict__, "status": "maybe"})
    with pytest.raises(StoreError):
        TrialRecord(**{**base.__dict__, "result": math.inf})
    with pytest.raises(StoreError):
        TrialRecord(**{**base.__dict__, "start_ts": 10, "end_ts": 5})
    with pytest.raises(StoreError):
        TrialRecord(**{**base.__dict__, "provenance": {**base.provenance, "lr": "guess"}})


def test_duplicate_set_index_rejected(tmp_path):
    with TrialStore.create(SPACE, tmp_path / "t.csv") as store:
        store.append(simple_record(3))
        with pytest.raises(StoreError):
            store.append(simple_record(3))
        assert len(store) == 1


def test_duplicate_on_disk_rejected(tmp_path):
    path = tmp_path / "t.csv"
    write_trials(path, SPACE, [simple_record(1)])
    with path.open("a") as fh:
        fh.write(format_row(SPACE, simple_record(1)))
    with pytest.raises(StoreParseError) as info:
        read_trials(path, SPACE)
    assert info.value.line == 3


def test_truncated_last_line(tmp_path):
    path = tmp_path / "t.csv"
    write_trials(path, SPACE, [simple_record(0), simple_record(1)])
    text = path.read_text()
    path.write_text(text[:-10])
    with pytest.raises(StoreParseError) as info:
        read_trials(path, SPACE)
    assert info.value.line == 3
    assert "truncated" in str(info.value)


def test_malformed_row_reports_line(tmp_path):
    path = tmp_path / "t.csv"
    write_trials(path, SPACE, [simple_record(0)])
    with path.open("a") as fh:
        fh.write("1,ok,notanumber\n")
    with pytest.raises(StoreParseError) as info:
        read_trials(path, SPACE)
    assert info.value.line == 3


def test_header_only_file_is_empty(tmp_path):
    path = tmp_path / "t.csv"
    TrialStore.create(SPACE, path).close()
    assert read_trials(path, SPACE) == []


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("")
    with pytest.raises(StoreParseError):
        read_trials(path, SPACE)


def test_wrong_header(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(StoreParseError) as info:
        read_trials(path, SPACE)
    assert info.value.line == 1


def test_create_refuses_existing(tmp_path):
    path = tmp_path / "t.csv"
    TrialStore.create(SPACE, path).close()
    with pytest.raises(FileExistsError):
        TrialStore.create(SPACE, path)


def test_reopen_and_append(tmp_path):
    path = tmp_path / "t.csv"
    with TrialStore.create(SPACE, path) as s:
        s.append(simple_record(0))
    with TrialStore.open(SPACE, path) as s:
        assert len(s) == 1
        s.append(simple_record(1))
        with pytest.raises(StoreError):
            s.append(simple_record(0))
    assert [r.set_index for r in read_trials(path, SPACE)] == [0, 1]


def test_concurrent_writers(tmp_path):
    path = tmp_path / "t.csv"
    store, snapshots = concurrent_append(path, 6, 50)
    back = read_trials(path, SPACE)
    assert sorted(r.set_index for r in back) == list(range(300))
    assert len(path.read_text().splitlines()) == 301
    final = store.snapshot()
    assert [r.set_index for r in final] == [r.set_index for r in back]
    # every snapshot is a prefix of the final order
    for snap in snapshots:
        assert final[: len(snap)] == snap


def test_best_trial_rules():
    a = simple_record(0)
    b = TrialRecord(**{**simple_record(1).__dict__, "result": 0.0})
    failed = TrialRecord(**{**simple_record(2).__dict__, "status": "failed", "result": math.nan})
    assert best_trial([a, b, failed]).set_index == 0
    with pytest.raises(StoreError):
        best_trial([failed])
    with pytest.raises(StoreError):
        best_trial([])


def test_provenance_class():
    r = simple_record(0)
    assert r.provenance_class == "random"
    bayes = TrialRecord(**{**r.__dict__, "provenance": {**r.provenance, "x": "bayes"}})
    assert bayes.provenance_class == "bayes"
    expl = TrialRecord(**{**r.__dict__, "provenance": {n: "explicit" for n in r.provenance}})
    assert expl.provenance_class == "explicit"


def test_experiment_sidecar_and_partial_detection(tmp_path):
    meta = {"space": SPACE.to_dict(), "completed": False}
    write_experiment(tmp_path, meta)
    with TrialStore.create(SPACE, tmp_path / "trials.csv") as s:
        s.append(simple_record(0))
    exp = load_experiment(tmp_path)
    assert not exp.completed
    assert len(exp.records) == 1
    write_experiment(tmp_path, {**meta, "completed": True})
    assert load_experiment(tmp_path).completed
    assert not (tmp_path / "experiment.json.tmp").exists()


def test_sidecar_errors(tmp_path):
    with pytest.raises(StoreError):
        read_experiment(tmp_path)
    (tmp_path / "experiment.json").write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(StoreError):
        read_experiment(tmp_path)
    with pytest.raises(StoreError):
        load_experiment(tmp_path)  # no trials.csv


def test_diagnostic_is_single_printable_line():
    rec = TrialRecord(**{**simple_record(0).__dict__, "diagnostic": "line one\nline\rtwo\x00"})
    assert rec.diagnostic == "line one\\x0aline\\x0dtwo\\x00"
    assert TrialRecord(**{**simple_record(0).__dict__, "diagnostic": ""}).diagnostic is None
