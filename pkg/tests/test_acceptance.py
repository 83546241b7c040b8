"""Acceptance criteria. Each test prints exactly one ``CRITERION n: PASS|FAIL`` line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also repeated in the terminal summary.
"""

import itertools
import math
import statistics
import sys
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from hpsearch.acquisition import expected_improvement
from hpsearch.config import ExperimentConfig, parse_config
from hpsearch.engine import AllTrialsFailed, WorkerPool, run_experiment
from hpsearch.report import render_experiment
from hpsearch.space import continuous, define_space
from hpsearch.store import read_trials, write_trials
from hpsearch.surrogate import KernelConfig, fit_gp, predict_many
from hpsearch.targets import TargetSpec

from oracles import ei_monte_carlo, gp_dense
from store_cases import SPACE as STORE_SPACE
from store_cases import concurrent_append, records, same_record
from svg_tools import elements, parse

ROOT = Path(__file__).resolve().parents[1]
GRIEWANK = ROOT / "configs" / "griewank.toml"
STUB = str(Path(__file__).parent / "stubs" / "protocol_stub.py")

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def logical_clock():
    return itertools.count().__next__


def test_criterion_1_gp_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        X, y = rng.random((n, d)), rng.normal(size=n) * rng.uniform(0.1, 10)
        ls, s2 = float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.1, 5.0))
        noise = 1e-6 * s2
        model = fit_gp(X, y, KernelConfig(ls, s2, noise))
        probes = np.vstack([X, rng.random((10, d))])
        mu, var = predict_many(model, probes)
        mu_o, var_o = gp_dense(X, y, ls, s2, noise, probes)
        worst = max(worst, float(np.max(np.abs(mu - mu_o))), float(np.max(np.abs(var - var_o))))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-8 and elapsed < 5, f"max abs deviation {worst:.2e} (tol 1e-8), {elapsed:.2f}s (limit 5s)")


def test_criterion_2_ei_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    worst_mc = 0.0
    worst_limit = 0.0
    nonneg = True
    for k in range(20):
        mu = float(rng.uniform(-1, 1))
        sigma = float(rng.uniform(0.01, 0.5))
        f_best = mu + float(rng.normal(0, sigma))
        xi = float(rng.uniform(0, 0.05))
        ei = expected_improvement(mu, sigma**2, f_best, xi)
        nonneg &= ei >= 0
        worst_mc = max(worst_mc, abs(ei - ei_monte_carlo(mu, sigma, f_best, xi, n=1_000_000, seed=k)))
        tiny = expected_improvement(mu, 1e-24, f_best, xi)
        worst_limit = max(worst_limit, abs(tiny - max(f_best - mu - xi, 0.0)))
    elapsed = time.perf_counter() - t0
    ok = worst_mc <= 1e-3 and worst_limit <= 1e-9 and nonneg and elapsed < 30
    report(2, ok, f"MC deviation {worst_mc:.2e} (tol 1e-3), sigma->0 deviation {worst_limit:.1e} (tol 1e-9), "
                  f"EI>=0 {nonneg}, {elapsed:.2f}s (limit 30s)")


def test_criterion_3_quadratic_convergence(tmp_path):
    t0 = time.perf_counter()
    space = define_space([continuous("x", 0.0, 1.0)])
    hits = 0
    for seed in range(20):
        cfg = ExperimentConfig(space=space, target=TargetSpec("builtin", name="sleep_then_quadratic"), seed=seed,
                               n_random=4, n_bayes=10)
        s = run_experiment(cfg, pool=WorkerPool(1, "serial"), directory=tmp_path / str(seed), fsync=False)
        hits += abs(s.best.values["x"] - 0.3) <= 0.05
    elapsed = time.perf_counter() - t0
    report(3, hits >= 18 and elapsed < 60, f"{hits}/20 seeds within 0.05 of 0.3 (need 18), {elapsed:.2f}s (limit 60s)")


_GRIEWANK_RUN: dict = {}


def test_criterion_4_bo_beats_random(tmp_path_factory):
    base = tmp_path_factory.mktemp("griewank")
    cfg = parse_config(GRIEWANK)
    t0 = time.perf_counter()
    bo_best, rnd_best = [], []
    for seed in range(20):
        bo = run_experiment(cfg.with_overrides(seed=seed), directory=base / f"bo{seed}", fsync=False)
        rnd = run_experiment(cfg.with_overrides(seed=seed, n_random=30, n_bayes=0, bayes_params=None),
                             directory=base / f"rnd{seed}", fsync=False)
        bo_best.append(bo.best.result)
        rnd_best.append(rnd.best.result)
    _GRIEWANK_RUN["dir"] = base / f"bo{cfg.seed}"
    elapsed = time.perf_counter() - t0
    wins = sum(b <= r for b, r in zip(bo_best, rnd_best))
    med_bo, med_rnd = statistics.median(bo_best), statistics.median(rnd_best)
    ok = wins >= 14 and med_bo < med_rnd and elapsed < 300
    report(4, ok, f"BO <= random in {wins}/20 pairs (need 14), median best {med_bo:.4g} vs {med_rnd:.4g}, "
                  f"{cfg.workers} workers, {elapsed:.1f}s (limit 300s)")


@pytest.mark.slow
def test_criterion_5_parallel_speedup(tmp_path):
    space = define_space([continuous("x", 0.0, 1.0)])
    cfg = ExperimentConfig(space=space, target=TargetSpec("builtin", name="sleep_then_quadratic", sleep=1.0),
                           seed=5, n_random=30)
    t0 = time.perf_counter()
    par = run_experiment(cfg, pool=WorkerPool(6), directory=tmp_path / "par", fsync=False)
    t_par = time.perf_counter() - t0
    t0 = time.perf_counter()
    ser = run_experiment(cfg, pool=WorkerPool(1, "serial"), directory=tmp_path / "ser", fsync=False)
    t_ser = time.perf_counter() - t0
    counts = []
    for d in ("par", "ser"):
        recs = read_trials(tmp_path / d / "trials.csv", space)
        counts.append((len(recs), len({r.set_index for r in recs})))
    ok = t_par <= 8 and t_ser >= 30 and counts == [(30, 30), (30, 30)] and par.total == ser.total == 30
    report(5, ok, f"6 workers {t_par:.2f}s (limit 8s), serial {t_ser:.2f}s (min 30s), records/unique {counts}")


def _non_timestamp_rows(path):
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    drop = {rows[0].index("start_ts"), rows[0].index("end_ts")}
    return [[v for i, v in enumerate(r) if i not in drop] for r in rows]


def test_criterion_6_determinism(tmp_path):
    cfg = parse_config(GRIEWANK).with_overrides(explicit=({"x": 1.0},))
    serial = WorkerPool(1, "serial")
    for name in ("a", "b"):
        run_experiment(cfg, pool=serial, directory=tmp_path / name, clock=logical_clock(), fsync=False)
    for name in ("c", "d"):
        run_experiment(cfg, pool=serial, directory=tmp_path / name, fsync=False)
    identical = (tmp_path / "a" / "trials.csv").read_bytes() == (tmp_path / "b" / "trials.csv").read_bytes()
    same_content = _non_timestamp_rows(tmp_path / "c" / "trials.csv") == _non_timestamp_rows(tmp_path / "d" / "trials.csv")

    by_pool = []
    for w in (1, 6):
        s = run_experiment(cfg, pool=WorkerPool(w), directory=tmp_path / f"w{w}", fsync=False)
        by_pool.append({r.set_index: r for r in s.records})
    mismatched = 0
    for i, r1 in by_pool[0].items():
        r6 = by_pool[1][i]
        for name, prov in r1.provenance.items():
            if prov in ("explicit", "random") and (r6.provenance[name] != prov or r6.values[name] != r1.values[name]):
                mismatched += 1
    ok = identical and same_content and mismatched == 0
    report(6, ok, f"serial trials.csv byte-identical (logical clock) {identical}, identical apart from timestamps "
                  f"(wall clock) {same_content}, explicit/random mismatches 1 vs 6 workers: {mismatched}")


def test_criterion_7_figures(tmp_path):
    directory = _GRIEWANK_RUN.get("dir")
    if directory is None:  # criterion 4 not run in this session
        directory = tmp_path / "g"
        run_experiment(parse_config(GRIEWANK), directory=directory, fsync=False)
    figures = render_experiment(directory)
    svgs = {f.name: f.svg for f in figures}
    valid = True
    for text in svgs.values():
        try:
            ET.fromstring(text.encode())
        except ET.ParseError:
            valid = False
    roi = parse(svgs["fig_result_over_index"])
    circles = len(elements(roi, "circle", "marker"))
    crosses = len(elements(roi, "path", "cross"))
    tl = parse(svgs["fig_worker_timeline"])
    starts, ends = len(elements(tl, "polygon", "start")), len(elements(tl, "polygon", "end"))
    pc = len(elements(parse(svgs["fig_parallel_coords"]), "polyline", "trial"))
    sc = len(elements(parse(svgs["fig_scatter_x_y"]), "circle", "marker"))
    cells = len(elements(parse(svgs["fig_contour_x_y"]), "rect", "cell"))
    on_disk = sorted(p.name for p in (Path(directory) / "figures").glob("*.svg"))
    ok = (valid and len(svgs) == 5 and len(on_disk) == 5 and (circles, crosses) == (15, 15)
          and (starts, ends) == (30, 30) and pc == 30 and sc == 30 and cells == 1600)
    report(7, ok, f"{len(on_disk)} SVG files valid={valid}; circles/crosses {circles}/{crosses}, "
                  f"start/end triangles {starts}/{ends}, polylines {pc}, scatter markers {sc}, contour cells {cells}")


_ROUND_TRIP_FAILURES: list = []


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(records(), min_size=1, max_size=8, unique_by=lambda r: r.set_index))
def _round_trip(tmp_path, recs):
    path = tmp_path / "trials.csv"
    write_trials(path, STORE_SPACE, recs)
    back = read_trials(path, STORE_SPACE)
    if len(back) != len(recs) or not all(same_record(a, b) for a, b in zip(recs, back)):
        _ROUND_TRIP_FAILURES.append(recs)


def test_criterion_8_store(tmp_path):
    _ROUND_TRIP_FAILURES.clear()
    _round_trip(tmp_path)
    path = tmp_path / "concurrent.csv"
    store, snapshots = concurrent_append(path, 6, 50)
    back = read_trials(path, STORE_SPACE)
    lost = 300 - len({r.set_index for r in back})
    prefix_ok = all(store.snapshot()[: len(s)] == s for s in snapshots)
    ok = not _ROUND_TRIP_FAILURES and lost == 0 and len(back) == 300 and prefix_ok
    report(8, ok, f"200 property round-trips, {len(_ROUND_TRIP_FAILURES)} mismatched; 6x50 concurrent appends, "
                  f"{len(back)} rows read back, {lost} lost, snapshots consistent {prefix_ok}")


def _stub_run(tmp_path, mode, timeout=None, **env):
    space = define_space([continuous("x", 0.0, 1.0), continuous("y", 0.0, 1.0)])
    target = TargetSpec("subprocess", command=(sys.executable, STUB), args=("--tag={x}",), timeout=timeout,
                        env={"STUB_MODE": mode, **env})
    cfg = ExperimentConfig(space=space, target=target, seed=1, n_random=1, explicit=({"x": 0.25, "y": 0.5},))
    try:
        s = run_experiment(cfg, pool=WorkerPool(2), directory=tmp_path / mode, fsync=False)
        return s.records
    except AllTrialsFailed as exc:
        return exc.summary.records


def test_criterion_9_subprocess_protocol(tmp_path):
    outcomes = {}
    recs = _stub_run(tmp_path, "sum")
    r0 = [r for r in recs if r.set_index == 0][0]
    outcomes["args+env"] = all(r.ok for r in recs) and r0.result == 0.75

    recs = _stub_run(tmp_path, "multiline")
    outcomes["multi-line"] = all(r.ok and r.result == 1.5e-2 for r in recs)

    recs = _stub_run(tmp_path, "fail")
    outcomes["exit 1"] = all(r.status == "failed" and math.isnan(r.result) and "exit status 1" in r.diagnostic
                             and "something broke" in r.diagnostic for r in recs)

    t0 = time.perf_counter()
    recs = _stub_run(tmp_path, "sleep", timeout=0.5, STUB_SLEEP="30")
    outcomes["timeout"] = all(r.status == "failed" and "timeout" in r.diagnostic for r in recs) and time.perf_counter() - t0 < 10

    recs = _stub_run(tmp_path, "garbage")
    outcomes["parse"] = all(r.status == "failed" and r.diagnostic.startswith("repetition 0: parse") for r in recs)

    space = define_space([continuous("x", 0.0, 1.0)])
    cfg = ExperimentConfig(space=space, target=TargetSpec("subprocess", command=(sys.executable, STUB),
                                                          env={"STUB_MODE": "rep"}), seed=1, n_random=2, repetitions=3)
    s = run_experiment(cfg, directory=tmp_path / "reps", fsync=False)
    outcomes["repetitions"] = all(r.repetition_results == (1.0, 2.0, 3.0) and r.result == 2.0 for r in s.records)

    ok = all(outcomes.values())
    report(9, ok, ", ".join(f"{k} {'ok' if v else 'WRONG'}" for k, v in outcomes.items()))
