"""Post-hoc figures: standalone SVG files, most with a companion CSV table.

Element classes are stable so figures can be checked structurally:
``marker`` for per-trial symbols (``circle`` for sets without any
BO-proposed value, ``path.cross`` for sets with one), ``best`` for the
highlight ring around the lowest result, ``label`` for index labels,
``trial`` for parallel-coordinate polylines, ``bar``/``start``/``end`` for
timeline bars and their start and end triangles, ``cell`` for contour cells.

Colors come from the fixed ramp in :mod:`hpsearch.svg`, normalized over the
range of plotted results (a constant range maps to the ramp midpoint).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .space import SearchSpace
from .store import TrialRecord, best_trial, load_experiment
from .svg import Svg, ramp_color, ramp_position, tick_label

log = logging.getLogger(__name__)

FIGURE_KINDS = ("result_over_index", "scatter", "parallel_coords", "worker_timeline", "contour")

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 90, 40, 60
RANDOM_COLOR = "#1f77b4"
BAYES_COLOR = "#d62728"
BEST_COLOR = "#1f77b4"
EXACT_TOL = 1e-9


class ReportError(ValueError):
    pass


@dataclass
class Figure:
    name: str
    svg: str
    csv: str | None = None


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _ok(records: Iterable[TrialRecord]) -> list[TrialRecord]:
    return sorted((r for r in records if r.ok), key=lambda r: r.set_index)


def _padded(lo: float, hi: float) -> tuple[float, float]:
    if hi > lo:
        pad = 0.05 * (hi - lo)
    else:
        pad = 0.05 * abs(lo) or 0.05
    return lo - pad, hi + pad


class _Frame:
    """Maps data coordinates onto the plot area and draws axes."""

    def __init__(self, svg: Svg, xr, yr, xlabel: str, ylabel: str, right: int = RIGHT):
        self.svg = svg
        self.x0, self.x1 = LEFT, WIDTH - right
        self.y0, self.y1 = HEIGHT - BOTTOM, TOP
        self.xr, self.yr = xr, yr
        svg.line(self.x0, self.y0, self.x1, self.y0, cls="axis")
        svg.line(self.x0, self.y0, self.x0, self.y1, cls="axis")
        for i in range(5):
            xv = xr[0] + (xr[1] - xr[0]) * i / 4
            yv = yr[0] + (yr[1] - yr[0]) * i / 4
            px, py = self.x(xv), self.y(yv)
            svg.line(px, self.y0, px, self.y0 + 5, cls="tick")
            svg.text(px, self.y0 + 18, tick_label(xv), anchor="middle", cls="tick-label")
            svg.line(self.x0 - 5, py, self.x0, py, cls="tick")
            svg.text(self.x0 - 8, py + 4, tick_label(yv), anchor="end", cls="tick-label")
        svg.text((self.x0 + self.x1) / 2, HEIGHT - 18, xlabel, anchor="middle", cls="axis-label", size=13)
        svg.text(18, (self.y0 + self.y1) / 2, ylabel, anchor="middle", cls="axis-label", size=13, rotate=-90)

    def x(self, v: float) -> float:
        return self.x0 + (v - self.xr[0]) / (self.xr[1] - self.xr[0]) * (self.x1 - self.x0)

    def y(self, v: float) -> float:
        return self.y0 - (v - self.yr[0]) / (self.yr[1] - self.yr[0]) * (self.y0 - self.y1)


def _colorbar(svg: Svg, lo: float, hi: float, label: str = "result") -> None:
    svg.gradient("ramp")
    x, y0, y1 = WIDTH - RIGHT + 25, HEIGHT - BOTTOM, TOP
    svg.rect(x, y1, 14, y0 - y1, fill="url(#ramp)", stroke="#333", cls="colorbar")
    svg.text(x + 18, y1 + 4, tick_label(hi), cls="tick-label")
    svg.text(x + 18, y0 + 4, tick_label(lo), cls="tick-label")
    svg.text(x + 7, y1 - 8, label, anchor="middle", cls="axis-label")


def _numeric_extent(space: SearchSpace, name: str) -> tuple[float, float]:
    if name not in space:
        raise ReportError(f"unknown parameter {name!r}")
    spec = space[name]
    if spec.kind == "continuous":
        return spec.low, spec.high
    if spec.kind == "discrete":
        return float(spec.values[0]), float(spec.values[-1])
    raise ReportError(f"parameter {name!r} is {spec.kind}; a numeric parameter is required")


# -- result over index ---------------------------------------------------------


def result_over_index(records: Sequence[TrialRecord]) -> Figure:
    ok = _ok(records)
    if not ok:
        raise ReportError("no successful trials to plot")
    idx = [r.set_index for r in ok]
    res = [r.result for r in ok]
    svg = Svg(WIDTH, HEIGHT, "Result per parameter set")
    fr = _Frame(svg, _padded(min(idx), max(idx)), _padded(min(res), max(res)), "parameter set index", "result", right=30)
    for r in ok:
        x, y = fr.x(r.set_index), fr.y(r.result)
        if r.provenance_class == "bayes":
            svg.cross(x, y, 5, BAYES_COLOR, cls="marker cross", **{"data-index": r.set_index})
        else:
            svg.circle(x, y, 4.5, fill=RANDOM_COLOR, cls="marker", **{"data-index": r.set_index})
    svg.text(fr.x1, TOP - 6, "● random / explicit", anchor="end", fill=RANDOM_COLOR, cls="legend")
    svg.text(fr.x1 - 150, TOP - 6, "✕ Bayesian optimization", anchor="end", fill=BAYES_COLOR, cls="legend")
    table = _csv(("set_index", "result", "provenance_class"), ((r.set_index, r.result, r.provenance_class) for r in ok))
    return Figure("fig_result_over_index", svg.to_string(), table)


# -- 2-D scatter ---------------------------------------------------------------


def scatter_2d(records: Sequence[TrialRecord], space: SearchSpace, px: str, py: str) -> Figure:
    xr, yr = _numeric_extent(space, px), _numeric_extent(space, py)
    ok = _ok(records)
    if not ok:
        raise ReportError("no successful trials to plot")
    lo, hi = min(r.result for r in ok), max(r.result for r in ok)
    best = best_trial(ok)
    svg = Svg(WIDTH, HEIGHT, f"{py} over {px}")
    fr = _Frame(svg, _padded(*xr), _padded(*yr), px, py)
    rows = []
    for r in ok:
        color = ramp_color(ramp_position(r.result, lo, hi))
        x, y = fr.x(float(r.values[px])), fr.y(float(r.values[py]))
        svg.circle(x, y, 5, fill=color, stroke="#222", width=0.5, cls="marker", **{"data-index": r.set_index})
        if r.provenance_class == "bayes":
            svg.cross(x, y, 4, "#000", width=1.0, cls="cross")
        svg.text(x + 7, y - 5, r.set_index, cls="label", size=9)
        rows.append((r.set_index, float(r.values[px]), float(r.values[py]), r.result, color))
    svg.circle(fr.x(float(best.values[px])), fr.y(float(best.values[py])), 11, stroke=BEST_COLOR, width=2.5,
               cls="best", **{"data-index": best.set_index})
    _colorbar(svg, lo, hi)
    table = _csv(("set_index", px, py, "result", "color"), rows)
    return Figure(f"fig_scatter_{px}_{py}", svg.to_string(), table)


# -- parallel coordinates ------------------------------------------------------


def _axis_positions(space: SearchSpace, name: str, records: Sequence[TrialRecord]) -> list[float]:
    spec = space[name]
    if spec.is_numeric:
        vals = [float(r.values[name]) for r in records]
        lo, hi = min(vals), max(vals)
        return [0.5 if hi == lo else (v - lo) / (hi - lo) for v in vals]
    k = len(spec.values)
    order = {v: i for i, v in enumerate(spec.values)}
    return [0.5 if k == 1 else order[r.values[name]] / (k - 1) for r in records]


def parallel_coords(records: Sequence[TrialRecord], space: SearchSpace) -> Figure:
    if len(space) < 2:
        raise ReportError("parallel coordinates need at least two parameters")
    ok = _ok(records)
    if not ok:
        raise ReportError("no successful trials to plot")
    lo, hi = min(r.result for r in ok), max(r.result for r in ok)
    svg = Svg(WIDTH, HEIGHT, "Parallel coordinates")
    names = space.names
    x0, x1, y0, y1 = LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP
    xs = [x0 + (x1 - x0) * i / (len(names) - 1) for i in range(len(names))]
    positions = {n: _axis_positions(space, n, ok) for n in names}
    # draw worst first so the best lines end up on top
    order = sorted(range(len(ok)), key=lambda i: (-ok[i].result, ok[i].set_index))
    for i in order:
        r = ok[i]
        pts = [(xs[j], y0 - positions[n][i] * (y0 - y1)) for j, n in enumerate(names)]
        svg.polyline(pts, ramp_color(ramp_position(r.result, lo, hi)), cls="trial", **{"data-index": r.set_index})
    for x, n in zip(xs, names):
        svg.line(x, y0, x, y1, stroke="#000", width=1.5, cls="axis")
        svg.text(x, y0 + 20, n, anchor="middle", cls="axis-label", size=13)
        spec = space[n]
        if spec.is_numeric:
            vals = [float(r.values[n]) for r in ok]
            svg.text(x + 4, y0 - 4, tick_label(min(vals)), cls="tick-label", size=9)
            svg.text(x + 4, y1 + 10, tick_label(max(vals)), cls="tick-label", size=9)
        else:
            k = len(spec.values)
            for j, v in enumerate(spec.values):
                t = 0.5 if k == 1 else j / (k - 1)
                svg.text(x + 4, y0 - t * (y0 - y1) + 3, v, cls="tick-label", size=9)
    _colorbar(svg, lo, hi)
    return Figure("fig_parallel_coords", svg.to_string(), None)


# -- worker timeline -----------------------------------------------------------


def worker_timeline(records: Sequence[TrialRecord], pool_size: int = 1) -> Figure:
    recs = sorted(records, key=lambda r: r.set_index)
    if not recs:
        raise ReportError("no trials to plot")
    for r in recs:
        if r.start_ts is None or r.end_ts is None:
            raise ReportError(f"trial {r.set_index} has no timestamps")
    lanes = sorted(set(range(pool_size)) | {r.worker_id for r in recs})
    by_lane: dict[int, list[TrialRecord]] = {w: [] for w in lanes}
    for r in recs:
        by_lane[r.worker_id].append(r)
    for w, rs in by_lane.items():
        rs.sort(key=lambda r: (r.start_ts, r.set_index))
        for a, b in zip(rs, rs[1:]):
            if b.start_ts < a.end_ts:
                raise ReportError(
                    f"worker {w} runs trials {a.set_index} and {b.set_index} at the same time"
                )

    t0 = min(r.start_ts for r in recs)
    t_end = max(r.end_ts for r in recs)
    span = max((t_end - t0) / 1e6, 1e-6)
    svg = Svg(WIDTH, HEIGHT, "Worker timeline")
    fr = _Frame(svg, (0.0, span * 1.02), (-0.5, len(lanes) - 0.5), "time since start [s]", "worker", right=30)
    lane_y = {w: i for i, w in enumerate(lanes)}
    h = min(18.0, 0.5 * (fr.y0 - fr.y1) / len(lanes))
    rows = []
    for r in recs:
        s, e = (r.start_ts - t0) / 1e6, (r.end_ts - t0) / 1e6
        yc = fr.y(lane_y[r.worker_id])
        xs, xe = fr.x(s), fr.x(e)
        cls = "bar" if r.ok else "bar failed"
        svg.rect(xs, yc - h / 2, max(xe - xs, 0.5), h, fill="#9ecae1" if r.ok else "#bbbbbb", stroke="#555",
                 cls=cls, **{"data-index": r.set_index})
        t = 5.0
        svg.polygon([(xs, yc - h / 2 - 1), (xs - t, yc - h / 2 - 1 - t), (xs + t, yc - h / 2 - 1 - t)], "#2ca02c",
                    cls="start", **{"data-index": r.set_index})
        svg.polygon([(xe, yc + h / 2 + 1), (xe - t, yc + h / 2 + 1 + t), (xe + t, yc + h / 2 + 1 + t)], "#d62728",
                    cls="end", **{"data-index": r.set_index})
        rows.append((r.set_index, r.worker_id, s, e, r.status))
    for w in lanes:
        svg.text(fr.x0 + 4, fr.y(lane_y[w]) - h / 2 - 8, f"w{w}", cls="lane-label", size=9)
    table = _csv(("set_index", "worker_id", "start_s", "end_s", "status"), rows)
    return Figure("fig_worker_timeline", svg.to_string(), table)


# -- interpolated contour ------------------------------------------------------


def idw_grid(points: np.ndarray, values: np.ndarray, grid: np.ndarray, power: float = 2.0) -> np.ndarray:
    """Inverse-distance weighting of ``values`` at ``points`` onto ``grid`` rows.

    A grid node within 1e-9 of a sample takes the value of its nearest sample
    (first one on ties), so the surface is exact at the data.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    d = np.sqrt(((grid[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    nearest = np.argmin(d, axis=1)
    exact = d[np.arange(len(grid)), nearest] <= EXACT_TOL
    with np.errstate(divide="ignore"):
        w = 1.0 / d**power
    w[exact] = 0.0
    out = np.empty(len(grid))
    out[~exact] = (w[~exact] @ values) / w[~exact].sum(axis=1)
    out[exact] = values[nearest[exact]]
    return out


def contour(records: Sequence[TrialRecord], space: SearchSpace, px: str, py: str, grid_n: int = 40) -> Figure:
    if grid_n < 2:
        raise ReportError("grid_n must be >= 2")
    xr, yr = _numeric_extent(space, px), _numeric_extent(space, py)
    ok = _ok(records)
    pts = np.array([[float(r.values[px]), float(r.values[py])] for r in ok]).reshape(-1, 2)
    if len({tuple(p) for p in pts}) < 3:
        raise ReportError("contour needs at least 3 trials at distinct points")
    res = np.array([r.result for r in ok])
    wx, wy = (xr[1] - xr[0]) or 1.0, (yr[1] - yr[0]) or 1.0
    unit = (pts - [xr[0], yr[0]]) / [wx, wy]
    g = np.linspace(0.0, 1.0, grid_n)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    vals = idw_grid(unit, res, grid)

    lo, hi = float(res.min()), float(res.max())
    best = best_trial(ok)
    svg = Svg(WIDTH, HEIGHT, f"Interpolated result: {py} over {px}")
    fr = _Frame(svg, xr if xr[1] > xr[0] else _padded(*xr), yr if yr[1] > yr[0] else _padded(*yr), px, py)
    cw = (fr.x1 - fr.x0) / (grid_n - 1)
    ch = (fr.y0 - fr.y1) / (grid_n - 1)
    rows = []
    for k, (u, v) in enumerate(grid):
        i, j = divmod(k, grid_n)
        xv, yv = xr[0] + u * wx, yr[0] + v * wy
        cx, cy = fr.x0 + u * (fr.x1 - fr.x0), fr.y0 - v * (fr.y0 - fr.y1)
        x_left, x_right = max(cx - cw / 2, fr.x0), min(cx + cw / 2, fr.x1)
        y_top, y_bot = max(cy - ch / 2, fr.y1), min(cy + ch / 2, fr.y0)
        color = ramp_color(ramp_position(vals[k], lo, hi))
        svg.rect(x_left, y_top, x_right - x_left, y_bot - y_top, fill=color, cls="cell")
        rows.append((i, j, xv, yv, float(vals[k])))
    for r, (x, y) in zip(ok, pts):
        svg.circle(fr.x(x), fr.y(y), 3, fill="#fff", stroke="#000", width=0.8, cls="marker",
                   **{"data-index": r.set_index})
    svg.circle(fr.x(float(best.values[px])), fr.y(float(best.values[py])), 10, stroke=BEST_COLOR, width=2.5,
               cls="best", **{"data-index": best.set_index})
    _colorbar(svg, lo, hi)
    table = _csv(("i", "j", px, py, "value"), rows)
    return Figure(f"fig_contour_{px}_{py}", svg.to_string(), table)


# -- experiment directory ------------------------------------------------------


def default_pair(space: SearchSpace) -> tuple[str, str] | None:
    numeric = [s.name for s in space if s.kind == "continuous"]
    numeric += [s.name for s in space if s.kind == "discrete"]
    return (numeric[0], numeric[1]) if len(numeric) >= 2 else None


def write_figure(fig: Figure, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{fig.name}.svg"]
    paths[0].write_text(fig.svg, encoding="utf-8")
    if fig.csv is not None:
        paths.append(out_dir / f"{fig.name}.csv")
        paths[1].write_text(fig.csv, encoding="utf-8")
    return paths


def render_experiment(
    directory,
    kinds: Sequence[str] | None = None,
    px: str | None = None,
    py: str | None = None,
    grid_n: int = 40,
) -> list[Figure]:
    """Render the selected figure kinds for an experiment directory into ``<dir>/figures``.

    With no explicit selection every applicable kind is produced; kinds that
    cannot apply (e.g. a contour with no numeric pair) are skipped with a
    warning. An explicitly selected kind that cannot be drawn raises.
    """
    exp = load_experiment(directory)
    if not exp.completed:
        log.warning("%s: experiment is incomplete; plotting the %d available trials", directory, len(exp.records))
    explicit = kinds is not None and len(kinds) > 0
    kinds = list(kinds) if explicit else list(FIGURE_KINDS)
    for k in kinds:
        if k not in FIGURE_KINDS:
            raise ReportError(f"unknown figure kind {k!r}; choose from {FIGURE_KINDS}")
    if (px is None) != (py is None):
        raise ReportError("give both x and y parameters or neither")
    pair = (px, py) if px is not None else default_pair(exp.space)

    figures: list[Figure] = []
    for k in kinds:
        try:
            if k == "result_over_index":
                figures.append(result_over_index(exp.records))
            elif k == "parallel_coords":
                figures.append(parallel_coords(exp.records, exp.space))
            elif k == "worker_timeline":
                figures.append(worker_timeline(exp.records, int(exp.meta.get("workers", 1))))
            elif pair is None:
                raise ReportError(f"{k} needs two numeric parameters")
            elif k == "scatter":
                figures.append(scatter_2d(exp.records, exp.space, *pair))
            else:
                figures.append(contour(exp.records, exp.space, *pair, grid_n=grid_n))
        except ReportError as exc:
            if explicit:
                raise
            log.warning("skipping %s: %s", k, exc)
    out_dir = Path(directory) / "figures"
    for fig in figures:
        write_figure(fig, out_dir)
    return figures
