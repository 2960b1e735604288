"""Measurement layer: explored-cell metrics, time-scale estimates, exports.

The union explored-cell count is reconstructed here from the per-tick
newly-touched cells in the trace. It is the one centralized quantity in the
artifact and exists purely for evaluation; no agent ever holds it.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .engine import SimulationTrace
from .mapping import OccupancyGrid, to_pgm_bytes
from .world import WorldModel

CSV_VERSION_LINE = "# swarm-gridmapper csv v1"


class InsufficientData(ValueError):
    """Too few usable samples for the exponential fit."""


class NonNegativeSlope(ValueError):
    """Fit produced a non-decaying slope; no time constant exists."""


class WindowTooSmall(ValueError):
    """Smoothing window shorter than two ticks."""


@dataclass
class MetricsSeries:
    times: np.ndarray
    global_ce: np.ndarray
    per_agent_ce: dict[str, np.ndarray]
    alive_count: np.ndarray


def compute_metrics(trace: SimulationTrace) -> MetricsSeries:
    """Per-tick union explored count plus per-agent counts copied from the
    trace. Dead agents' cells stay in the union; their counts freeze."""
    times = np.array([r.t_s for r in trace.records])
    union = {fid: np.zeros(shape, dtype=bool) for fid, shape in trace.grid_shapes.items()}
    global_ce = np.zeros(len(trace.records), dtype=np.int64)
    per_agent = {aid: np.zeros(len(trace.records), dtype=np.int64) for aid in trace.agent_ids}
    alive = np.zeros(len(trace.records), dtype=np.int64)
    for k, rec in enumerate(trace.records):
        for aid, (rows, cols) in rec.new_cells.items():
            union[rec.floors[aid]][rows, cols] = True
        global_ce[k] = sum(int(u.sum()) for u in union.values())
        for aid in trace.agent_ids:
            per_agent[aid][k] = rec.per_agent_ce.get(aid, 0)
        alive[k] = rec.alive_count
    return MetricsSeries(times=times, global_ce=global_ce, per_agent_ce=per_agent, alive_count=alive)


def world_capacity(world: WorldModel, resolution: float) -> int:
    """Touchable-cell capacity: cells whose center is not inside an obstacle.

    Wall cells count (their surfaces are observable, and removable walls open
    up later); obstacle interiors do not.
    """
    grid = OccupancyGrid(world.extent, resolution)
    X, Y = grid.cell_center_arrays()
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    occupied = world.contains_points(pts, include_walls=False)
    return int((~occupied).sum())


def fit_time_constant(series: MetricsSeries, ce_inf: float) -> float:
    """Time constant of C(t) = C_inf * (1 - exp(-t / tau)) by ordinary least
    squares on ln(1 - C/C_inf) over samples with C/C_inf in (0.02, 0.98)."""
    if ce_inf < series.global_ce.max():
        raise ValueError(f"ce_inf {ce_inf} below observed maximum {series.global_ce.max()}")
    ratio = series.global_ce / float(ce_inf)
    band = (ratio > 0.02) & (ratio < 0.98)
    if band.sum() < 3:
        raise InsufficientData(f"only {int(band.sum())} samples inside the fit band")
    t = series.times[band]
    y = np.log(1.0 - ratio[band])
    slope, _ = np.polyfit(t, y, 1)
    if slope >= 0:
        raise NonNegativeSlope(f"fit slope {slope:.3g} is not negative")
    return float(-1.0 / slope)


def time_to_threshold(series: MetricsSeries, threshold: float):
    """First time the union count reaches the threshold, linearly
    interpolated between the bracketing samples; None when never reached."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    above = series.global_ce >= threshold
    if not above.any():
        return None
    k = int(np.argmax(above))
    if k == 0:
        return float(series.times[0])
    t0, t1 = series.times[k - 1], series.times[k]
    v0, v1 = series.global_ce[k - 1], series.global_ce[k]
    if v1 == v0:
        return float(t1)
    return float(t0 + (threshold - v0) * (t1 - t0) / (v1 - v0))


def rate_of_change(series: MetricsSeries, window_s: float) -> np.ndarray:
    """Smoothed dC/dt in cells per second.

    The union count is averaged over a centered window (shrinking symmetric
    at the edges so linear series stay exactly linear), then differenced
    centrally with one-sided stencils at the ends.
    """
    if len(series.times) < 2:
        raise WindowTooSmall("need at least two samples")
    dt = float(series.times[1] - series.times[0])
    half = int(round(window_s / dt)) // 2
    if int(round(window_s / dt)) < 2:
        raise WindowTooSmall(f"window {window_s}s is below two ticks")
    ce = series.global_ce.astype(np.float64)
    n = len(ce)
    smooth = np.empty(n)
    for k in range(n):
        h = min(half, k, n - 1 - k)
        smooth[k] = ce[k - h:k + h + 1].mean()
    rate = np.empty(n)
    rate[1:-1] = (smooth[2:] - smooth[:-2]) / (2.0 * dt)
    rate[0] = (smooth[1] - smooth[0]) / dt
    rate[-1] = (smooth[-1] - smooth[-2]) / dt
    return rate


def mean_rate(series: MetricsSeries, t0: float, t1: float) -> float:
    """Average dC/dt over (t0, t1], i.e. the count increase divided by the
    window length."""
    if t1 <= t0:
        raise ValueError("window must have positive length")
    c0 = float(np.interp(t0, series.times, series.global_ce))
    c1 = float(np.interp(t1, series.times, series.global_ce))
    return (c1 - c0) / (t1 - t0)


# --------------------------------------------------------------------------
# file output
# --------------------------------------------------------------------------

def run_csv_bytes(series: MetricsSeries, trace: SimulationTrace, capacity: int) -> bytes:
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    buf.write(f"# capacity {capacity}\n")
    writer = csv.writer(buf, lineterminator="\n")
    ids = list(trace.agent_ids)
    writer.writerow(["tick", "t_s", "global_Ce"] + [f"ce_{a}" for a in ids] + ["alive_count"])
    for k, rec in enumerate(trace.records):
        writer.writerow([rec.tick, f"{rec.t_s:.3f}", int(series.global_ce[k])]
                        + [int(series.per_agent_ce[a][k]) for a in ids]
                        + [int(series.alive_count[k])])
    return buf.getvalue().encode("ascii")


def read_run_csv(path) -> tuple[MetricsSeries, int]:
    with open(path, "r", encoding="ascii") as fh:
        version = fh.readline().strip()
        if version != CSV_VERSION_LINE:
            raise ValueError(f"{path}: unexpected csv version line {version!r}")
        cap_line = fh.readline().strip().split()
        capacity = int(cap_line[2])
        reader = csv.reader(fh)
        header = next(reader)
        agent_cols = [h[3:] for h in header if h.startswith("ce_")]
        times, ce, alive = [], [], []
        per_agent = {a: [] for a in agent_cols}
        for row in reader:
            times.append(float(row[1]))
            ce.append(int(row[2]))
            for i, a in enumerate(agent_cols):
                per_agent[a].append(int(row[3 + i]))
            alive.append(int(row[-1]))
    return MetricsSeries(
        times=np.array(times),
        global_ce=np.array(ce, dtype=np.int64),
        per_agent_ce={a: np.array(v, dtype=np.int64) for a, v in per_agent.items()},
        alive_count=np.array(alive, dtype=np.int64),
    ), capacity


def write_pgm(path, grid: OccupancyGrid) -> None:
    with open(path, "wb") as fh:
        fh.write(to_pgm_bytes(grid))


def connectivity_csv_bytes(trace: SimulationTrace) -> bytes:
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tick", "node_i", "node_j", "connected"])
    for rec in trace.records:
        snap = rec.snapshot
        for i, a in enumerate(snap.node_ids):
            for j in range(i + 1, len(snap.node_ids)):
                writer.writerow([rec.tick, a, snap.node_ids[j], int(snap.adjacency[i, j])])
    return buf.getvalue().encode("ascii")


# --------------------------------------------------------------------------
# preset execution
# --------------------------------------------------------------------------

def run_preset(preset, out_dir, trace_connectivity: bool = False) -> int:
    """Run every script x seed combination of a preset, writing one CSV and
    final per-agent PGMs per run plus a summary CSV aggregated from the
    per-run files. Returns a process exit status."""
    from .engine import Simulator

    try:
        os.makedirs(out_dir, exist_ok=True)
        run_files: list[tuple[str, str]] = []
        for label, script in preset.scripts:
            for seed in preset.seeds[: preset.repeats]:
                sim = Simulator(script.with_seed(seed))
                trace = sim.run()
                series = compute_metrics(trace)
                run_name = f"{preset.name}_{label}_seed{seed}"
                csv_path = os.path.join(out_dir, f"{run_name}.csv")
                _atomic_write(csv_path, run_csv_bytes(series, trace, preset.ce_inf))
                for aid, agent in sorted(sim.agents.items()):
                    write_pgm(os.path.join(out_dir, f"{run_name}_map_{aid}.pgm"), agent.grid)
                if trace_connectivity:
                    _atomic_write(os.path.join(out_dir, f"{run_name}_connectivity.csv"),
                                  connectivity_csv_bytes(trace))
                run_files.append((label, csv_path))
        summary = summarize_runs(run_files, preset.ce_inf, preset.method2_threshold)
        _atomic_write(os.path.join(out_dir, f"{preset.name}_summary.csv"), summary)
        return 0
    except (OSError, ValueError) as err:
        print(f"preset run failed: {err}")
        return 1


def summarize_runs(run_files, ce_inf: int, threshold: int) -> bytes:
    """Aggregate per-run CSVs into per-label mean/std of both time scales.

    Reads the run files back from disk so the summary is exactly a function
    of the published per-run data.
    """
    by_label: dict[str, list[tuple[float, float]]] = {}
    order: list[str] = []
    for label, path in run_files:
        series, _ = read_run_csv(path)
        try:
            tau = fit_time_constant(series, ce_inf)
        except (InsufficientData, NonNegativeSlope):
            tau = math.nan
        t_thr = time_to_threshold(series, threshold)
        if label not in by_label:
            by_label[label] = []
            order.append(label)
        by_label[label].append((tau, math.nan if t_thr is None else t_thr))

    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    buf.write(f"# ce_inf {ce_inf} threshold {threshold}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "runs", "tau_mean", "tau_std", "t_threshold_mean", "t_threshold_std"])
    for label in order:
        vals = np.array(by_label[label])
        writer.writerow([
            label, len(vals),
            f"{np.mean(vals[:, 0]):.4f}", f"{np.std(vals[:, 0]):.4f}",
            f"{np.mean(vals[:, 1]):.4f}", f"{np.std(vals[:, 1]):.4f}",
        ])
    return buf.getvalue().encode("ascii")


def _atomic_write(path, data: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
