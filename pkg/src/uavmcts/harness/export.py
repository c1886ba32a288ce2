"""CSV export and standalone trajectory validation."""

from __future__ import annotations

import csv
import os
from pathlib import Path

from ..config import WorldConfig

METRICS_HEADER = ["algo", "seed", "episodes", "avg_reward", "avg_throughput_tasks", "total_energy_J", "playouts", "wall_ms"]
TRAJECTORY_HEADER = ["t", "hover_id", "x", "y", "z", "served_user", "tasks", "e_h", "e_c", "e_f1", "e_f2", "battery_J"]
SUMMARY_HEADER = [
    "algo", "episodes", "n_seeds", "avg_reward_mean", "avg_reward_std", "avg_throughput_mean", "avg_throughput_std",
]


def fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return f"{float(x):.6g}"


def ensure_writable(directory) -> Path:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


def _write(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def export_csv(result, directory, wall_clock: bool = False) -> list[Path]:
    """Write metrics.csv, summary.csv and one trajectory file per (algo, seed).

    Wall-clock times are not reproducible, so unless ``wall_clock`` is set the
    ``wall_ms`` column holds 0 and every file is a pure function of the
    configuration and seed.
    """
    out = ensure_writable(directory)
    written = []
    rows = sorted(result.metrics, key=lambda m: (m.algo, m.seed, m.episodes))
    _write(
        out / "metrics.csv",
        METRICS_HEADER,
        (
            [m.algo, m.seed, m.episodes, fmt(m.avg_reward), fmt(m.avg_throughput_tasks), fmt(m.total_energy_J),
             m.playouts, fmt(m.wall_ms if wall_clock else 0)]
            for m in rows
        ),
    )
    written.append(out / "metrics.csv")
    summary = result.summary()
    _write(
        out / "summary.csv",
        SUMMARY_HEADER,
        (
            [algo, ep, s["n_seeds"], fmt(s["avg_reward_mean"]), fmt(s["avg_reward_std"]),
             fmt(s["avg_throughput_mean"]), fmt(s["avg_throughput_std"])]
            for (algo, ep), s in summary.items()
        ),
    )
    written.append(out / "summary.csv")
    for (algo, seed), flight in sorted(result.traces.items()):
        path = out / f"trajectory_{algo}_{seed}.csv"
        _write(
            path,
            TRAJECTORY_HEADER,
            (
                [r.t, r.hover_id, fmt(r.x), fmt(r.y), fmt(r.z), r.served_user, r.tasks,
                 fmt(r.e_h), fmt(r.e_c), fmt(r.e_f1), fmt(r.e_f2), fmt(r.battery)]
                for r in flight.records
            ),
        )
        written.append(path)
    return written


def read_trajectory(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for r in reader:
            rows.append(
                {k: (int(v) if k in ("t", "hover_id", "served_user", "tasks") else float(v)) for k, v in r.items()}
            )
        return rows


def check_trace(path, config: WorldConfig, rel_tol: float = 1e-5) -> list[str]:
    """Replay an exported trajectory against the world rules.

    Returns human-readable violations; an empty list means the flight obeys
    fairness, the energy budget, the horizon and the region bounds. Exported
    values carry 6 significant digits, hence ``rel_tol``.
    """
    rows = read_trajectory(path)
    problems = []
    if len(rows) > config.tree_depth:
        problems.append(f"{len(rows)} intervals exceed horizon {config.tree_depth}")
    counts: dict[int, int] = {}
    spent = 0.0
    prev_battery = config.battery_e0
    e0 = config.battery_e0
    zmax = max(config.plane_heights) if config.is_3d else config.altitude
    for i, r in enumerate(rows):
        if r["t"] != i:
            problems.append(f"row {i}: time index {r['t']}")
        if not (0 <= r["hover_id"] < config.num_hover_points):
            problems.append(f"row {i}: hover id {r['hover_id']} out of range")
        if not (0 <= r["x"] <= config.region_size and 0 <= r["y"] <= config.region_size and 0 < r["z"] <= zmax):
            problems.append(f"row {i}: hover position out of bounds")
        energies = [r["e_h"], r["e_c"], r["e_f1"], r["e_f2"]]
        if min(energies) < 0:
            problems.append(f"row {i}: negative energy")
        u = r["served_user"]
        if u < 0:
            if r["tasks"] != 0 or r["e_h"] != 0:
                problems.append(f"row {i}: idle interval with tasks or hover energy")
        else:
            n = counts.get(u, 0)
            if n >= 2:
                problems.append(f"row {i}: user {u} served a third time")
            elif n == 1 and not r["tasks"] > config.task_threshold:
                problems.append(f"row {i}: second serve of user {u} with {r['tasks']} tasks <= threshold")
            counts[u] = n + 1
        if not 0 <= r["tasks"] <= config.u_max:
            problems.append(f"row {i}: tasks {r['tasks']} outside [0, u_max]")
        spent += sum(energies)
        if r["battery_J"] > prev_battery * (1 + rel_tol):
            problems.append(f"row {i}: battery increased")
        if abs((e0 - r["battery_J"]) - spent) > rel_tol * e0:
            problems.append(f"row {i}: battery does not match cumulative energy")
        prev_battery = r["battery_J"]
    if spent > config.energy_budget * (1 + rel_tol):
        problems.append(f"energy {spent:.6g} J exceeds budget {config.energy_budget:.6g} J")
    return problems
