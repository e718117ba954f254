"""File output and schemas.

Every file carries the resolved run configuration and the artifact
version: JSON payloads under "config"/"version" keys, CSVs as leading
'# key: value' comment lines.  All floats are written in round-trip
(shortest exact) form, so re-running an embedded configuration reproduces
the numeric payload byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ._version import __version__
from .dynamics import Trajectory
from .potential import TWO_PI, PotentialParams


def fmt(x) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else v
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


def write_json(path, payload: dict, meta: dict | None = None) -> None:
    doc = dict(payload)
    if meta:
        doc.update(meta)
    with open(path, "w") as f:
        json.dump(_jsonable(doc), f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    """CSV with '#'-prefixed metadata lines before the header row."""
    with open(path, "w", newline="") as f:
        if meta:
            for key, value in meta.items():
                f.write(f"# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n")
        w = csv.writer(f)
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def read_csv(path):
    """(meta dict, columns, rows of floats/strings) from write_csv output."""
    meta = {}
    rows = []
    columns = None
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, raw = line[2:].partition(": ")
                meta[key] = json.loads(raw)
                continue
            cells = next(csv.reader([line]))
            if columns is None:
                columns = cells
            else:
                parsed = []
                for c in cells:
                    try:
                        parsed.append(float(c))
                    except ValueError:
                        parsed.append(c)
                rows.append(parsed)
    return meta, columns, rows


def standard_meta(config_echo: dict | None) -> dict:
    meta = {"version": __version__}
    if config_echo is not None:
        meta["config"] = config_echo
    return meta


# --- trajectory ---------------------------------------------------------------

TRAJECTORY_COLUMNS = ["t", "x_lift", "x_mod_2pi", "y", "xdot", "ydot", "E", "V",
                      "winding"]


def trajectory_rows(traj: Trajectory):
    x_mod = np.mod(traj.x_lift, TWO_PI)
    E = traj.E
    V = traj.V
    wind = traj.winding
    for i in range(len(traj.ts)):
        yield (float(traj.ts[i]), float(traj.x_lift[i]), float(x_mod[i]),
               float(traj.y[i]), float(traj.xdot[i]), float(traj.ydot[i]),
               float(E[i]), float(V[i]), float(wind[i]))


def write_trajectory_csv(path, traj: Trajectory, config_echo: dict | None = None):
    write_csv(path, TRAJECTORY_COLUMNS, trajectory_rows(traj),
              standard_meta(config_echo))


def write_trajectory_json(path, traj: Trajectory, config_echo: dict | None = None):
    payload = {
        "columns": TRAJECTORY_COLUMNS,
        "rows": [list(r) for r in trajectory_rows(traj)],
    }
    write_json(path, payload, standard_meta(config_echo))


def read_trajectory_csv(path):
    """Rebuild a (piecewise-linear) trajectory from an exported CSV.

    The embedded config supplies the potential parameters and damping.
    Dense output of the reloaded trajectory interpolates linearly between
    the file's samples, so fine-tolerance audits need an inline rerun.
    """
    meta, columns, rows = read_csv(path)
    if columns[:6] != TRAJECTORY_COLUMNS[:6]:
        raise ValueError(f"{path} is not a trajectory export")
    cfg = meta.get("config", {})
    params = PotentialParams(lam=cfg.get("lam", 1.0), mu=cfg.get("mu", 1.0))
    damping = cfg.get("damping", 1.0)
    data = np.array([[r[0], r[1], r[3], r[4], r[5]] for r in rows])
    traj = Trajectory.from_polyline(params, damping, data[:, 0], data[:, 1:])
    return meta, traj


def events_payload(traj: Trajectory) -> list[dict]:
    out = []
    for rec in traj.events:
        out.append({
            "kind": rec.kind,
            "t_event": rec.t_event,
            "state": {
                "t": rec.state.t,
                "x_lift": rec.state.x_lift,
                "y": rec.state.y,
                "xdot": rec.state.vx,
                "ydot": rec.state.vy,
            },
        })
    return out


def write_events_json(path, traj: Trajectory, config_echo: dict | None = None):
    write_json(path, {"events": events_payload(traj)}, standard_meta(config_echo))


# --- construction reports ------------------------------------------------------


def sweep_payload(entries, lam: float) -> list[dict]:
    out = []
    for e in entries:
        exit_obj = None
        if e.exit_state is not None:
            exit_obj = {"x_mod_2pi": e.exit_state.x_lift % TWO_PI,
                        "y": e.exit_state.y}
        out.append({
            "n": e.label,
            "y0": e.y0,
            "lambda": lam,
            "t_n": "timeout" if e.timed_out else e.t_n,
            "exit": exit_obj,
            "winding_total": e.winding_total,
            "energy_initial": e.energy_initial,
            "energy_final": e.energy_final,
        })
    return out


def limitset_payload(report, candidates) -> dict:
    return {
        "epsilon": report.epsilon,
        "bins": report.bins,
        "covered": [bool(b) for b in report.covered],
        "first_passage": [None if math.isnan(t) else float(t)
                          for t in report.first_passage],
        "coverage": report.coverage,
        "candidates": list(candidates),
    }


# --- zero set -----------------------------------------------------------------

ZEROSET_COLUMNS = ["branch_k", "x_lift", "x_mod_2pi", "y"]


def zeroset_rows(branch):
    tag = "axis" if branch.k is None else branch.k
    x_mod = branch.x_mod_2pi
    for i in range(len(branch.y)):
        yield (tag, float(branch.x_lift[i]), float(x_mod[i]), float(branch.y[i]))


def write_zeroset_csv(path, branch, config_echo: dict | None = None):
    write_csv(path, ZEROSET_COLUMNS, zeroset_rows(branch),
              standard_meta(config_echo))


# --- geometry -----------------------------------------------------------------

MAP_GRID_COLUMNS = ["r", "theta_index", "phi_index", "target_x", "target_y",
                    "target_s1", "target_s2", "target_s3"]


def write_map_grid_csv(path, emap, radii, n_theta: int, n_phi: int,
                       config_echo: dict | None = None):
    from .geometry import map_grid_rows
    write_csv(path, MAP_GRID_COLUMNS,
              map_grid_rows(emap, radii, n_theta, n_phi),
              standard_meta(config_echo))
