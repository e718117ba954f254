"""Command-line front end.

Commands: simulate, sweep, limitset, zeroset, energy-report.  Every value
can come from a flag or from a plain key=value config file (--config);
flags win on conflict.  The resolved configuration is echoed into every
output file, and outputs are deterministic: re-running an embedded
configuration reproduces the numeric payload byte for byte.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import geometry, reporting
from ._version import __version__
from .construction import (FamilySpec, initial_at_height, limit_set_coverage,
                           sweep_hitting_times, tangent_limit_candidates,
                           winding)
from .dynamics import (BlowupError, EventSpec, IntegratorConfig,
                       NegativeEnergyRequired, State, StepUnderflowError,
                       dissipation_residual, integrate, velocity_bound_check,
                       zero_set_guard)
from .potential import PotentialParams, zero_set_curves

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(Exception):
    pass


def _float_list(s: str) -> list[float]:
    vals = [v.strip() for v in str(s).split(",")]
    return [float(v) for v in vals if v != ""]


def _int_list(s: str) -> list[int]:
    return [int(v) for v in str(s).split(",") if v.strip() != ""]


def _int_range(s: str) -> tuple[int, int]:
    a, sep, b = str(s).partition(":")
    if not sep:
        return int(a), int(a)
    return int(a), int(b)


# option tables: flag, dest, converter, help
_POTENTIAL_OPTS = [
    ("--lambda", "lam", float, "flatness scale of the envelope (default 1)"),
    ("--mu", "mu", float, "winding rate of the spiral phase (default 1)"),
]
_INTEGRATOR_OPTS = [
    ("--damping", "damping", float, "viscosity c > 0 (default 1)"),
    ("--rel-tol", "rel_tol", float, "relative tolerance"),
    ("--abs-tol", "abs_tol", float, "absolute tolerance"),
    ("--max-step", "max_step", float, "step size upper bound (default 1)"),
    ("--t-max", "t_max", float, "integration horizon (default 1e4)"),
]
_OUTPUT_OPTS = [
    ("--out-dir", "out_dir", str, "output directory (required)"),
    ("--format", "fmt", str, "trajectory format: csv or json (default csv)"),
    ("--config", "config", str, "key=value config file; flags win"),
]

_COMMON_DEFAULTS = {
    "lam": 1.0, "mu": 1.0, "damping": 1.0,
    "rel_tol": 1e-10, "abs_tol": 1e-10, "max_step": 1.0, "t_max": 1e4,
    "fmt": "csv",
}

_COMMANDS: dict[str, dict] = {}


def _register(name, opts, defaults, runner, help_text):
    table = {}
    for flag, dest, conv, _ in opts:
        table[dest] = conv
    _COMMANDS[name] = {
        "opts": opts, "convs": table,
        "defaults": defaults, "runner": runner, "help": help_text,
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spiralwell",
        description="Damped-particle experiments on the cylinder with the "
                    "flat-axis spiral potential.")
    p.add_argument("--version", action="version", version=f"spiralwell {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, info in _COMMANDS.items():
        sp = sub.add_parser(name, help=info["help"])
        for flag, dest, conv, help_text in info["opts"]:
            sp.add_argument(flag, dest=dest, type=str, default=None, help=help_text)
    return p


def _load_config_file(path: str) -> dict:
    alias = {"lambda": "lam", "format": "fmt"}
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key = key.strip().replace("-", "_")
        out[alias.get(key, key)] = value.strip()
    return out


def _resolve(args, info) -> dict:
    file_values = {}
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
    cfg = {}
    for dest, conv in info["convs"].items():
        raw = getattr(args, dest, None)
        if raw is None and dest in file_values:
            raw = file_values[dest]
        if raw is None:
            cfg[dest] = info["defaults"].get(dest)
            continue
        try:
            cfg[dest] = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {dest}: {raw!r} ({exc})")
    unknown = set(file_values) - set(info["convs"])
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if not cfg.get("out_dir"):
        raise ConfigError("--out-dir is required")
    if cfg.get("fmt") not in (None, "csv", "json"):
        raise ConfigError(f"--format must be csv or json, got {cfg['fmt']}")
    return cfg


def _echo(command: str, cfg: dict) -> dict:
    echo = {"command": command}
    for key, value in cfg.items():
        if key == "config":
            continue
        echo[key] = value
    return echo


def _build_params(cfg) -> PotentialParams:
    try:
        return PotentialParams(lam=cfg["lam"], mu=cfg["mu"])
    except ValueError as exc:
        raise ConfigError(str(exc))


def _build_integrator(cfg) -> IntegratorConfig:
    try:
        return IntegratorConfig(damping=cfg["damping"], rel_tol=cfg["rel_tol"],
                                abs_tol=cfg["abs_tol"], max_step=cfg["max_step"],
                                t_max=cfg["t_max"])
    except ValueError as exc:
        raise ConfigError(str(exc))


def _initial_state(params, cfg) -> State:
    if cfg.get("y0") is None:
        raise ConfigError("--y0 is required")
    y0 = float(cfg["y0"])
    if cfg.get("x0") is not None:
        return State.rest(float(cfg["x0"]), y0)
    return initial_at_height(params, y0)


def _height_events(cfg) -> list[EventSpec]:
    heights = cfg.get("event_height") or []
    return [EventSpec("height", h, terminal=True) for h in heights]


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands ------------------------------------------------------------------


def _run_simulate(cfg) -> int:
    params = _build_params(cfg)
    icfg = _build_integrator(cfg)
    initial = _initial_state(params, cfg)
    traj = integrate(params, icfg, initial, _height_events(cfg))
    out = _out_dir(cfg)
    echo = _echo("simulate", cfg)

    if cfg["fmt"] == "json":
        reporting.write_trajectory_json(out / "trajectory.json", traj, echo)
    else:
        reporting.write_trajectory_csv(out / "trajectory.csv", traj, echo)
    reporting.write_events_json(out / "events.json", traj, echo)

    vb = velocity_bound_check(params, traj)
    residual = 0.0
    if traj.t_end > traj.t0:
        residual = dissipation_residual(params, traj, traj.t0, traj.t_end)
    ev = traj.terminal_event
    summary = {
        "status": traj.status,
        "t_end": traj.t_end,
        "samples": len(traj.ts),
        "E_initial": float(traj.E[0]),
        "E_final": float(traj.E[-1]),
        "energy_drift": traj.energy_drift(),
        "dissipation_residual": residual,
        "max_kinetic": vb.max_kinetic,
        "winding_total": float(traj.winding[-1]),
        "exit": None if ev is None else {
            "t_event": ev.t_event,
            "x_mod_2pi": ev.state.x_lift % (2.0 * math.pi),
            "y": ev.state.y,
        },
    }
    reporting.write_json(out / "summary.json", summary,
                         reporting.standard_meta(echo))
    return EXIT_OK


def _run_sweep(cfg) -> int:
    params = _build_params(cfg)
    icfg = _build_integrator(cfg)
    y0s = cfg.get("y0") or []
    n_range = cfg.get("n_range")
    try:
        if y0s:
            family = FamilySpec.from_heights(y0s, params, icfg)
        elif n_range is not None:
            family = FamilySpec.from_indices(range(n_range[0], n_range[1] + 1),
                                             params, icfg)
        else:
            raise ConfigError("sweep needs --y0 list or --n-range")
    except ValueError as exc:
        raise ConfigError(str(exc))
    entries = sweep_hitting_times(family)
    out = _out_dir(cfg)
    echo = _echo("sweep", cfg)
    reporting.write_json(out / "sweep.json",
                         {"entries": reporting.sweep_payload(entries, params.lam)},
                         reporting.standard_meta(echo))
    return EXIT_OK


def _run_limitset(cfg) -> int:
    params = _build_params(cfg)
    icfg = _build_integrator(cfg)
    initial = _initial_state(params, cfg)
    events = [EventSpec("height", 1.0, terminal=True),
              EventSpec("height", -1.0, terminal=True)]
    traj = integrate(params, icfg, initial, events)
    report = limit_set_coverage(traj, epsilon=cfg["epsilon"], bins=int(cfg["bins"]))
    candidates = tangent_limit_candidates(report)
    ev = traj.terminal_event
    out = _out_dir(cfg)
    echo = _echo("limitset", cfg)
    payload = reporting.limitset_payload(report, candidates)
    payload.update({
        "y0": initial.y,
        "t_n": None if ev is None else ev.t_event,
        "status": traj.status,
        "winding_total": float(traj.winding[-1]),
    })
    reporting.write_json(out / "limitset.json", payload,
                         reporting.standard_meta(echo))
    return EXIT_OK


def _run_zeroset(cfg) -> int:
    params = _build_params(cfg)
    if cfg.get("k_range") is None:
        raise ConfigError("--k-range is required")
    k1, k2 = cfg["k_range"]
    if k2 < k1:
        raise ConfigError(f"empty k range {k1}:{k2}")
    try:
        branches = zero_set_curves(params, (k1, k2), y_min=cfg["y_min"],
                                   samples=int(cfg["samples"]), y_max=cfg["y_max"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    out = _out_dir(cfg)
    echo = _echo("zeroset", cfg)
    for branch in branches:
        name = "zeroset_axis.csv" if branch.k is None else f"zeroset_branch_{branch.k}.csv"
        reporting.write_zeroset_csv(out / name, branch, echo)
    return EXIT_OK


def _run_energy_report(cfg) -> int:
    out = _out_dir(cfg)
    echo = _echo("energy-report", cfg)
    if cfg.get("traj"):
        try:
            meta, traj = reporting.read_trajectory_csv(cfg["traj"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load trajectory {cfg['traj']}: {exc}")
        params = traj.params
        source = str(cfg["traj"])
    else:
        params = _build_params(cfg)
        icfg = _build_integrator(cfg)
        initial = _initial_state(params, cfg)
        traj = integrate(params, icfg, initial, _height_events(cfg))
        source = "inline"

    t0, t_end = traj.t0, traj.t_end
    segs = max(1, int(cfg["segments"]))
    residuals = []
    if t_end > t0:
        edges = [t0 + (t_end - t0) * i / segs for i in range(segs + 1)]
        for a, b in zip(edges[:-1], edges[1:]):
            residuals.append({"t1": a, "t2": b,
                              "residual": dissipation_residual(params, traj, a, b)})
        full_residual = dissipation_residual(params, traj, t0, t_end)
    else:
        full_residual = 0.0

    vb = velocity_bound_check(params, traj)
    try:
        guard = zero_set_guard(params, traj)
        guard_payload = {"min_sine_factor": guard.min_sine_factor,
                         "ok": guard.ok,
                         "first_violation_t": guard.first_violation_t}
    except NegativeEnergyRequired as exc:
        guard_payload = {"precondition_unmet": str(exc)}

    reduced = {}
    for k in cfg["k"]:
        terms = geometry.reduced_energy_terms(traj, int(k), t0, t_end,
                                              weight_origin=t_end)
        reduced[str(k)] = {"kinetic": terms.kinetic,
                           "potential": terms.potential,
                           "total": terms.total}

    comparison = None
    if traj.n_steps > 0:
        comparison = geometry.energy_term_comparison(traj, T=cfg.get("window"))

    payload = {
        "source": source,
        "domain": [t0, t_end],
        "dissipation_residual_full": full_residual,
        "dissipation_residuals": residuals,
        "velocity_bound": {
            "max_kinetic": vb.max_kinetic,
            "max_neg_V": vb.max_neg_V,
            "negative_energy_start": vb.negative_energy_start,
            "ok": vb.ok,
            "violations": vb.violations,
        },
        "zero_set_guard": guard_payload,
        "reduced_energy_exit_aligned": reduced,
        "kinetic_term_comparison": comparison,
    }
    reporting.write_json(out / "energy_report.json", payload,
                         reporting.standard_meta(echo))
    return EXIT_OK


_register("simulate",
          _POTENTIAL_OPTS + _INTEGRATOR_OPTS + _OUTPUT_OPTS + [
              ("--y0", "y0", float, "initial height (rest start)"),
              ("--x0", "x0", float, "initial angle; default puts the start "
                                    "in the valley (sine factor 1)"),
              ("--event-height", "event_height", _float_list,
               "terminal height crossing(s), comma separated"),
          ],
          dict(_COMMON_DEFAULTS),
          _run_simulate,
          "integrate one trajectory; writes trajectory, events, summary")

_register("sweep",
          _POTENTIAL_OPTS + _INTEGRATOR_OPTS + _OUTPUT_OPTS + [
              ("--y0", "y0", _float_list, "descending list of start heights"),
              ("--n-range", "n_range", _int_range,
               "family indices lo:hi (starts at (pi/2, 1/(2 pi n)))"),
          ],
          {**_COMMON_DEFAULTS, "rel_tol": 1e-8, "abs_tol": 1e-8},
          _run_sweep,
          "hitting-time sweep over a family of start heights")

_register("limitset",
          _POTENTIAL_OPTS + _INTEGRATOR_OPTS + _OUTPUT_OPTS + [
              ("--y0", "y0", float, "start height (deep starts cover more)"),
              ("--x0", "x0", float, "initial angle; default valley"),
              ("--epsilon", "epsilon", float, "near-axis height threshold"),
              ("--bins", "bins", int, "angle bins on the axis circle"),
          ],
          {**_COMMON_DEFAULTS, "rel_tol": 1e-8, "abs_tol": 1e-8,
           "epsilon": 0.12, "bins": 16},
          _run_limitset,
          "near-axis angular coverage and tangent-map candidates")

_register("zeroset",
          _POTENTIAL_OPTS + _OUTPUT_OPTS + [
              ("--k-range", "k_range", _int_range, "branch indices lo:hi"),
              ("--y-min", "y_min", float, "smallest sampled height (> 0)"),
              ("--y-max", "y_max", float, "largest sampled height"),
              ("--samples", "samples", int, "points per branch"),
          ],
          {**_COMMON_DEFAULTS, "y_min": 0.05, "y_max": 1.0, "samples": 512},
          _run_zeroset,
          "export the spiral zero-set branches and the axis")

_register("energy-report",
          _POTENTIAL_OPTS + _INTEGRATOR_OPTS + _OUTPUT_OPTS + [
              ("--traj", "traj", str, "existing trajectory CSV to audit "
                                      "(coarse: samples only)"),
              ("--y0", "y0", float, "inline run: initial height"),
              ("--x0", "x0", float, "inline run: initial angle"),
              ("--event-height", "event_height", _float_list,
               "inline run: terminal height crossing(s)"),
              ("--window", "window", float,
               "window length for the kinetic-term comparison"),
              ("--k", "k", _int_list, "domain dimensions for reduced energy"),
              ("--segments", "segments", int, "residual partition count"),
          ],
          {**_COMMON_DEFAULTS, "k": [3], "segments": 4},
          _run_energy_report,
          "dissipation residuals, velocity bound, energy quadratures")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    info = _COMMANDS[args.command]
    try:
        cfg = _resolve(args, info)
        return info["runner"](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowupError, StepUnderflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
