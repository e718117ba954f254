"""Shooting family construction and its limit diagnostics.

A family member starts at rest in the spiral valley (sine factor exactly
1, so the physical energy is strictly negative) at a prescribed height
y0 and is integrated until it first reaches |y| = 1.  Descending-y0
sweeps give growing hitting times; recentering each member at its hitting
time exposes the common limiting orbit; winding totals and near-axis
angular coverage quantify how the orbit wraps the cylinder on its way out
of the flat region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, potential
from .dynamics import EventSpec, IntegratorConfig, State, Trajectory
from .potential import TWO_PI, PotentialParams

#: default tolerances for sweeps (acceptance-grade runs use 1e-10)
SWEEP_TOL = 1e-8


def family_initial(n: int) -> State:
    """Initial state of family member n: rest at (pi/2, 1/(2*pi*n)).

    With the default potential (lam = mu = 1) the sine factor at this
    point is sin(pi/2 + 2*pi*n) = 1, so the initial energy is the strictly
    negative -exp(-4*pi^2*n^2).
    """
    if n < 1:
        raise ValueError(f"family index must be >= 1, got {n}")
    return State.rest(0.5 * math.pi, 1.0 / (TWO_PI * n))


def initial_at_height(params: PotentialParams, y0: float) -> State:
    """Rest state at height y0 with the angle placed in the valley.

    x0 = (pi/2 - mu/y0) mod 2*pi makes sin(x0 + mu/y0) = 1 up to the
    reduction rounding, so the initial energy is -exp(-lam/y0^2) < 0.
    y0 = 0 sits on the flat axis; the angle defaults to pi/2 there.
    """
    if y0 == 0.0:
        return State.rest(0.5 * math.pi, 0.0)
    x0 = (0.5 * math.pi - params.mu / y0) % TWO_PI
    return State.rest(x0, y0)


@dataclass(frozen=True)
class FamilyMember:
    label: int
    initial: State

    @property
    def y0(self) -> float:
        return self.initial.y


@dataclass(frozen=True)
class FamilySpec:
    """A shooting family: shared potential/integrator, per-member starts.

    Construction validates that every member starts with E < 0; members
    whose envelope exp(-lam/y0^2) has underflowed to zero cannot satisfy
    this and are rejected.
    """

    members: tuple[FamilyMember, ...]
    params: PotentialParams
    config: IntegratorConfig

    def __post_init__(self):
        if not self.members:
            raise ValueError("family must have at least one member")
        for m in self.members:
            e0 = dynamics.physical_energy(self.params, m.initial)
            if not (e0 < 0.0):
                raise ValueError(
                    f"family member {m.label} (y0={m.initial.y}) has initial "
                    f"energy {e0}, not < 0; at lam={self.params.lam} this "
                    "height is inside the flat underflow region")

    @classmethod
    def from_indices(cls, ns, params: PotentialParams,
                     config: IntegratorConfig) -> "FamilySpec":
        members = tuple(FamilyMember(int(n), family_initial(int(n))) for n in ns)
        return cls(members=members, params=params, config=config)

    @classmethod
    def from_heights(cls, y0s, params: PotentialParams,
                     config: IntegratorConfig) -> "FamilySpec":
        members = tuple(
            FamilyMember(i + 1, initial_at_height(params, float(y0)))
            for i, y0 in enumerate(y0s))
        return cls(members=members, params=params, config=config)


@dataclass
class SweepEntry:
    """Outcome of one family member's run to |y| = 1."""

    label: int
    y0: float
    t_n: float | None  # None on timeout
    exit_state: State | None
    timed_out: bool
    trajectory: Trajectory
    energy_initial: float
    energy_final: float
    winding_total: float
    min_y: float
    max_y_before_exit: float


def _exit_events() -> tuple[EventSpec, EventSpec]:
    return (EventSpec("height", 1.0, terminal=True),
            EventSpec("height", -1.0, terminal=True))


def sweep_hitting_times(family: FamilySpec,
                        backend: str | None = None) -> list[SweepEntry]:
    """Run every member to its first |y| = 1 crossing.

    Entries come back in member order.  Each exit is checked to be through
    y = +1 with y confined to (0, 1) beforehand; a wrong-side exit or a
    prior escape from (0, 1) raises, since negative initial energy forbids
    both.  Timeouts are recorded per entry, not fatal.
    """
    entries = []
    for m in family.members:
        traj = dynamics.integrate(family.params, family.config, m.initial,
                                  _exit_events(), backend=backend)
        ev = traj.terminal_event
        e0 = float(traj.E[0])
        if ev is None:
            t_n = None
            exit_state = None
            timed_out = True
            t_check = traj.t_end
            e_final = float(traj.E[-1])
        else:
            t_n = ev.t_event
            exit_state = ev.state
            timed_out = False
            t_check = t_n
            e_final = dynamics.physical_energy(family.params, ev.state)
            if abs(exit_state.y - 1.0) > 1e-9:
                raise AssertionError(
                    f"member {m.label}: exit through y={exit_state.y}, "
                    "expected +1 (negative-energy runs cannot reach y=-1 "
                    "without first touching the axis)")

        min_y = math.inf
        max_y = -math.inf
        for times, states in traj.iter_probes():
            sel = times <= t_check
            if np.any(sel):
                ys = states[sel, 1]
                min_y = min(min_y, float(np.min(ys)))
                max_y = max(max_y, float(np.max(ys)))
        min_y = min(min_y, float(np.min(traj.y)))
        if not timed_out and min_y <= 0.0:
            raise AssertionError(
                f"member {m.label}: y reached {min_y} <= 0 before exit; "
                "impossible with E(0) < 0")

        wind_end = t_n if t_n is not None else traj.t_end
        entries.append(SweepEntry(
            label=m.label, y0=m.y0, t_n=t_n, exit_state=exit_state,
            timed_out=timed_out, trajectory=traj,
            energy_initial=e0, energy_final=e_final,
            winding_total=winding(traj, traj.t0, wind_end).total,
            min_y=min_y, max_y_before_exit=max_y))
    return entries


@dataclass(frozen=True)
class RecenteredRun:
    """A window of a family run shifted so the hitting time sits at 0.

    States are resampled from the dense output on a uniform grid of
    [-T, 0]; window time tau corresponds to source time t_n + tau.
    """

    label: int
    t_n: float
    window: float  # T >= 0
    taus: np.ndarray
    states: np.ndarray  # (grid, 4)
    params: PotentialParams

    @property
    def grid(self) -> int:
        return len(self.taus)

    @property
    def energies(self) -> np.ndarray:
        v = potential.value_xy(self.params, self.states[:, 0], self.states[:, 1])
        return 0.5 * (self.states[:, 2] ** 2 + self.states[:, 3] ** 2) + v


def recenter(traj: Trajectory, t_n: float, T: float, grid: int,
             label: int = 0) -> RecenteredRun:
    """Resample the window [t_n - T, t_n] onto a uniform grid.

    T = 0 degenerates to the single exit sample.  The window must lie
    inside the trajectory domain.
    """
    if T < 0.0:
        raise ValueError(f"window length must be >= 0, got {T}")
    if grid < 2:
        raise ValueError(f"grid must be >= 2, got {grid}")
    if t_n - T < traj.t0 or t_n > traj.t_end:
        raise ValueError(
            f"window [{t_n - T}, {t_n}] exits trajectory domain "
            f"[{traj.t0}, {traj.t_end}]")
    taus = np.array([0.0]) if T == 0.0 else np.linspace(-T, 0.0, grid)
    states = traj.states_at(t_n + taus)
    run = RecenteredRun(label=label, t_n=t_n, window=T, taus=taus,
                        states=states, params=traj.params)
    y_final = run.states[-1, 1]
    if abs(y_final - 1.0) > 1e-9:
        raise ValueError(f"window endpoint has y={y_final}, not an exit at 1")
    if np.any(run.states[:, 1] <= 0.0) or np.any(run.states[:, 1] > 1.0 + 1e-9):
        raise ValueError("window leaves the strip 0 < y <= 1")
    return run


def cauchy_gap(a: RecenteredRun, b: RecenteredRun) -> float:
    """Max phase-space distance over matched windows.

    Position part is the cylinder metric (circular distance in the angle
    plus height difference, combined euclidean); velocity part is plain
    euclidean.  A Cauchy-style diagnostic: successive gaps shrinking along
    a deepening sweep is the computable stand-in for convergence of the
    recentered family.
    """
    if a.window != b.window or a.grid != b.grid:
        raise ValueError(
            f"windows differ: T={a.window} grid={a.grid} vs "
            f"T={b.window} grid={b.grid}")
    dx = np.abs((a.states[:, 0] - b.states[:, 0]) % TWO_PI)
    dx = np.minimum(dx, TWO_PI - dx)
    dy = a.states[:, 1] - b.states[:, 1]
    dpos = np.sqrt(dx ** 2 + dy ** 2)
    dvel = np.sqrt((a.states[:, 2] - b.states[:, 2]) ** 2
                   + (a.states[:, 3] - b.states[:, 3]) ** 2)
    return float(np.max(dpos + dvel))


@dataclass(frozen=True)
class WindingReport:
    t1: float
    t2: float
    total: float  # turns, signed
    band_edges: np.ndarray
    band_turns: np.ndarray


def winding(traj: Trajectory, t1: float, t2: float,
            bands: int = 10) -> WindingReport:
    """Turns around the cylinder over [t1, t2], from the angle lift.

    total = (x_lift(t2) - x_lift(t1)) / (2*pi).  The profile splits the
    increments over `bands` equal height bands spanning the window's y
    range (by segment midpoint height).
    """
    traj._check_domain(np.array([t1, t2]))
    if not (t1 < t2):
        raise ValueError(f"need t1 < t2, got ({t1}, {t2})")
    sel = (traj.ts > t1) & (traj.ts < t2)
    times = np.concatenate(([t1], traj.ts[sel], [t2]))
    states = traj.states_at(times)
    x = states[:, 0]
    y = states[:, 1]
    total = (x[-1] - x[0]) / TWO_PI

    y_mid = 0.5 * (y[:-1] + y[1:])
    turns = np.diff(x) / TWO_PI
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bands + 1)
    band_turns, _ = np.histogram(y_mid, bins=edges, weights=turns)
    return WindingReport(t1=float(t1), t2=float(t2), total=float(total),
                         band_edges=edges, band_turns=band_turns)


@dataclass(frozen=True)
class LimitSetReport:
    """Near-axis angular coverage: which angle bins the run visits while
    0 < y < epsilon, with first-passage times."""

    epsilon: float
    bins: int
    covered: np.ndarray  # (bins,) bool
    first_passage: np.ndarray  # (bins,) float, nan where uncovered

    @property
    def coverage(self) -> float:
        return float(np.count_nonzero(self.covered)) / self.bins

    def bin_centers(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) * (TWO_PI / self.bins)


def limit_set_coverage(traj: Trajectory, epsilon: float = 0.12,
                       bins: int = 16) -> LimitSetReport:
    """Bin the angles of all near-axis interpolant probes.

    A bin is covered once some probe (or sample) lands in it with
    0 < y < epsilon; each such near-axis visit at angle x witnesses the
    tangent-map candidate sitting at (x, 0).
    """
    if not (0.0 < epsilon <= 0.5):
        raise ValueError(f"epsilon must be in (0, 0.5], got {epsilon}")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    covered = np.zeros(bins, dtype=bool)
    first = np.full(bins, np.nan)

    def scan(times, xs, ys):
        near = (ys > 0.0) & (ys < epsilon)
        if not np.any(near):
            return
        ang = np.mod(xs[near], TWO_PI)
        idx = np.minimum((ang / (TWO_PI / bins)).astype(int), bins - 1)
        tt = times[near]
        for b in np.unique(idx):
            t_first = float(np.min(tt[idx == b]))
            if not covered[b] or t_first < first[b]:
                covered[b] = True
                first[b] = t_first

    scan(traj.ts, traj.x_lift, traj.y)
    for times, states in traj.iter_probes():
        scan(times, states[:, 0], states[:, 1])
    return LimitSetReport(epsilon=float(epsilon), bins=int(bins),
                          covered=covered, first_passage=first)


def tangent_limit_candidates(report: LimitSetReport) -> list[float]:
    """Bin-center angles of the covered bins: one tangent-map candidate
    on the axis circle per visited bin."""
    centers = report.bin_centers()
    return [float(a) for a in centers[report.covered]]
