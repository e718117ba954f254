"""Damped particle dynamics on the cylinder.

Equation of motion for a unit mass with viscous damping c > 0:

    xddot = -c*xdot - dV/dx,    yddot = -c*ydot - dV/dy

The physical energy E = |v|^2/2 + V(q) dissipates at rate -c*|v|^2, which
is the identity every trajectory here is audited against.  Integration is
an adaptive Dormand-Prince 5(4) pair with quartic dense output; events
(height and angle crossings) are bracketed on interpolant probes and
refined by bisection to 1e-12 in t.  Identical inputs produce bit-identical
trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backends, potential
from .potential import TWO_PI, CylinderPoint, PotentialParams

#: interpolant probes per accepted step, used for event bracketing and
#: by the post-hoc guards
PROBES_PER_STEP = 16

#: sup-norm bound on any state component before a run counts as blown up
BLOWUP_NORM = 1.0e6

# 5-node Gauss-Legendre rule on [-1, 1]; exact through degree 9, so it
# integrates |v(theta)|^2 of the quartic interpolant exactly
_GL_NODES = np.array([
    -0.906179845938664, -0.5384693101056831, 0.0,
    0.5384693101056831, 0.906179845938664,
])
_GL_WEIGHTS = np.array([
    0.23692688505618908, 0.47862867049936647, 0.5688888888888889,
    0.47862867049936647, 0.23692688505618908,
])


class BlowupError(RuntimeError):
    """State norm exceeded BLOWUP_NORM (anti-damped exploration only)."""

    def __init__(self, message, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


class StepUnderflowError(RuntimeError):
    """Step size controller drove h below resolvable size."""

    def __init__(self, message, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


class NegativeEnergyRequired(ValueError):
    """An audit was asked for on a run that does not start with E < 0."""


@dataclass(frozen=True)
class State:
    """Phase point: time, position on the cylinder, velocity."""

    t: float
    q: CylinderPoint
    v: tuple[float, float]

    def __post_init__(self):
        vals = (self.t, self.q.x_lift, self.q.y, self.v[0], self.v[1])
        if not all(math.isfinite(w) for w in vals):
            raise ValueError(f"non-finite state component in {vals}")

    @classmethod
    def of(cls, t: float, x: float, y: float, vx: float, vy: float) -> "State":
        return cls(t=float(t), q=CylinderPoint(float(x), float(y)),
                   v=(float(vx), float(vy)))

    @classmethod
    def rest(cls, x: float, y: float, t: float = 0.0) -> "State":
        return cls.of(t, x, y, 0.0, 0.0)

    @property
    def x_lift(self) -> float:
        return self.q.x_lift

    @property
    def y(self) -> float:
        return self.q.y

    @property
    def vx(self) -> float:
        return self.v[0]

    @property
    def vy(self) -> float:
        return self.v[1]


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration controls.  Fully deterministic: no seeds anywhere.

    damping: viscosity c > 0 (1 for a 3-d domain; m-2 in general).
    rel_tol/abs_tol: local error tolerances, each in (0, 1e-3].
    max_step: upper bound on the step size; the kernel additionally caps
        steps so the spiral phase advances at most ~0.1 rad per step.
    t_max: integration horizon; reaching it is a recorded timeout, not an
        error.
    """

    damping: float = 1.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 1.0
    t_max: float = 1e4

    def __post_init__(self):
        if not (self.damping > 0.0):
            raise ValueError(f"damping must be > 0, got {self.damping}")
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (0.0 < v <= 1e-3):
                raise ValueError(f"{name} must be in (0, 1e-3], got {v}")
        if not (self.max_step > 0.0):
            raise ValueError(f"max_step must be > 0, got {self.max_step}")
        if not (self.t_max > 0.0):
            raise ValueError(f"t_max must be > 0, got {self.t_max}")


@dataclass(frozen=True)
class EventSpec:
    """A crossing to watch for: kind 'height' (y = value) or 'angle'
    (x_lift = value mod 2*pi).  direction: +1 rising, -1 falling, 0 any
    (height only)."""

    kind: str
    value: float
    terminal: bool = True
    direction: int = 0

    def __post_init__(self):
        if self.kind not in ("height", "angle"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.direction not in (-1, 0, 1):
            raise ValueError(f"direction must be -1, 0 or 1, got {self.direction}")


@dataclass(frozen=True)
class EventRecord:
    kind: str  # height-crossing | angle-crossing | timeout | blowup
    t_event: float
    state: State
    refined: bool
    index: int = -1  # which entry of the event list fired; -1 for markers


_KIND_NAMES = {0: "height-crossing", 1: "angle-crossing", 2: "timeout", 3: "blowup"}


class Trajectory:
    """Immutable integration result with dense output.

    Samples live at the accepted step endpoints; `conts` holds the quartic
    interpolant coefficients of every step, so any quantity can be probed
    between samples.  The angle is the lift; `winding` counts turns
    relative to the first sample.
    """

    def __init__(self, params: PotentialParams, damping: float,
                 ts: np.ndarray, states: np.ndarray, conts: np.ndarray,
                 events: list[EventRecord], status: str,
                 nfev: int = 0, naccept: int = 0, nreject: int = 0,
                 anti_damped: bool = False):
        self.params = params
        self.damping = float(damping)
        self.ts = ts
        self.states = states
        self.conts = conts
        self.events = events
        self.status = status
        self.nfev = nfev
        self.naccept = naccept
        self.nreject = nreject
        self.anti_damped = anti_damped
        self._h = np.diff(ts)
        self._E = None
        self._V = None

    # --- domain and samples ---

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def n_steps(self) -> int:
        return len(self.ts) - 1

    @property
    def x_lift(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def xdot(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def ydot(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def V(self) -> np.ndarray:
        if self._V is None:
            self._V = potential.value_xy(self.params, self.x_lift, self.y)
        return self._V

    @property
    def E(self) -> np.ndarray:
        if self._E is None:
            self._E = 0.5 * (self.xdot ** 2 + self.ydot ** 2) + self.V
        return self._E

    @property
    def winding(self) -> np.ndarray:
        return (self.x_lift - self.x_lift[0]) / TWO_PI

    @property
    def terminal_event(self) -> EventRecord | None:
        for rec in reversed(self.events):
            if rec.kind in ("height-crossing", "angle-crossing"):
                return rec
        return None

    def initial_state(self) -> State:
        return State.of(self.ts[0], *self.states[0])

    def final_state(self) -> State:
        return State.of(self.ts[-1], *self.states[-1])

    # --- dense output ---

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.ts[0]) or np.any(t > self.ts[-1]):
            raise ValueError(
                f"time outside trajectory domain [{self.ts[0]}, {self.ts[-1]}]")
        return t

    def states_at(self, t) -> np.ndarray:
        """Dense-output state(s): (4,) for scalar t, (m, 4) for arrays."""
        t = self._check_domain(t)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        if self.n_steps == 0:
            out = np.repeat(self.states[:1], len(tt), axis=0)
            return out[0] if scalar else out
        idx = np.clip(np.searchsorted(self.ts, tt, side="right") - 1,
                      0, self.n_steps - 1)
        th = ((tt - self.ts[idx]) / self._h[idx])[:, None]
        th1 = 1.0 - th
        co = self.conts[idx]
        out = co[:, 0, :] + th * (co[:, 1, :] + th1 * (
            co[:, 2, :] + th * (co[:, 3, :] + th1 * co[:, 4, :])))
        return out[0] if scalar else out

    def state_at(self, t: float) -> State:
        return State.of(t, *self.states_at(float(t)))

    def iter_probes(self, per_step: int = PROBES_PER_STEP,
                    chunk: int = 65536):
        """Yield (times, states) arrays of interpolant probes.

        Each accepted step contributes `per_step` probes at
        theta = 1/per_step .. 1 (step starts are the previous step's end;
        the very first sample is not a probe).
        """
        th = np.arange(1, per_step + 1) / per_step
        th1 = (1.0 - th)[None, :, None]
        thb = th[None, :, None]
        for i0 in range(0, self.n_steps, chunk):
            i1 = min(i0 + chunk, self.n_steps)
            co = self.conts[i0:i1]
            out = co[:, None, 0, :] + thb * (co[:, None, 1, :] + th1 * (
                co[:, None, 2, :] + thb * (co[:, None, 3, :] + th1 * co[:, None, 4, :])))
            times = self.ts[i0:i1, None] + th[None, :] * self._h[i0:i1, None]
            yield times.reshape(-1), out.reshape(-1, 4)

    def energy_drift(self) -> float:
        """Largest per-step increase of E along the samples (0 if none)."""
        if len(self.ts) < 2:
            return 0.0
        return float(max(0.0, np.max(np.diff(self.E))))

    # --- synthetic construction (tests, CSV reload) ---

    @classmethod
    def from_polyline(cls, params: PotentialParams, damping: float,
                      ts, states) -> "Trajectory":
        """Piecewise-linear trajectory through the given samples.

        Dense output interpolates linearly; good enough for guards and
        winding on externally supplied sample data.
        """
        ts = np.asarray(ts, dtype=float)
        states = np.asarray(states, dtype=float)
        if ts.ndim != 1 or states.shape != (len(ts), 4):
            raise ValueError("need ts (n,) and states (n, 4)")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0.0):
            raise ValueError("sample times must be strictly increasing")
        n = len(ts) - 1
        conts = np.zeros((n, 5, 4))
        conts[:, 0, :] = states[:-1]
        conts[:, 1, :] = np.diff(states, axis=0)
        return cls(params, damping, ts, states, conts, [], "synthetic")


def _as_state(initial) -> State:
    if isinstance(initial, State):
        return initial
    raise TypeError(f"initial must be a State, got {type(initial).__name__}")


def rhs(params: PotentialParams, damping: float, s: State):
    """Right-hand side of the first-order system: (velocity, acceleration)."""
    gx, gy = potential.grad_V(params, s.q)
    return (s.vx, s.vy), (-damping * s.vx - gx, -damping * s.vy - gy)


def physical_energy(params: PotentialParams, s: State) -> float:
    """E = |v|^2 / 2 + V(q); non-increasing along every trajectory."""
    return 0.5 * (s.vx * s.vx + s.vy * s.vy) + potential.eval_V(params, s.q)


def _run_kernel(params, config, initial, events, damping, backend):
    kern = backends.get_kernel(backend)
    levels, lterm, ldir, angles, aterm = [], [], [], [], []
    for spec in events:
        if spec.kind == "height":
            levels.append(float(spec.value))
            lterm.append(bool(spec.terminal))
            ldir.append(int(spec.direction))
        else:
            angles.append(float(spec.value))
            aterm.append(bool(spec.terminal))
    return kern.integrate_adaptive(
        params.lam, params.mu, damping,
        initial.x_lift, initial.y, initial.vx, initial.vy,
        initial.t, initial.t + config.t_max,
        config.rel_tol, config.abs_tol, config.max_step, BLOWUP_NORM,
        tuple(levels), tuple(lterm), tuple(ldir), tuple(angles), tuple(aterm))


_STATUS_NAMES = {0: "timeout", 1: "event", 2: "blowup", 3: "step-underflow"}


def integrate(params: PotentialParams, config: IntegratorConfig,
              initial: State, events=(), backend: str | None = None,
              _damping_override: float | None = None,
              _anti_damped: bool = False) -> Trajectory:
    """Integrate up to the first terminal event or t_max.

    Raises BlowupError / StepUnderflowError (both carry the offending
    state and the partial trajectory).  Reaching t_max is a timeout event
    record, not an error.
    """
    initial = _as_state(initial)
    events = tuple(events)
    damping = config.damping if _damping_override is None else _damping_override
    status, ts, states, conts, raw_events, nfev, nacc, nrej = _run_kernel(
        params, config, initial, events, damping, backend)

    recs = []
    for kind, index, te, x, y, vx, vy, refined in raw_events:
        recs.append(EventRecord(kind=_KIND_NAMES[kind], t_event=te,
                                state=State.of(te, x, y, vx, vy),
                                refined=bool(refined), index=index))
    traj = Trajectory(params, damping, ts, states, conts, recs,
                      _STATUS_NAMES[status], nfev, nacc, nrej,
                      anti_damped=_anti_damped)
    if status == 2:
        raise BlowupError(
            f"state norm exceeded {BLOWUP_NORM:g} at t={traj.t_end}",
            state=traj.final_state(), trajectory=traj)
    if status == 3:
        raise StepUnderflowError(
            f"step size underflow at t={traj.t_end}",
            state=traj.final_state(), trajectory=traj)
    return traj


def explore_backward(params: PotentialParams, config: IntegratorConfig,
                     initial: State, backend: str | None = None) -> Trajectory:
    """Exploratory anti-damped run (the backward-time picture).

    Reversing time flips the sign of the viscosity, so energy grows and
    the blowup fence at norm 1e6 is expected to trip; the returned/attached
    trajectory uses the backward clock."""
    return integrate(params, config, initial, (), backend,
                     _damping_override=-config.damping, _anti_damped=True)


def integrate_fixed(params: PotentialParams, damping: float, initial: State,
                    h: float, n_steps: int, backend: str | None = None) -> State:
    """Fixed-step run of the same RK pair (self-convergence studies)."""
    initial = _as_state(initial)
    kern = backends.get_kernel(backend)
    x, y, vx, vy = kern.integrate_fixed(
        params.lam, params.mu, damping,
        initial.x_lift, initial.y, initial.vx, initial.vy,
        initial.t, h, n_steps)
    return State.of(initial.t + n_steps * h, x, y, vx, vy)


# --- energy audits ------------------------------------------------------------


def _kinetic_integral(traj: Trajectory, t1: float, t2: float) -> float:
    """Integral of |v|^2 over [t1, t2] on the dense output.

    Velocity components of the interpolant are quartic in theta, so the
    5-node Gauss-Legendre rule per step integrates |v|^2 exactly; this is
    the converged limit of refining a Simpson rule on the interpolant.
    """
    i1 = max(0, np.searchsorted(traj.ts, t1, side="right") - 1)
    i2 = min(traj.n_steps - 1, np.searchsorted(traj.ts, t2, side="left") - 1)
    idx = np.arange(i1, i2 + 1)
    a = np.maximum(traj.ts[idx], t1)
    b = np.minimum(traj.ts[idx + 1], t2)
    keep = b > a
    idx, a, b = idx[keep], a[keep], b[keep]
    if len(idx) == 0:
        return 0.0
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    tau = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    th = ((tau - traj.ts[idx][:, None]) / traj._h[idx][:, None])[:, :, None]
    th1 = 1.0 - th
    co = traj.conts[idx][:, :, None, 2:4]
    v = co[:, 0] + th * (co[:, 1] + th1 * (co[:, 2] + th * (co[:, 3] + th1 * co[:, 4])))
    speed2 = v[:, :, 0] ** 2 + v[:, :, 1] ** 2
    return float(np.sum(half * (speed2 @ _GL_WEIGHTS)))


def _energy_at(traj: Trajectory, t: float) -> float:
    x, y, vx, vy = traj.states_at(float(t))
    return 0.5 * (vx * vx + vy * vy) + potential.value_xy(traj.params, x, y)


def dissipation_residual(params: PotentialParams, traj: Trajectory,
                         t1: float, t2: float) -> float:
    """E(t2) - E(t1) + c * integral(|v|^2); zero for a faithful run."""
    if not (t1 < t2):
        raise ValueError(f"need t1 < t2, got ({t1}, {t2})")
    traj._check_domain(np.array([t1, t2]))
    e1 = _energy_at(traj, t1)
    e2 = _energy_at(traj, t2)
    return e2 - e1 + traj.damping * _kinetic_integral(traj, t1, t2)


@dataclass(frozen=True)
class VelocityBoundReport:
    max_kinetic: float
    max_neg_V: float
    negative_energy_start: bool
    ok: bool
    violations: list[int] = field(default_factory=list)


def velocity_bound_check(params: PotentialParams, traj: Trajectory,
                         tol: float = 1e-9) -> VelocityBoundReport:
    """Audit |v|^2/2 < 1 and <= sup(-V) along the run.

    Negative starting energy forces V(u(t)) <= E(t) < 0, hence
    |v|^2/2 <= E(0) - V < -V <= sup(-V) = 1.  Violating samples are
    listed; any violation signals integrator drift (or doctored input).
    """
    kin = 0.5 * (traj.xdot ** 2 + traj.ydot ** 2)
    neg_v = -traj.V
    max_kin = float(np.max(kin))
    max_neg_v = float(np.max(neg_v))
    neg_start = bool(traj.E[0] < 0.0)
    bad = np.nonzero((kin >= 1.0) | (kin > max_neg_v + tol))[0]
    ok = neg_start and len(bad) == 0 and max_kin < 1.0
    return VelocityBoundReport(max_kinetic=max_kin, max_neg_V=max_neg_v,
                               negative_energy_start=neg_start, ok=ok,
                               violations=[int(i) for i in bad])


@dataclass(frozen=True)
class ZeroSetGuardReport:
    min_sine_factor: float
    t_min: float
    ok: bool
    first_violation_t: float | None


def zero_set_guard(params: PotentialParams, traj: Trajectory,
                   probes_per_step: int = PROBES_PER_STEP) -> ZeroSetGuardReport:
    """Audit that the run never touches the zero set of V.

    With E(0) < 0, V(u(t)) <= E(t) < 0 for all t, which pins the particle
    inside {sin(x + mu/y) > 0}.  Checks every sample plus interpolant
    probes; reports the minimum sine factor seen and the first violation
    time, if any.
    """
    e0 = float(traj.E[0])
    if not (e0 < 0.0):
        raise NegativeEnergyRequired(
            f"zero-set guard precondition unmet: initial energy {e0} is not < 0")
    min_s = math.inf
    t_min = traj.t0
    first_bad = None

    def scan(times, xs, ys):
        nonlocal min_s, t_min, first_bad
        s = potential.sine_factor_xy(params, xs, ys)
        off_axis = ys != 0.0
        if np.any(off_axis):
            i = int(np.argmin(np.where(off_axis, s, np.inf)))
            if s[i] < min_s:
                min_s = float(s[i])
                t_min = float(times[i])
        bad = np.nonzero(off_axis & (s <= 0.0))[0]
        if len(bad) and (first_bad is None or times[bad[0]] < first_bad):
            first_bad = float(times[bad[0]])

    scan(traj.ts, traj.x_lift, traj.y)
    for times, states in traj.iter_probes(per_step=probes_per_step):
        scan(times, states[:, 0], states[:, 1])
    return ZeroSetGuardReport(min_sine_factor=float(min_s), t_min=t_min,
                              ok=first_bad is None, first_violation_t=first_bad)
