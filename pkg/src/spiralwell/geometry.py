"""From cylinder trajectories back to maps of the ball.

A trajectory u(t) generates an equivariant map of an annulus via the
radial profile r = exp(t): p maps to (u1(log r) mod 2*pi, u2(log r),
+-p/|p|).  Two energy functionals are computed against each other: the
reduced line integral with weight exp((k-2) t), and (for a 3-d domain)
the direct radial quadrature of the full Dirichlet density, whose angular
part contributes 2/r^2 weighted by the metric coefficient 2 - V.

The kinetic parts of the two agree exactly in the continuum; the
potential parts differ by a factor-2 normalization which is reported, not
hidden (see energy_term_comparison).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import potential
from .dynamics import Trajectory
from .potential import TWO_PI, PotentialParams


def _ray_direction(p) -> np.ndarray:
    """Unit vector along p, scale-invariant by construction.

    Divides by the largest-magnitude component first, so any rescaling of
    p that keeps the components exactly representable reproduces the
    output bit for bit.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (3,):
        raise ValueError(f"need a 3-vector, got shape {p.shape}")
    k = int(np.argmax(np.abs(p)))
    if p[k] == 0.0:
        raise ValueError("cannot take a ray direction at the origin")
    u = p / p[k]
    s = u / math.sqrt(float(np.dot(u, u)))
    return s if p[k] > 0.0 else -s


@dataclass(frozen=True)
class EquivariantMap:
    """Equivariant annulus map generated by a trajectory profile.

    Defined for radii in [exp(t0 + t_shift), exp(t_end + t_shift)].
    from_exit_run shifts so the trajectory's final time lands at r = 1,
    giving an annulus inside the unit ball.
    """

    traj: Trajectory
    sign: int = 1
    m: int = 3
    t_shift: float = 0.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.m < 3:
            raise ValueError(f"source dimension must be >= 3, got {self.m}")

    @classmethod
    def from_exit_run(cls, traj: Trajectory, sign: int = 1, m: int = 3) -> "EquivariantMap":
        return cls(traj=traj, sign=sign, m=m, t_shift=-traj.t_end)

    @property
    def r_min(self) -> float:
        return math.exp(self.traj.t0 + self.t_shift)

    @property
    def r_max(self) -> float:
        return math.exp(self.traj.t_end + self.t_shift)

    def time_of_radius(self, r: float) -> float:
        return math.log(r) - self.t_shift

    def profile(self, r: float) -> np.ndarray:
        """Trajectory state (x_lift, y, xdot, ydot) at radius r."""
        if not (r > 0.0):
            raise ValueError(f"radius must be > 0, got {r}")
        t = self.time_of_radius(r)
        if t < self.traj.t0 - 1e-12 or t > self.traj.t_end + 1e-12:
            raise ValueError(
                f"radius {r} outside annulus [{self.r_min}, {self.r_max}]")
        t = min(max(t, self.traj.t0), self.traj.t_end)
        return self.traj.states_at(t)


def evaluate_map(emap: EquivariantMap, p) -> tuple[float, float, np.ndarray]:
    """Map a point of the annulus to (angle, height, sphere point)."""
    p = np.asarray(p, dtype=float)
    r = float(np.linalg.norm(p))
    if r == 0.0:
        raise ValueError("map is undefined at the origin")
    st = emap.profile(r)
    s = _ray_direction(p)
    if emap.sign < 0:
        s = -s
    return float(st[0] % TWO_PI), float(st[1]), s


@dataclass(frozen=True)
class TangentMap:
    """Ray-constant map into the axis circle: p -> (angle, 0, +-p/|p|)."""

    angle: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    def evaluate(self, p) -> tuple[float, float, np.ndarray]:
        s = _ray_direction(p)
        if self.sign < 0:
            s = -s
        return self.angle, 0.0, s


def tangent_map_from_angle(x_star: float, sign: int = 1) -> TangentMap:
    """Tangent-map candidate at axis angle x_star (reduced mod 2*pi)."""
    return TangentMap(angle=float(x_star) % TWO_PI, sign=sign)


# --- quadratures ---------------------------------------------------------------


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    """Classic adaptive Simpson with the 15x error estimate."""
    fa = f(a)
    m = 0.5 * (a + b)
    fm = f(m)
    fb = f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, m, b, fa, fm, fb, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth >= 50 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (rec(a, lm, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + rec(m, rm, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    return rec(a, m, b, fa, fm, fb, whole, tol, 0)


def _overlapping_steps(traj: Trajectory, t1: float, t2: float):
    """(step index, a, b) for each dense step clipped to [t1, t2]."""
    if traj.n_steps == 0:
        return
    i1 = max(0, int(np.searchsorted(traj.ts, t1, side="right")) - 1)
    i2 = min(traj.n_steps - 1, int(np.searchsorted(traj.ts, t2, side="left")) - 1)
    for i in range(i1, i2 + 1):
        a = max(float(traj.ts[i]), t1)
        b = min(float(traj.ts[i + 1]), t2)
        if b > a:
            yield i, a, b


def _step_state(traj: Trajectory, i: int):
    """Scalar dense evaluator local to step i (no bisection per call)."""
    co = traj.conts[i]
    t0 = traj.ts[i]
    h = traj._h[i]

    def at(t):
        th = (t - t0) / h
        th1 = 1.0 - th
        return co[0] + th * (co[1] + th1 * (co[2] + th * (co[3] + th1 * co[4])))

    return at


@dataclass(frozen=True)
class EnergyTerms:
    kinetic: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential


def reduced_energy_terms(traj: Trajectory, k: int, t1: float, t2: float,
                         params: PotentialParams | None = None,
                         tol: float = 1e-8,
                         weight_origin: float = 0.0) -> EnergyTerms:
    """Kinetic and metric parts of the reduced energy over [t1, t2].

    kinetic   = integral |udot|^2        * exp((k-2)(t - weight_origin))
    potential = integral (2 - V(u))      * exp((k-2)(t - weight_origin))

    weight_origin recenters the exponential weight; with weight_origin =
    t_end the weight stays <= 1, which keeps long windows finite.
    """
    if k < 3:
        raise ValueError(f"domain dimension k must be >= 3, got {k}")
    if not (t1 < t2):
        if t1 == t2:
            return EnergyTerms(0.0, 0.0)
        raise ValueError(f"need t1 <= t2, got ({t1}, {t2})")
    traj._check_domain(np.array([t1, t2]))
    pp = traj.params if params is None else params
    w = float(k - 2)
    span = t2 - t1
    kin = 0.0
    pot = 0.0
    for i, a, b in _overlapping_steps(traj, t1, t2):
        at = _step_state(traj, i)

        def f_kin(t):
            st = at(t)
            return (st[2] * st[2] + st[3] * st[3]) * math.exp(w * (t - weight_origin))

        def f_pot(t):
            st = at(t)
            v = potential.value_xy(pp, st[0], st[1])
            return (2.0 - v) * math.exp(w * (t - weight_origin))

        sub_tol = tol * (b - a) / span
        kin += _adaptive_simpson(f_kin, a, b, sub_tol)
        pot += _adaptive_simpson(f_pot, a, b, sub_tol)
    return EnergyTerms(kinetic=kin, potential=pot)


def reduced_energy(traj: Trajectory, k: int, t1: float, t2: float,
                   params: PotentialParams | None = None,
                   tol: float = 1e-8) -> float:
    """Reduced energy integral((|udot|^2 + 2 - V(u)) exp((k-2) t)) over
    [t1, t2]; strictly positive on any window of positive length."""
    return reduced_energy_terms(traj, k, t1, t2, params, tol).total


def full_energy_terms(emap: EquivariantMap, params: PotentialParams | None = None,
                      r1: float = None, r2: float = None,
                      tol: float = 1e-8) -> EnergyTerms:
    """Radial quadrature of the full Dirichlet energy over the annulus.

    Density (|v'(r)|^2 + (2 - V(v)) * 2/r^2) integrated against 4*pi*r^2 dr;
    using v'(r) = udot/r this is 4*pi * integral(|udot|^2 + 2(2 - V)) dr.
    Only the 3-d domain is supported: the angular factor 2/r^2 is the
    identity sphere map's density.
    """
    if emap.m != 3:
        raise ValueError(f"full energy quadrature supports m = 3 only, got m={emap.m}")
    traj = emap.traj
    pp = traj.params if params is None else params
    if r1 is None:
        r1 = emap.r_min
    if r2 is None:
        r2 = min(1.0, emap.r_max)
    if not (0.0 < r1 <= r2 <= 1.0):
        raise ValueError(f"need 0 < r1 <= r2 <= 1, got ({r1}, {r2})")
    eps = 1e-12
    if r1 < emap.r_min * (1.0 - eps) or r2 > emap.r_max * (1.0 + eps):
        raise ValueError(
            f"[{r1}, {r2}] outside annulus [{emap.r_min}, {emap.r_max}]")
    if r1 == r2:
        return EnergyTerms(0.0, 0.0)

    ta = emap.time_of_radius(r1)
    tb = emap.time_of_radius(r2)
    span = r2 - r1
    kin = 0.0
    ang = 0.0
    for i, a, b in _overlapping_steps(traj, ta, tb):
        at = _step_state(traj, i)
        ra = math.exp(a + emap.t_shift)
        rb = math.exp(b + emap.t_shift)
        ra = max(ra, r1)
        rb = min(rb, r2)
        if rb <= ra:
            continue

        def f_kin(r):
            st = at(emap.time_of_radius(r))
            return st[2] * st[2] + st[3] * st[3]

        def f_ang(r):
            st = at(emap.time_of_radius(r))
            v = potential.value_xy(pp, st[0], st[1])
            return 2.0 * (2.0 - v)

        sub_tol = tol * (rb - ra) / span
        kin += _adaptive_simpson(f_kin, ra, rb, sub_tol)
        ang += _adaptive_simpson(f_ang, ra, rb, sub_tol)
    four_pi = 4.0 * math.pi
    return EnergyTerms(kinetic=four_pi * kin, potential=four_pi * ang)


def full_energy_quadrature(emap: EquivariantMap,
                           params: PotentialParams | None = None,
                           r1: float = None, r2: float = None,
                           tol: float = 1e-8) -> float:
    """Full Dirichlet energy of the map over the annulus [r1, r2]."""
    return full_energy_terms(emap, params, r1, r2, tol).total


def energy_term_comparison(traj: Trajectory, T: float | None = None,
                           tol: float = 1e-10) -> dict:
    """Cross-check the two kinetic terms on the run's exit-aligned annulus.

    Builds the map with the trajectory end at r = 1, takes the window of
    length T (default: the whole run) and compares the kinetic part of the
    reduced energy (weighted to the same alignment) against the kinetic
    part of the radial quadrature.  The two agree in the continuum; the
    ratio of the potential-term normalizations (2x) is reported alongside.
    """
    emap = EquivariantMap.from_exit_run(traj)
    t_end = traj.t_end
    t1 = traj.t0 if T is None else t_end - T
    if t1 < traj.t0:
        raise ValueError(f"window T={T} exceeds trajectory length")
    red = reduced_energy_terms(traj, 3, t1, t_end, tol=tol, weight_origin=t_end)
    r1 = math.exp(t1 - t_end)
    full = full_energy_terms(emap, r1=r1, r2=1.0, tol=tol)
    four_pi = 4.0 * math.pi
    kin_ratio = four_pi * red.kinetic / full.kinetic if full.kinetic != 0.0 else math.nan
    pot_ratio = four_pi * red.potential / full.potential if full.potential != 0.0 else math.nan
    return {
        "reduced_kinetic": red.kinetic,
        "reduced_potential": red.potential,
        "full_kinetic": full.kinetic,
        "full_angular": full.potential,
        "kinetic_ratio": kin_ratio,
        "potential_ratio": pot_ratio,
        "r1": r1,
        "r2": 1.0,
    }


def map_grid_rows(emap: EquivariantMap, radii, n_theta: int, n_phi: int):
    """Rows for the map-grid export: sample the annulus map on a product
    grid of radii and sphere angles."""
    for r in radii:
        r = float(r)
        st = emap.profile(r)
        x_mod = float(st[0] % TWO_PI)
        yv = float(st[1])
        for i in range(n_theta):
            th = math.pi * (i + 0.5) / n_theta
            for j in range(n_phi):
                ph = TWO_PI * j / n_phi
                p = np.array([r * math.sin(th) * math.cos(ph),
                              r * math.sin(th) * math.sin(ph),
                              r * math.cos(th)])
                s = _ray_direction(p)
                if emap.sign < 0:
                    s = -s
                yield (r, i, j, x_mod, yv, float(s[0]), float(s[1]), float(s[2]))
