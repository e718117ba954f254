"""Flat-axis spiral potential on the cylinder S1 x R.

    V(x, y) = -exp(-lam / y**2) * sin(x + mu / y)

The exponential envelope is flat at y = 0 (every y-derivative vanishes
there), so the whole axis consists of critical points; off the axis the
zero set of V is the family of spiral branches x + mu/y = k*pi, which wind
around the cylinder without bound as y -> 0.  With lam = mu = 1 this is
the classical two-parameter family's base point; smaller lam makes the
envelope exp(-lam/y**2) come alive at desk-scale heights.

Angles are always stored as lifts on the real line.  Reduction mod 2*pi
happens only at output boundaries (display, binning); winding counts need
the lift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# exp(-q) for q > 700 is below ~1e-304 and dynamically irrelevant; the
# envelope and the gradient are defined as exactly zero past this point.
UNDERFLOW_Q = 700.0


@dataclass(frozen=True)
class PotentialParams:
    """Parameters of the potential family.

    lam: flatness scale of the envelope exp(-lam/y**2), dimensionless, > 0.
    mu:  winding rate of the spiral phase x + mu/y, dimensionless, > 0.

    Defaults (1, 1) reproduce the base potential exactly.
    """

    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (self.lam > 0.0):
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not (self.mu > 0.0):
            raise ValueError(f"mu must be > 0, got {self.mu}")


@dataclass(frozen=True)
class CylinderPoint:
    """A point on the cylinder, with the angle stored as a lift in R."""

    x_lift: float
    y: float

    @property
    def angle(self) -> float:
        """Angle reduced to [0, 2*pi)."""
        return self.x_lift % TWO_PI


def _as_xy(p) -> tuple[float, float]:
    if isinstance(p, CylinderPoint):
        return p.x_lift, p.y
    x, y = p
    return float(x), float(y)


def _envelope_and_phase(params: PotentialParams, x, y):
    """Broadcast arrays (live mask, envelope, sin phase, cos phase).

    Outside the live mask (axis or underflow region) envelope is exactly 0
    and the trig arrays are left at 0; callers must mask with `live`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    with np.errstate(divide="ignore"):
        q = params.lam / (y * y)
    live = (y != 0.0) & (q <= UNDERFLOW_Q)
    env = np.zeros(live.shape)
    s = np.zeros(live.shape)
    c = np.zeros(live.shape)
    if np.any(live):
        yl = y[live]
        ph = x[live] + params.mu / yl
        env[live] = np.exp(-q[live])
        s[live] = np.sin(ph)
        c[live] = np.cos(ph)
    return live, env, s, c, y


def value_xy(params: PotentialParams, x, y):
    """V on arrays of (x, y); scalar in, scalar out."""
    live, env, s, _, _ = _envelope_and_phase(params, x, y)
    out = np.zeros(live.shape)
    out[live] = -env[live] * s[live]
    return float(out) if out.ndim == 0 else out


def grad_xy(params: PotentialParams, x, y):
    """(dV/dx, dV/dy) on arrays of (x, y); exactly (0, 0) on the axis and
    in the underflow region."""
    live, env, s, c, yb = _envelope_and_phase(params, x, y)
    gx = np.zeros(live.shape)
    gy = np.zeros(live.shape)
    if np.any(live):
        yl = yb[live]
        inv_y2 = 1.0 / (yl * yl)
        gx[live] = -env[live] * c[live]
        gy[live] = (-2.0 * params.lam * inv_y2 / yl * env[live] * s[live]
                    + params.mu * inv_y2 * env[live] * c[live])
    if gx.ndim == 0:
        return float(gx), float(gy)
    return gx, gy


def sine_factor_xy(params: PotentialParams, x, y):
    """sin(x + mu/y), the sign-carrying factor of V; defined as 0 on the
    axis (where V vanishes identically).

    Computed directly from the phase so it stays meaningful where the
    envelope has underflowed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    out = np.zeros(x.shape)
    off = y != 0.0
    if np.any(off):
        out[off] = np.sin(x[off] + params.mu / y[off])
    return float(out) if out.ndim == 0 else out


# --- spec'd point operations ------------------------------------------------

def eval_V(params: PotentialParams, p) -> float:
    """Potential at a cylinder point.  Total: y = 0 is allowed and gives 0."""
    x, y = _as_xy(p)
    return value_xy(params, x, y)


def grad_V(params: PotentialParams, p) -> tuple[float, float]:
    """Gradient (dV/dx, dV/dy) at a cylinder point.

    dV/dx = -exp(-lam/y^2) cos(x + mu/y)
    dV/dy = -(2 lam/y^3) exp(-lam/y^2) sin(x + mu/y)
            + (mu/y^2) exp(-lam/y^2) cos(x + mu/y)
    """
    x, y = _as_xy(p)
    return grad_xy(params, x, y)


def metric_coefficient(params: PotentialParams, p) -> float:
    """Coefficient 2 - V of the fibre direction in the target metric.

    Always in [1, 3] since |V| <= 1, hence strictly positive: the metric
    stays complete.
    """
    return 2.0 - eval_V(params, p)


def in_negative_region(params: PotentialParams, p) -> bool:
    """True iff V(p) < 0, decided from the sine factor alone.

    V < 0 is equivalent to sin(x + mu/y) > 0 for y != 0, and the sine
    factor never underflows, so the predicate keeps its meaning arbitrarily
    close to the axis.  On the axis itself V = 0.
    """
    x, y = _as_xy(p)
    if y == 0.0:
        return False
    return math.sin(x + params.mu / y) > 0.0


# --- zero set ----------------------------------------------------------------

@dataclass(frozen=True)
class ZeroSetBranch:
    """One sampled branch of {V = 0}.

    k is the branch index (phase x + mu/y = k*pi); k = None marks the axis
    branch y = 0.
    """

    k: int | None
    x_lift: np.ndarray
    y: np.ndarray

    @property
    def x_mod_2pi(self) -> np.ndarray:
        return np.mod(self.x_lift, TWO_PI)


def zero_set_curves(params: PotentialParams, k_range, y_min: float,
                    samples: int = 512, y_max: float = 1.0) -> list[ZeroSetBranch]:
    """Sample the zero set {V = 0}: spiral branches plus the axis.

    Branch k is the curve x = k*pi - mu/y for y in [y_min, y_max], sampled
    uniformly in 1/y so the near-axis winding is resolved evenly.  The
    returned list ends with the axis branch (k = None, y = 0).

    k_range: iterable of ints, or an inclusive (lo, hi) pair.
    """
    if not (y_min > 0.0):
        raise ValueError(f"y_min must be > 0, got {y_min}")
    if not (y_max > y_min):
        raise ValueError(f"y_max must exceed y_min, got {y_max}")
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    if isinstance(k_range, tuple) and len(k_range) == 2:
        ks = range(int(k_range[0]), int(k_range[1]) + 1)
    else:
        ks = [int(k) for k in k_range]

    u = np.linspace(1.0 / y_max, 1.0 / y_min, samples)
    y = 1.0 / u
    branches = [
        ZeroSetBranch(k=k, x_lift=k * math.pi - params.mu * u, y=y.copy())
        for k in ks
    ]
    x_axis = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    branches.append(ZeroSetBranch(k=None, x_lift=x_axis, y=np.zeros(samples)))
    return branches
