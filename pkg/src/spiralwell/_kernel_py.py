"""Pure-Python stepping kernel: adaptive Dormand-Prince 5(4).

This is the fallback twin of the compiled kernel (_kernel.pyx).  The two
are kept line-for-line parallel, with identical arithmetic ordering, so
that a given run produces bit-identical trajectories on either backend.
Any change here must be mirrored there.

State layout is (x_lift, y, xdot, ydot) for a unit mass with viscous
damping c in the potential V(x, y) = -exp(-lam/y^2) sin(x + mu/y):

    xddot = -c*xdot - dV/dx
    yddot = -c*ydot - dV/dy

Besides local error control, steps are capped so the phase x + mu/y and
the transverse valley oscillation advance at most ~0.1 rad per step.
"""

from __future__ import annotations

from array import array
from math import cos, exp, fabs, sin, sqrt

import numpy as np

BACKEND = "python"

# Dormand-Prince 5(4) tableau
A21 = 1.0 / 5.0
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0
C2 = 1.0 / 5.0
C3 = 3.0 / 10.0
C4 = 4.0 / 5.0
C5 = 8.0 / 9.0
B1 = 35.0 / 384.0
B3 = 500.0 / 1113.0
B4 = 125.0 / 192.0
B5 = -2187.0 / 6784.0
B6 = 11.0 / 84.0
# embedded error weights (5th - 4th order)
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0
# dense-output weights (quartic interpolant)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0

UNDERFLOW_Q = 700.0
SAFE = 0.9
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
EVENT_T_TOL = 1e-12
PROBES = 16

# event/status codes shared with the compiled kernel
EV_HEIGHT = 0
EV_ANGLE = 1
EV_TIMEOUT = 2
EV_BLOWUP = 3
ST_TIMEOUT = 0
ST_EVENT = 1
ST_BLOWUP = 2
ST_UNDERFLOW = 3


def grad_potential(lam, mu, x, y):
    """(V, dV/dx, dV/dy) with the flat-axis underflow guard."""
    if y != 0.0:
        inv_y2 = 1.0 / (y * y)
        q = lam * inv_y2
        if q <= UNDERFLOW_Q:
            amp = exp(-q)
            ph = x + mu / y
            s = sin(ph)
            co = cos(ph)
            gx = -amp * co
            gy = -2.0 * lam * inv_y2 / y * amp * s + mu * inv_y2 * amp * co
            return -amp * s, gx, gy
    return 0.0, 0.0, 0.0


def _accel(lam, mu, c, x, y, vx, vy):
    _, gx, gy = grad_potential(lam, mu, x, y)
    return -c * vx - gx, -c * vy - gy


def _step_cap(lam, mu, x, y, vx, vy):
    """Largest step consistent with ~0.1 rad of phase/oscillation advance.

    rate bounds |d/dt (x + mu/y)| plus the transverse valley frequency
    (mu/y^2) * exp(-lam/(2 y^2)); where the envelope is dead the potential
    is flat and no cap is needed.  Bounded-energy runs keep |v| < sqrt(2),
    so far beyond that (anti-damped exploration) the bounded force is
    negligible against the momentum and the cap is dropped: plain error
    control governs.
    """
    if fabs(vx) + fabs(vy) > 16.0:
        return float("inf")
    if y != 0.0:
        inv_y2 = 1.0 / (y * y)
        q = lam * inv_y2
        if q <= 2.0 * UNDERFLOW_Q:
            osc = exp(-0.5 * q)
        else:
            osc = 0.0
        rate = fabs(vx) + mu * inv_y2 * (fabs(vy) + osc)
    else:
        rate = fabs(vx)
    if rate > 0.0:
        return 0.1 / rate
    return float("inf")


def _dense_eval(conts, base, th):
    """Evaluate one component of the quartic interpolant at theta."""
    th1 = 1.0 - th
    return conts[base] + th * (conts[base + 1] + th1 * (
        conts[base + 2] + th * (conts[base + 3] + th1 * conts[base + 4])))


def _bisect_height(conts, cbase, t0s, h, ta, ga, tb, level):
    """Refine a bracketed crossing of y = level on the interpolant."""
    it = 0
    while tb - ta > EVENT_T_TOL and it < 200:
        tm = 0.5 * (ta + tb)
        gm = _dense_eval(conts, cbase + 5, (tm - t0s) / h) - level
        if (gm > 0.0) == (ga > 0.0) and gm != 0.0:
            ta = tm
            ga = gm
        else:
            tb = tm
        it += 1
    return 0.5 * (ta + tb)


def _bisect_angle(conts, cbase, t0s, h, ta, ga, tb, target):
    """Refine a bracketed zero of sin(x - target) on the interpolant."""
    it = 0
    while tb - ta > EVENT_T_TOL and it < 200:
        tm = 0.5 * (ta + tb)
        gm = sin(_dense_eval(conts, cbase, (tm - t0s) / h) - target)
        if (gm > 0.0) == (ga > 0.0) and gm != 0.0:
            ta = tm
            ga = gm
        else:
            tb = tm
        it += 1
    return 0.5 * (ta + tb)


def integrate_adaptive(lam, mu, c, x0, y0, vx0, vy0, t0, t_end,
                       rel_tol, abs_tol, max_step, norm_cap,
                       levels=(), level_terminal=(), level_direction=(),
                       angles=(), angle_terminal=()):
    """Integrate from t0 to t_end or to the first terminal event.

    Returns (status, ts, states, conts, events, nfev, naccept, nreject):
      ts     (n+1,)    accepted sample times
      states (n+1, 4)  state at the samples
      conts  (n, 5, 4) dense-output coefficients per accepted step
      events list of (kind, index, t_event, x, y, vx, vy, refined)
    """
    nlev = len(levels)
    nang = len(angles)
    scan_events = nlev > 0 or nang > 0

    t = t0
    x = x0
    y = y0
    vx = vx0
    vy = vy0

    ax, ay = _accel(lam, mu, c, x, y, vx, vy)
    k1x, k1y, k1vx, k1vy = vx, vy, ax, ay
    nfev = 1
    naccept = 0
    nreject = 0

    ts = array("d", [t0])
    states = array("d", [x0, y0, vx0, vy0])
    conts = array("d")
    events = []
    status = ST_TIMEOUT

    h = 1e-3
    facold = 1e-4
    was_rejected = False
    done = False

    while not done:
        if t_end - t <= 1e-14 * max(1.0, fabs(t_end)):
            events.append((EV_TIMEOUT, -1, t_end, x, y, vx, vy, 0))
            break

        cap = _step_cap(lam, mu, x, y, vx, vy)
        if h > max_step:
            h = max_step
        if h > cap:
            h = cap
        clamped = False
        if t + h >= t_end:
            h = t_end - t
            clamped = True
        if h < 1e-14 * max(1.0, fabs(t)):
            status = ST_UNDERFLOW
            break

        # stages 2..6
        xs = x + h * (A21 * k1x)
        ys = y + h * (A21 * k1y)
        vxs = vx + h * (A21 * k1vx)
        vys = vy + h * (A21 * k1vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k2x, k2y, k2vx, k2vy = vxs, vys, ax, ay

        xs = x + h * (A31 * k1x + A32 * k2x)
        ys = y + h * (A31 * k1y + A32 * k2y)
        vxs = vx + h * (A31 * k1vx + A32 * k2vx)
        vys = vy + h * (A31 * k1vy + A32 * k2vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k3x, k3y, k3vx, k3vy = vxs, vys, ax, ay

        xs = x + h * (A41 * k1x + A42 * k2x + A43 * k3x)
        ys = y + h * (A41 * k1y + A42 * k2y + A43 * k3y)
        vxs = vx + h * (A41 * k1vx + A42 * k2vx + A43 * k3vx)
        vys = vy + h * (A41 * k1vy + A42 * k2vy + A43 * k3vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k4x, k4y, k4vx, k4vy = vxs, vys, ax, ay

        xs = x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x)
        ys = y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y)
        vxs = vx + h * (A51 * k1vx + A52 * k2vx + A53 * k3vx + A54 * k4vx)
        vys = vy + h * (A51 * k1vy + A52 * k2vy + A53 * k3vy + A54 * k4vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k5x, k5y, k5vx, k5vy = vxs, vys, ax, ay

        xs = x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x)
        ys = y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y)
        vxs = vx + h * (A61 * k1vx + A62 * k2vx + A63 * k3vx + A64 * k4vx + A65 * k5vx)
        vys = vy + h * (A61 * k1vy + A62 * k2vy + A63 * k3vy + A64 * k4vy + A65 * k5vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k6x, k6y, k6vx, k6vy = vxs, vys, ax, ay

        # 5th-order solution (stage 7 argument)
        x1 = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
        y1 = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
        vx1 = vx + h * (B1 * k1vx + B3 * k3vx + B4 * k4vx + B5 * k5vx + B6 * k6vx)
        vy1 = vy + h * (B1 * k1vy + B3 * k3vy + B4 * k4vy + B5 * k5vy + B6 * k6vy)
        ax, ay = _accel(lam, mu, c, x1, y1, vx1, vy1)
        k7x, k7y, k7vx, k7vy = vx1, vy1, ax, ay
        nfev += 6

        # embedded error estimate
        t1 = t_end if clamped else t + h
        ex = h * (E1 * k1x + E3 * k3x + E4 * k4x + E5 * k5x + E6 * k6x + E7 * k7x)
        ey = h * (E1 * k1y + E3 * k3y + E4 * k4y + E5 * k5y + E6 * k6y + E7 * k7y)
        evx = h * (E1 * k1vx + E3 * k3vx + E4 * k4vx + E5 * k5vx + E6 * k6vx + E7 * k7vx)
        evy = h * (E1 * k1vy + E3 * k3vy + E4 * k4vy + E5 * k5vy + E6 * k6vy + E7 * k7vy)
        sc = abs_tol + rel_tol * max(fabs(x), fabs(x1))
        err = (ex / sc) * (ex / sc)
        sc = abs_tol + rel_tol * max(fabs(y), fabs(y1))
        err += (ey / sc) * (ey / sc)
        sc = abs_tol + rel_tol * max(fabs(vx), fabs(vx1))
        err += (evx / sc) * (evx / sc)
        sc = abs_tol + rel_tol * max(fabs(vy), fabs(vy1))
        err += (evy / sc) * (evy / sc)
        err = sqrt(0.25 * err)
        if err != err:  # NaN from a wild trial step
            err = 1e101

        if err <= 1.0:
            # dense-output coefficients for this step
            cbase = len(conts)
            dx = x1 - x
            bs = h * k1x - dx
            conts.append(x)
            conts.append(dx)
            conts.append(bs)
            conts.append(dx - h * k7x - bs)
            conts.append(h * (D1 * k1x + D3 * k3x + D4 * k4x + D5 * k5x + D6 * k6x + D7 * k7x))
            dx = y1 - y
            bs = h * k1y - dx
            conts.append(y)
            conts.append(dx)
            conts.append(bs)
            conts.append(dx - h * k7y - bs)
            conts.append(h * (D1 * k1y + D3 * k3y + D4 * k4y + D5 * k5y + D6 * k6y + D7 * k7y))
            dx = vx1 - vx
            bs = h * k1vx - dx
            conts.append(vx)
            conts.append(dx)
            conts.append(bs)
            conts.append(dx - h * k7vx - bs)
            conts.append(h * (D1 * k1vx + D3 * k3vx + D4 * k4vx + D5 * k5vx + D6 * k6vx + D7 * k7vx))
            dx = vy1 - vy
            bs = h * k1vy - dx
            conts.append(vy)
            conts.append(dx)
            conts.append(bs)
            conts.append(dx - h * k7vy - bs)
            conts.append(h * (D1 * k1vy + D3 * k3vy + D4 * k4vy + D5 * k5vy + D6 * k6vy + D7 * k7vy))

            ts.append(t1)
            states.append(x1)
            states.append(y1)
            states.append(vx1)
            states.append(vy1)
            naccept += 1

            if scan_events:
                # bracket on 16 interpolant probes, refine by bisection
                found = []
                prev_t = t
                prev_x = x
                prev_y = y
                j = 1
                while j <= PROBES:
                    th = j / PROBES
                    tj = t1 if j == PROBES else t + th * h
                    pxj = _dense_eval(conts, cbase, th)
                    pyj = _dense_eval(conts, cbase + 5, th)
                    for i in range(nlev):
                        ga = prev_y - levels[i]
                        gb = pyj - levels[i]
                        crossed = (ga < 0.0 and gb >= 0.0) or (ga > 0.0 and gb <= 0.0)
                        if crossed and level_direction[i] != 0:
                            rising = gb > ga
                            if (level_direction[i] > 0) != rising:
                                crossed = False
                        if crossed:
                            te = _bisect_height(conts, cbase, t, h, prev_t, ga, tj, levels[i])
                            found.append((te, EV_HEIGHT, i, bool(level_terminal[i])))
                    for i in range(nang):
                        ga = sin(prev_x - angles[i])
                        gb = sin(pxj - angles[i])
                        if (ga < 0.0 and gb >= 0.0) or (ga > 0.0 and gb <= 0.0):
                            te = _bisect_angle(conts, cbase, t, h, prev_t, ga, tj, angles[i])
                            if cos(_dense_eval(conts, cbase, (te - t) / h) - angles[i]) > 0.0:
                                found.append((te, EV_ANGLE, i, bool(angle_terminal[i])))
                    prev_t = tj
                    prev_x = pxj
                    prev_y = pyj
                    j += 1
                if found:
                    found.sort(key=lambda rec: rec[0])
                    for te, kind, i, terminal in found:
                        th = (te - t) / h
                        events.append((kind, i, te,
                                       _dense_eval(conts, cbase, th),
                                       _dense_eval(conts, cbase + 5, th),
                                       _dense_eval(conts, cbase + 10, th),
                                       _dense_eval(conts, cbase + 15, th), 1))
                        if terminal:
                            status = ST_EVENT
                            done = True
                            break

            if not done and (fabs(x1) > norm_cap or fabs(y1) > norm_cap
                             or fabs(vx1) > norm_cap or fabs(vy1) > norm_cap
                             or x1 != x1 or y1 != y1 or vx1 != vx1 or vy1 != vy1):
                status = ST_BLOWUP
                events.append((EV_BLOWUP, -1, t1, x1, y1, vx1, vy1, 0))
                done = True

            # advance; stage 7 is next step's stage 1 (FSAL)
            t = t1
            x = x1
            y = y1
            vx = vx1
            vy = vy1
            k1x, k1y, k1vx, k1vy = k7x, k7y, k7vx, k7vy

            fac11 = err ** EXPO1
            fac = fac11 / facold ** BETA
            fac = max(0.1, min(5.0, fac / SAFE))
            hnew = h / fac
            if was_rejected:
                hnew = min(hnew, h)
            facold = max(err, 1e-4)
            was_rejected = False
            h = hnew
        else:
            fac11 = err ** EXPO1
            h = h / min(5.0, fac11 / SAFE)
            was_rejected = True
            nreject += 1

    n = naccept
    ts_np = np.frombuffer(ts, dtype=float).copy()
    states_np = np.frombuffer(states, dtype=float).reshape(n + 1, 4).copy()
    conts_np = np.frombuffer(conts, dtype=float).reshape(n, 4, 5).copy()
    # stored per component: reorder to (step, coeff, component)
    conts_np = np.ascontiguousarray(conts_np.transpose(0, 2, 1))
    return status, ts_np, states_np, conts_np, events, nfev, naccept, nreject


def integrate_fixed(lam, mu, c, x0, y0, vx0, vy0, t0, h, n_steps):
    """Fixed-step variant of the same Dormand-Prince pair (no control,
    no dense output).  Returns the final state (x, y, vx, vy)."""
    t = t0
    x = x0
    y = y0
    vx = vx0
    vy = vy0
    for _ in range(n_steps):
        ax, ay = _accel(lam, mu, c, x, y, vx, vy)
        k1x, k1y, k1vx, k1vy = vx, vy, ax, ay

        xs = x + h * (A21 * k1x)
        ys = y + h * (A21 * k1y)
        vxs = vx + h * (A21 * k1vx)
        vys = vy + h * (A21 * k1vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k2x, k2y, k2vx, k2vy = vxs, vys, ax, ay

        xs = x + h * (A31 * k1x + A32 * k2x)
        ys = y + h * (A31 * k1y + A32 * k2y)
        vxs = vx + h * (A31 * k1vx + A32 * k2vx)
        vys = vy + h * (A31 * k1vy + A32 * k2vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k3x, k3y, k3vx, k3vy = vxs, vys, ax, ay

        xs = x + h * (A41 * k1x + A42 * k2x + A43 * k3x)
        ys = y + h * (A41 * k1y + A42 * k2y + A43 * k3y)
        vxs = vx + h * (A41 * k1vx + A42 * k2vx + A43 * k3vx)
        vys = vy + h * (A41 * k1vy + A42 * k2vy + A43 * k3vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k4x, k4y, k4vx, k4vy = vxs, vys, ax, ay

        xs = x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x)
        ys = y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y)
        vxs = vx + h * (A51 * k1vx + A52 * k2vx + A53 * k3vx + A54 * k4vx)
        vys = vy + h * (A51 * k1vy + A52 * k2vy + A53 * k3vy + A54 * k4vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k5x, k5y, k5vx, k5vy = vxs, vys, ax, ay

        xs = x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x)
        ys = y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y)
        vxs = vx + h * (A61 * k1vx + A62 * k2vx + A63 * k3vx + A64 * k4vx + A65 * k5vx)
        vys = vy + h * (A61 * k1vy + A62 * k2vy + A63 * k3vy + A64 * k4vy + A65 * k5vy)
        ax, ay = _accel(lam, mu, c, xs, ys, vxs, vys)
        k6x, k6y, k6vx, k6vy = vxs, vys, ax, ay

        x = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
        y = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
        vx = vx + h * (B1 * k1vx + B3 * k3vx + B4 * k4vx + B5 * k5vx + B6 * k6vx)
        vy = vy + h * (B1 * k1vy + B3 * k3vy + B4 * k4vy + B5 * k5vy + B6 * k6vy)
        t = t + h
    return x, y, vx, vy
