# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel: adaptive Dormand-Prince 5(4).

Twin of _kernel_py.py.  The two are kept line-for-line parallel with
identical arithmetic ordering so trajectories are bit-identical across
backends; any change here must be mirrored there.
"""

from libc.math cimport cos, exp, fabs, fmax, fmin, pow, sin, sqrt, INFINITY

import numpy as np

BACKEND = "compiled"

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0
cdef double D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0
cdef double D7 = 69997945.0 / 29380423.0

cdef double UNDERFLOW_Q = 700.0
cdef double SAFE = 0.9
cdef double BETA = 0.04
cdef double EXPO1 = 0.2 - 0.04 * 0.75
cdef double EVENT_T_TOL = 1e-12
cdef double PROBES_D = 16.0
cdef int PROBES = 16
cdef int MAX_EVENT_FUNCS = 16

EV_HEIGHT = 0
EV_ANGLE = 1
EV_TIMEOUT = 2
EV_BLOWUP = 3
ST_TIMEOUT = 0
ST_EVENT = 1
ST_BLOWUP = 2
ST_UNDERFLOW = 3


cdef inline void _accel_c(double lam, double mu, double c,
                          double x, double y, double vx, double vy,
                          double* ax, double* ay) noexcept nogil:
    cdef double inv_y2, q, amp, ph, s, co, gx, gy
    gx = 0.0
    gy = 0.0
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
    ax[0] = -c * vx - gx
    ay[0] = -c * vy - gy


def grad_potential(double lam, double mu, double x, double y):
    """(V, dV/dx, dV/dy) with the flat-axis underflow guard."""
    cdef double inv_y2, q, amp, ph, s, co, gx, gy
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


cdef inline double _step_cap_c(double lam, double mu,
                               double x, double y, double vx, double vy) noexcept nogil:
    cdef double inv_y2, q, osc, rate
    if fabs(vx) + fabs(vy) > 16.0:
        return INFINITY
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
    return INFINITY


cdef inline double _dense_eval_c(double* co, double th) noexcept nogil:
    cdef double th1 = 1.0 - th
    return co[0] + th * (co[1] + th1 * (co[2] + th * (co[3] + th1 * co[4])))


cdef double _bisect_height_c(double* co, double t0s, double h,
                             double ta, double ga, double tb, double level) noexcept nogil:
    cdef int it = 0
    cdef double tm, gm
    while tb - ta > EVENT_T_TOL and it < 200:
        tm = 0.5 * (ta + tb)
        gm = _dense_eval_c(co, (tm - t0s) / h) - level
        if (gm > 0.0) == (ga > 0.0) and gm != 0.0:
            ta = tm
            ga = gm
        else:
            tb = tm
        it += 1
    return 0.5 * (ta + tb)


cdef double _bisect_angle_c(double* co, double t0s, double h,
                            double ta, double ga, double tb, double target) noexcept nogil:
    cdef int it = 0
    cdef double tm, gm
    while tb - ta > EVENT_T_TOL and it < 200:
        tm = 0.5 * (ta + tb)
        gm = sin(_dense_eval_c(co, (tm - t0s) / h) - target)
        if (gm > 0.0) == (ga > 0.0) and gm != 0.0:
            ta = tm
            ga = gm
        else:
            tb = tm
        it += 1
    return 0.5 * (ta + tb)


def integrate_adaptive(double lam, double mu, double c,
                       double x0, double y0, double vx0, double vy0,
                       double t0, double t_end,
                       double rel_tol, double abs_tol, double max_step,
                       double norm_cap,
                       levels=(), level_terminal=(), level_direction=(),
                       angles=(), angle_terminal=()):
    """See _kernel_py.integrate_adaptive; identical contract and output."""
    cdef int nlev = len(levels)
    cdef int nang = len(angles)
    if nlev > MAX_EVENT_FUNCS or nang > MAX_EVENT_FUNCS:
        raise ValueError("too many event functions")
    cdef double[16] lev
    cdef int[16] lev_term
    cdef int[16] lev_dir
    cdef double[16] ang
    cdef int[16] ang_term
    cdef int i
    for i in range(nlev):
        lev[i] = levels[i]
        lev_term[i] = 1 if level_terminal[i] else 0
        lev_dir[i] = level_direction[i]
    for i in range(nang):
        ang[i] = angles[i]
        ang_term[i] = 1 if angle_terminal[i] else 0
    cdef bint scan_events = nlev > 0 or nang > 0

    cdef double t = t0
    cdef double x = x0
    cdef double y = y0
    cdef double vx = vx0
    cdef double vy = vy0

    cdef double ax = 0.0
    cdef double ay = 0.0
    _accel_c(lam, mu, c, x, y, vx, vy, &ax, &ay)
    cdef double k1x = vx
    cdef double k1y = vy
    cdef double k1vx = ax
    cdef double k1vy = ay
    cdef long nfev = 1
    cdef long naccept = 0
    cdef long nreject = 0

    cdef Py_ssize_t cap_steps = 4096
    ts_arr = np.empty(cap_steps + 1, dtype=np.float64)
    states_arr = np.empty((cap_steps + 1, 4), dtype=np.float64)
    conts_arr = np.empty((cap_steps, 20), dtype=np.float64)
    cdef double[::1] ts_v = ts_arr
    cdef double[:, ::1] states_v = states_arr
    cdef double[:, ::1] conts_v = conts_arr
    ts_v[0] = t0
    states_v[0, 0] = x0
    states_v[0, 1] = y0
    states_v[0, 2] = vx0
    states_v[0, 3] = vy0
    events = []
    status = ST_TIMEOUT

    cdef double h = 1e-3
    cdef double facold = 1e-4
    cdef bint was_rejected = False
    cdef bint done = False
    cdef bint clamped
    cdef double cap, t1, err, sc, hnew, fac11, fac
    cdef double xs, ys, vxs, vys
    cdef double k2x, k2y, k2vx, k2vy, k3x, k3y, k3vx, k3vy
    cdef double k4x, k4y, k4vx, k4vy, k5x, k5y, k5vx, k5vy
    cdef double k6x, k6y, k6vx, k6vy, k7x, k7y, k7vx, k7vy
    cdef double x1, y1, vx1, vy1, ex, ey, evx, evy
    cdef double dx, bs
    cdef double th, tj, pxj, pyj, prev_t, prev_x, prev_y, ga, gb, te
    cdef Py_ssize_t row
    cdef int j
    cdef bint crossed, rising
    cdef double* crow

    while not done:
        if t_end - t <= 1e-14 * fmax(1.0, fabs(t_end)):
            events.append((EV_TIMEOUT, -1, t_end, x, y, vx, vy, 0))
            break

        cap = _step_cap_c(lam, mu, x, y, vx, vy)
        if h > max_step:
            h = max_step
        if h > cap:
            h = cap
        clamped = False
        if t + h >= t_end:
            h = t_end - t
            clamped = True
        if h < 1e-14 * fmax(1.0, fabs(t)):
            status = ST_UNDERFLOW
            break

        # stages 2..6
        xs = x + h * (A21 * k1x)
        ys = y + h * (A21 * k1y)
        vxs = vx + h * (A21 * k1vx)
        vys = vy + h * (A21 * k1vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k2x = vxs
        k2y = vys
        k2vx = ax
        k2vy = ay

        xs = x + h * (A31 * k1x + A32 * k2x)
        ys = y + h * (A31 * k1y + A32 * k2y)
        vxs = vx + h * (A31 * k1vx + A32 * k2vx)
        vys = vy + h * (A31 * k1vy + A32 * k2vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k3x = vxs
        k3y = vys
        k3vx = ax
        k3vy = ay

        xs = x + h * (A41 * k1x + A42 * k2x + A43 * k3x)
        ys = y + h * (A41 * k1y + A42 * k2y + A43 * k3y)
        vxs = vx + h * (A41 * k1vx + A42 * k2vx + A43 * k3vx)
        vys = vy + h * (A41 * k1vy + A42 * k2vy + A43 * k3vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k4x = vxs
        k4y = vys
        k4vx = ax
        k4vy = ay

        xs = x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x)
        ys = y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y)
        vxs = vx + h * (A51 * k1vx + A52 * k2vx + A53 * k3vx + A54 * k4vx)
        vys = vy + h * (A51 * k1vy + A52 * k2vy + A53 * k3vy + A54 * k4vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k5x = vxs
        k5y = vys
        k5vx = ax
        k5vy = ay

        xs = x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x)
        ys = y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y)
        vxs = vx + h * (A61 * k1vx + A62 * k2vx + A63 * k3vx + A64 * k4vx + A65 * k5vx)
        vys = vy + h * (A61 * k1vy + A62 * k2vy + A63 * k3vy + A64 * k4vy + A65 * k5vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k6x = vxs
        k6y = vys
        k6vx = ax
        k6vy = ay

        x1 = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
        y1 = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
        vx1 = vx + h * (B1 * k1vx + B3 * k3vx + B4 * k4vx + B5 * k5vx + B6 * k6vx)
        vy1 = vy + h * (B1 * k1vy + B3 * k3vy + B4 * k4vy + B5 * k5vy + B6 * k6vy)
        _accel_c(lam, mu, c, x1, y1, vx1, vy1, &ax, &ay)
        k7x = vx1
        k7y = vy1
        k7vx = ax
        k7vy = ay
        nfev += 6

        t1 = t_end if clamped else t + h
        ex = h * (E1 * k1x + E3 * k3x + E4 * k4x + E5 * k5x + E6 * k6x + E7 * k7x)
        ey = h * (E1 * k1y + E3 * k3y + E4 * k4y + E5 * k5y + E6 * k6y + E7 * k7y)
        evx = h * (E1 * k1vx + E3 * k3vx + E4 * k4vx + E5 * k5vx + E6 * k6vx + E7 * k7vx)
        evy = h * (E1 * k1vy + E3 * k3vy + E4 * k4vy + E5 * k5vy + E6 * k6vy + E7 * k7vy)
        sc = abs_tol + rel_tol * fmax(fabs(x), fabs(x1))
        err = (ex / sc) * (ex / sc)
        sc = abs_tol + rel_tol * fmax(fabs(y), fabs(y1))
        err += (ey / sc) * (ey / sc)
        sc = abs_tol + rel_tol * fmax(fabs(vx), fabs(vx1))
        err += (evx / sc) * (evx / sc)
        sc = abs_tol + rel_tol * fmax(fabs(vy), fabs(vy1))
        err += (evy / sc) * (evy / sc)
        err = sqrt(0.25 * err)
        if err != err:  # NaN from a wild trial step
            err = 1e101

        if err <= 1.0:
            if naccept >= cap_steps:
                cap_steps = cap_steps * 2
                new_ts = np.empty(cap_steps + 1, dtype=np.float64)
                new_states = np.empty((cap_steps + 1, 4), dtype=np.float64)
                new_conts = np.empty((cap_steps, 20), dtype=np.float64)
                new_ts[:naccept + 1] = ts_arr[:naccept + 1]
                new_states[:naccept + 1] = states_arr[:naccept + 1]
                new_conts[:naccept] = conts_arr[:naccept]
                ts_arr = new_ts
                states_arr = new_states
                conts_arr = new_conts
                ts_v = ts_arr
                states_v = states_arr
                conts_v = conts_arr

            row = naccept
            dx = x1 - x
            bs = h * k1x - dx
            conts_v[row, 0] = x
            conts_v[row, 1] = dx
            conts_v[row, 2] = bs
            conts_v[row, 3] = dx - h * k7x - bs
            conts_v[row, 4] = h * (D1 * k1x + D3 * k3x + D4 * k4x + D5 * k5x + D6 * k6x + D7 * k7x)
            dx = y1 - y
            bs = h * k1y - dx
            conts_v[row, 5] = y
            conts_v[row, 6] = dx
            conts_v[row, 7] = bs
            conts_v[row, 8] = dx - h * k7y - bs
            conts_v[row, 9] = h * (D1 * k1y + D3 * k3y + D4 * k4y + D5 * k5y + D6 * k6y + D7 * k7y)
            dx = vx1 - vx
            bs = h * k1vx - dx
            conts_v[row, 10] = vx
            conts_v[row, 11] = dx
            conts_v[row, 12] = bs
            conts_v[row, 13] = dx - h * k7vx - bs
            conts_v[row, 14] = h * (D1 * k1vx + D3 * k3vx + D4 * k4vx + D5 * k5vx + D6 * k6vx + D7 * k7vx)
            dx = vy1 - vy
            bs = h * k1vy - dx
            conts_v[row, 15] = vy
            conts_v[row, 16] = dx
            conts_v[row, 17] = bs
            conts_v[row, 18] = dx - h * k7vy - bs
            conts_v[row, 19] = h * (D1 * k1vy + D3 * k3vy + D4 * k4vy + D5 * k5vy + D6 * k6vy + D7 * k7vy)

            ts_v[row + 1] = t1
            states_v[row + 1, 0] = x1
            states_v[row + 1, 1] = y1
            states_v[row + 1, 2] = vx1
            states_v[row + 1, 3] = vy1
            naccept += 1

            if scan_events:
                crow = &conts_v[row, 0]
                found = []
                prev_t = t
                prev_x = x
                prev_y = y
                j = 1
                while j <= PROBES:
                    th = j / PROBES_D
                    tj = t1 if j == PROBES else t + th * h
                    pxj = _dense_eval_c(crow, th)
                    pyj = _dense_eval_c(crow + 5, th)
                    for i in range(nlev):
                        ga = prev_y - lev[i]
                        gb = pyj - lev[i]
                        crossed = (ga < 0.0 and gb >= 0.0) or (ga > 0.0 and gb <= 0.0)
                        if crossed and lev_dir[i] != 0:
                            rising = gb > ga
                            if (lev_dir[i] > 0) != rising:
                                crossed = False
                        if crossed:
                            te = _bisect_height_c(crow + 5, t, h, prev_t, ga, tj, lev[i])
                            found.append((te, EV_HEIGHT, i, lev_term[i] != 0))
                    for i in range(nang):
                        ga = sin(prev_x - ang[i])
                        gb = sin(pxj - ang[i])
                        if (ga < 0.0 and gb >= 0.0) or (ga > 0.0 and gb <= 0.0):
                            te = _bisect_angle_c(crow, t, h, prev_t, ga, tj, ang[i])
                            if cos(_dense_eval_c(crow, (te - t) / h) - ang[i]) > 0.0:
                                found.append((te, EV_ANGLE, i, ang_term[i] != 0))
                    prev_t = tj
                    prev_x = pxj
                    prev_y = pyj
                    j += 1
                if found:
                    found.sort(key=lambda rec: rec[0])
                    for rec in found:
                        te = rec[0]
                        th = (te - t) / h
                        events.append((rec[1], rec[2], te,
                                       _dense_eval_c(crow, th),
                                       _dense_eval_c(crow + 5, th),
                                       _dense_eval_c(crow + 10, th),
                                       _dense_eval_c(crow + 15, th), 1))
                        if rec[3]:
                            status = ST_EVENT
                            done = True
                            break

            if not done and (fabs(x1) > norm_cap or fabs(y1) > norm_cap
                             or fabs(vx1) > norm_cap or fabs(vy1) > norm_cap
                             or x1 != x1 or y1 != y1 or vx1 != vx1 or vy1 != vy1):
                status = ST_BLOWUP
                events.append((EV_BLOWUP, -1, t1, x1, y1, vx1, vy1, 0))
                done = True

            t = t1
            x = x1
            y = y1
            vx = vx1
            vy = vy1
            k1x = k7x
            k1y = k7y
            k1vx = k7vx
            k1vy = k7vy

            fac11 = pow(err, EXPO1)
            fac = fac11 / pow(facold, BETA)
            fac = fmax(0.1, fmin(5.0, fac / SAFE))
            hnew = h / fac
            if was_rejected:
                hnew = fmin(hnew, h)
            facold = fmax(err, 1e-4)
            was_rejected = False
            h = hnew
        else:
            fac11 = pow(err, EXPO1)
            h = h / fmin(5.0, fac11 / SAFE)
            was_rejected = True
            nreject += 1

    cdef Py_ssize_t n = naccept
    ts_np = ts_arr[:n + 1].copy()
    states_np = states_arr[:n + 1].copy()
    conts_np = conts_arr[:n].reshape(n, 4, 5)
    conts_np = np.ascontiguousarray(conts_np.transpose(0, 2, 1))
    return status, ts_np, states_np, conts_np, events, nfev, naccept, nreject


def integrate_fixed(double lam, double mu, double c,
                    double x0, double y0, double vx0, double vy0,
                    double t0, double h, long n_steps):
    """Fixed-step variant of the same pair; returns the final state."""
    cdef double t = t0
    cdef double x = x0
    cdef double y = y0
    cdef double vx = vx0
    cdef double vy = vy0
    cdef double ax = 0.0
    cdef double ay = 0.0
    cdef double xs, ys, vxs, vys
    cdef double k1x, k1y, k1vx, k1vy, k2x, k2y, k2vx, k2vy
    cdef double k3x, k3y, k3vx, k3vy, k4x, k4y, k4vx, k4vy
    cdef double k5x, k5y, k5vx, k5vy, k6x, k6y, k6vx, k6vy
    cdef long istep
    for istep in range(n_steps):
        _accel_c(lam, mu, c, x, y, vx, vy, &ax, &ay)
        k1x = vx
        k1y = vy
        k1vx = ax
        k1vy = ay

        xs = x + h * (A21 * k1x)
        ys = y + h * (A21 * k1y)
        vxs = vx + h * (A21 * k1vx)
        vys = vy + h * (A21 * k1vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k2x = vxs
        k2y = vys
        k2vx = ax
        k2vy = ay

        xs = x + h * (A31 * k1x + A32 * k2x)
        ys = y + h * (A31 * k1y + A32 * k2y)
        vxs = vx + h * (A31 * k1vx + A32 * k2vx)
        vys = vy + h * (A31 * k1vy + A32 * k2vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k3x = vxs
        k3y = vys
        k3vx = ax
        k3vy = ay

        xs = x + h * (A41 * k1x + A42 * k2x + A43 * k3x)
        ys = y + h * (A41 * k1y + A42 * k2y + A43 * k3y)
        vxs = vx + h * (A41 * k1vx + A42 * k2vx + A43 * k3vx)
        vys = vy + h * (A41 * k1vy + A42 * k2vy + A43 * k3vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k4x = vxs
        k4y = vys
        k4vx = ax
        k4vy = ay

        xs = x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x)
        ys = y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y)
        vxs = vx + h * (A51 * k1vx + A52 * k2vx + A53 * k3vx + A54 * k4vx)
        vys = vy + h * (A51 * k1vy + A52 * k2vy + A53 * k3vy + A54 * k4vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k5x = vxs
        k5y = vys
        k5vx = ax
        k5vy = ay

        xs = x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x)
        ys = y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y)
        vxs = vx + h * (A61 * k1vx + A62 * k2vx + A63 * k3vx + A64 * k4vx + A65 * k5vx)
        vys = vy + h * (A61 * k1vy + A62 * k2vy + A63 * k3vy + A64 * k4vy + A65 * k5vy)
        _accel_c(lam, mu, c, xs, ys, vxs, vys, &ax, &ay)
        k6x = vxs
        k6y = vys
        k6vx = ax
        k6vy = ay

        x = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
        y = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
        vx = vx + h * (B1 * k1vx + B3 * k3vx + B4 * k4vx + B5 * k5vx + B6 * k6vx)
        vy = vy + h * (B1 * k1vy + B3 * k3vy + B4 * k4vy + B5 * k5vy + B6 * k6vy)
        t = t + h
    return x, y, vx, vy
