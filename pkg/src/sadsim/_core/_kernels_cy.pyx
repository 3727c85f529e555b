# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of kernels_py. Keep operation order identical so both
backends produce bit-identical floating-point results."""

from libc.math cimport cos, sin, tan, fabs, fmod, floor, hypot, pi

BACKEND = "cython"

cdef double _TWO_PI = 2.0 * pi
cdef double _GRID_SNAP = 1e-9


cdef inline double _wrap(double psi) nogil:
    cdef double m = fmod(pi - psi, _TWO_PI)
    if m < 0.0:
        m += _TWO_PI
    return pi - m


def wrap_angle(double psi):
    """Wrap an angle to (-pi, pi]."""
    return _wrap(psi)


def bicycle_step(double sx, double sy, double v, double delta, double psi,
                 double accel, double steer_rate, double dt,
                 double wheelbase, double v_max, double delta_max):
    cdef double nsx = sx + v * cos(psi) * dt
    cdef double nsy = sy + v * sin(psi) * dt
    cdef double npsi = psi + (v / wheelbase) * tan(delta) * dt
    cdef double nv = v + accel * dt
    cdef double ndelta = delta + steer_rate * dt
    if nv < 0.0:
        nv = 0.0
    elif nv > v_max:
        nv = v_max
    if ndelta < -delta_max:
        ndelta = -delta_max
    elif ndelta > delta_max:
        ndelta = delta_max
    return nsx, nsy, nv, ndelta, _wrap(npsi)


def rects_overlap(double ax, double ay, double apsi, double ahl, double ahw,
                  double bx, double by, double bpsi, double bhl, double bhw):
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double ra = hypot(ahl, ahw)
    cdef double rb = hypot(bhl, bhw)
    if dx * dx + dy * dy > (ra + rb) * (ra + rb):
        return False
    cdef double ca = cos(apsi)
    cdef double sa = sin(apsi)
    cdef double cb = cos(bpsi)
    cdef double sb = sin(bpsi)
    cdef double ux, uy, d, ea, eb
    cdef int k
    for k in range(4):
        if k == 0:
            ux = ca; uy = sa
        elif k == 1:
            ux = -sa; uy = ca
        elif k == 2:
            ux = cb; uy = sb
        else:
            ux = -sb; uy = cb
        d = fabs(dx * ux + dy * uy)
        ea = ahl * fabs(ca * ux + sa * uy) + ahw * fabs(-sa * ux + ca * uy)
        eb = bhl * fabs(cb * ux + sb * uy) + bhw * fabs(-sb * ux + cb * uy)
        if d > ea + eb:
            return False
    return True


def rect_corners(double cx, double cy, double psi, double hl, double hw):
    cdef double c = cos(psi)
    cdef double s = sin(psi)
    return (
        (cx + hl * c - hw * s, cy + hl * s + hw * c),
        (cx - hl * c - hw * s, cy - hl * s + hw * c),
        (cx - hl * c + hw * s, cy - hl * s - hw * c),
        (cx + hl * c + hw * s, cy + hl * s - hw * c),
    )


def rect_outside_box(double cx, double cy, double psi, double hl, double hw,
                     double x_min, double x_max, double y_min, double y_max):
    cdef double c = cos(psi)
    cdef double s = sin(psi)
    cdef double fx, fy, x, y
    cdef int k
    for k in range(4):
        if k == 0:
            fx = hl; fy = hw
        elif k == 1:
            fx = -hl; fy = hw
        elif k == 2:
            fx = -hl; fy = -hw
        else:
            fx = hl; fy = -hw
        x = cx + fx * c - fy * s
        y = cy + fx * s + fy * c
        if x < x_min or x > x_max or y < y_min or y > y_max:
            return True
    return False


def lane_change_ref(double y0, double y1, double t0, double t1, double t):
    cdef double T, u, dy, s, ds, dds
    if t <= t0:
        return y0, 0.0, 0.0
    if t >= t1:
        return y1, 0.0, 0.0
    T = t1 - t0
    u = (t - t0) / T
    dy = y1 - y0
    s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    ds = u * u * (30.0 + u * (-60.0 + 30.0 * u)) / T
    dds = u * (60.0 + u * (-180.0 + 120.0 * u)) / (T * T)
    return y0 + dy * s, dy * ds, dy * dds


def steer_rate_cmd(double y_err, double psi_err, double delta_err, double v,
                   double k_y, double k_psi, double k_d,
                   double wheelbase, double rate_max):
    cdef double vv = v if v > 1.0 else 1.0
    cdef double sr = ((wheelbase / (vv * vv)) * k_y * y_err
                      + (wheelbase / vv) * k_psi * psi_err
                      + k_d * delta_err)
    if sr < -rate_max:
        return -rate_max
    if sr > rate_max:
        return rate_max
    return sr


def track_state_at(double[::1] sxs, double[::1] sys, double[::1] vs,
                   double[::1] psis, double t0, double dt, double t):
    cdef Py_ssize_t n = sxs.shape[0]
    cdef Py_ssize_t last = n - 1
    cdef double tf, frac, sx, sy, v, psi
    cdef Py_ssize_t i
    if t <= t0:
        return sxs[0], sys[0], vs[0], psis[0]
    tf = (t - t0) / dt
    i = <Py_ssize_t>floor(tf + _GRID_SNAP)
    if i >= last:
        return sxs[last], sys[last], vs[last], psis[last]
    frac = tf - i
    if frac < _GRID_SNAP:
        return sxs[i], sys[i], vs[i], psis[i]
    sx = sxs[i] + (sxs[i + 1] - sxs[i]) * frac
    sy = sys[i] + (sys[i + 1] - sys[i]) * frac
    v = vs[i] + (vs[i + 1] - vs[i]) * frac
    psi = psis[i] if frac < 0.5 else psis[i + 1]
    return sx, sy, v, psi
