"""Pure-Python reference implementation of the hot simulation kernels.

The compiled twin (`_kernels_cy`) mirrors these functions operation for
operation so both backends produce bit-identical results. Keep any change
here in lockstep with the .pyx file.
"""

import math

BACKEND = "python"

_TWO_PI = 2.0 * math.pi
_GRID_SNAP = 1e-9


def wrap_angle(psi):
    """Wrap an angle to (-pi, pi]."""
    m = math.fmod(math.pi - psi, _TWO_PI)
    if m < 0.0:
        m += _TWO_PI
    return math.pi - m


def bicycle_step(sx, sy, v, delta, psi, accel, steer_rate, dt,
                 wheelbase, v_max, delta_max):
    """One explicit-Euler step of the kinematic bicycle.

    Positions and heading advance with the pre-step speed/steering, then
    speed and steering integrate the commands; speed is clamped to
    [0, v_max] and steering to +/- delta_max.
    """
    nsx = sx + v * math.cos(psi) * dt
    nsy = sy + v * math.sin(psi) * dt
    npsi = psi + (v / wheelbase) * math.tan(delta) * dt
    nv = v + accel * dt
    ndelta = delta + steer_rate * dt
    if nv < 0.0:
        nv = 0.0
    elif nv > v_max:
        nv = v_max
    if ndelta < -delta_max:
        ndelta = -delta_max
    elif ndelta > delta_max:
        ndelta = delta_max
    return nsx, nsy, nv, ndelta, wrap_angle(npsi)


def rects_overlap(ax, ay, apsi, ahl, ahw, bx, by, bpsi, bhl, bhw):
    """Separating-axis test for two oriented rectangles (closed sets)."""
    dx = bx - ax
    dy = by - ay
    ra = math.hypot(ahl, ahw)
    rb = math.hypot(bhl, bhw)
    if dx * dx + dy * dy > (ra + rb) * (ra + rb):
        return False
    ca = math.cos(apsi)
    sa = math.sin(apsi)
    cb = math.cos(bpsi)
    sb = math.sin(bpsi)
    # Axes: long/lat unit vectors of each rectangle.
    for ux, uy in ((ca, sa), (-sa, ca), (cb, sb), (-sb, cb)):
        d = abs(dx * ux + dy * uy)
        ea = ahl * abs(ca * ux + sa * uy) + ahw * abs(-sa * ux + ca * uy)
        eb = bhl * abs(cb * ux + sb * uy) + bhw * abs(-sb * ux + cb * uy)
        if d > ea + eb:
            return False
    return True


def rect_corners(cx, cy, psi, hl, hw):
    """Corner coordinates, counter-clockwise starting front-left."""
    c = math.cos(psi)
    s = math.sin(psi)
    return (
        (cx + hl * c - hw * s, cy + hl * s + hw * c),
        (cx - hl * c - hw * s, cy - hl * s + hw * c),
        (cx - hl * c + hw * s, cy - hl * s - hw * c),
        (cx + hl * c + hw * s, cy + hl * s - hw * c),
    )


def rect_outside_box(cx, cy, psi, hl, hw, x_min, x_max, y_min, y_max):
    """True iff any rectangle corner lies outside the axis-aligned box."""
    c = math.cos(psi)
    s = math.sin(psi)
    for fx, fy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        x = cx + fx * c - fy * s
        y = cy + fx * s + fy * c
        if x < x_min or x > x_max or y < y_min or y > y_max:
            return True
    return False


def lane_change_ref(y0, y1, t0, t1, t):
    """Quintic (smoothstep) lateral reference: returns (y, dy/dt, d2y/dt2).

    Boundary lateral velocity and acceleration are zero at both ends; the
    profile is held constant outside [t0, t1].
    """
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


def steer_rate_cmd(y_err, psi_err, delta_err, v, k_y, k_psi, k_d,
                   wheelbase, rate_max):
    """Speed-normalized steering-rate law with curvature feedforward.

    The three gains place speed-invariant closed-loop poles; delta_err is
    (reference steering - actual steering).
    """
    vv = v if v > 1.0 else 1.0
    sr = ((wheelbase / (vv * vv)) * k_y * y_err
          + (wheelbase / vv) * k_psi * psi_err
          + k_d * delta_err)
    if sr < -rate_max:
        return -rate_max
    if sr > rate_max:
        return rate_max
    return sr


def track_state_at(sxs, sys, vs, psis, t0, dt, t):
    """Sample an open-loop track at time t.

    Exact sample on grid times, linear interpolation of position/velocity
    between samples, nearest-sample heading, clamp-hold outside the span.
    """
    n = len(sxs)
    last = n - 1
    if t <= t0:
        return float(sxs[0]), float(sys[0]), float(vs[0]), float(psis[0])
    tf = (t - t0) / dt
    i = int(math.floor(tf + _GRID_SNAP))
    if i >= last:
        return float(sxs[last]), float(sys[last]), float(vs[last]), float(psis[last])
    frac = tf - i
    if frac < _GRID_SNAP:
        return float(sxs[i]), float(sys[i]), float(vs[i]), float(psis[i])
    sx = sxs[i] + (sxs[i + 1] - sxs[i]) * frac
    sy = sys[i] + (sys[i + 1] - sys[i]) * frac
    v = vs[i] + (vs[i + 1] - vs[i]) * frac
    psi = psis[i] if frac < 0.5 else psis[i + 1]
    return float(sx), float(sy), float(v), float(psi)
