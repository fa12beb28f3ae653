"""Numpy implementation of the two-lane ring kernels.

Mirrors ``_ring.pyx`` operation for operation. Arrays are ``(2, N)``
float64 (lane, vehicle); ``circ`` is ``(2,)``. ``prm`` is the tuple
``(alpha, p, q, lambda1, lambda2, v_max, h_c, l_v, d)``.

Integer codes: mode 0 nearest / 1 paired; gate 0 dynamic / 1 open /
2 closed; scheme 0 euler / 1 rk4; status 0 ok / 1 non-finite /
2 collision / 3 ordering violation.
"""
import numpy as np

OK, NONFINITE, COLLISION, ORDER = 0, 1, 2, 3
ORDER_RTOL = 1e-6


def _wrap(y, c):
    y = np.fmod(y, c)
    y = np.where(y < 0, y + c, y)
    return np.where(y >= c, y - c, y)


def headways(x, circ):
    h = np.roll(x, -1, axis=1) - x
    return np.where(h < 0, h + circ[:, None], h)


def lateral_leaders(x, circ, mode):
    """Headway to, and index of, each vehicle's adjacent-lane leader."""
    n = x.shape[1]
    gap = np.empty_like(x)
    idx = np.empty(x.shape, dtype=np.intp)
    for s in (0, 1):
        o = 1 - s
        cs = circ[s]
        y = _wrap(x[o] * (cs / circ[o]), cs)
        xs = _wrap(x[s], cs)
        if mode == 0:
            order = np.argsort(y, kind="stable")
            ys = y[order]
            k = np.searchsorted(ys, xs, side="right")
            wrapped = k == n
            k = np.where(wrapped, 0, k)
            gap[s] = (ys[k] + np.where(wrapped, cs, 0.0)) - xs
            idx[s] = order[k]
        else:
            j = (np.arange(n) + 1) % n
            g = y[j] - xs
            gap[s] = np.where(g < 0, g + cs, g)
            idx[s] = j
    return gap, idx


def accelerations(x, v, circ, prm, mode, gate):
    alpha, p, q, lam1, lam2, v_max, h_c, l_v, d = prm
    half = v_max / 2
    th_c = np.tanh(h_c)
    h = headways(x, circ)
    g, j = lateral_leaders(x, circ, mode)
    v_lat = np.take_along_axis(v[::-1], j, axis=1)
    if gate == 0:
        open_ = (l_v <= g) & (g < d)
    else:
        open_ = np.full(g.shape, gate == 1)
    v_opt = half * (np.tanh(h - h_c) + th_c)
    v_bar = np.where(open_, half * (np.tanh(g - h_c) + th_c), 0.0)
    dv_lat = np.where(open_, v_lat - v, 0.0)
    return alpha * (p * v_opt + q * v_bar - v) + lam1 * (np.roll(v, -1, axis=1) - v) + lam2 * dv_lat


def check(x, v, circ):
    """Return ``(status, lane, vehicle)`` for a freshly stepped state."""
    bad = ~(np.isfinite(x) & np.isfinite(v))
    if bad.any():
        lane, veh = np.argwhere(bad)[0]
        return NONFINITE, int(lane), int(veh)
    h = headways(x, circ)
    for lane in (0, 1):
        hit = np.flatnonzero(h[lane] <= 0)
        if hit.size:
            return COLLISION, lane, int(hit[0])
        if abs(h[lane].sum() - circ[lane]) > ORDER_RTOL * circ[lane]:
            return ORDER, lane, int(np.argmax(h[lane]))
    return OK, -1, -1


def step(x, v, circ, prm, mode, gate, scheme, dt):
    if scheme == 0:
        acc = accelerations(x, v, circ, prm, mode, gate)
        xn = x + dt * v
        vn = v + dt * acc
    else:
        k1x, k1v = v, accelerations(x, v, circ, prm, mode, gate)
        x2, v2 = x + (dt / 2) * k1x, v + (dt / 2) * k1v
        k2x, k2v = v2, accelerations(x2, v2, circ, prm, mode, gate)
        x3, v3 = x + (dt / 2) * k2x, v + (dt / 2) * k2v
        k3x, k3v = v3, accelerations(x3, v3, circ, prm, mode, gate)
        x4, v4 = x + dt * k3x, v + dt * k3v
        k4x, k4v = v4, accelerations(x4, v4, circ, prm, mode, gate)
        xn = x + (dt / 6) * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + (dt / 6) * (k1v + 2 * k2v + 2 * k3v + k4v)
    xn = _wrap(xn, circ[:, None])
    status, lane, veh = check(xn, vn, circ)
    return xn, vn, status, lane, veh


def integrate(x, v, circ, prm, mode, gate, scheme, dt, n_steps, stride):
    """Advance ``n_steps`` and keep every ``stride``-th state (step 0 included).

    Returns ``(xs, vs, n_samples, status, fail_step, lane, vehicle)``; on
    failure the sample arrays are truncated to the states reached.
    """
    n_samples = n_steps // stride + 1
    xs = np.empty((n_samples,) + x.shape)
    vs = np.empty_like(xs)
    xs[0], vs[0] = x, v
    kept = 1
    for i in range(1, n_steps + 1):
        x, v, status, lane, veh = step(x, v, circ, prm, mode, gate, scheme, dt)
        if status != OK:
            return xs[:kept], vs[:kept], kept, status, i, lane, veh
        if i % stride == 0:
            xs[kept], vs[kept] = x, v
            kept += 1
    return xs, vs, kept, OK, -1, -1, -1
