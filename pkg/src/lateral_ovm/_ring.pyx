# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled two-lane ring kernels; same contract as ``_ring_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, fmod, isfinite, fabs

cnp.import_array()

cdef enum:
    OK = 0
    NONFINITE = 1
    COLLISION = 2
    ORDER = 3

cdef double ORDER_RTOL = 1e-6

ctypedef struct Params:
    double alpha, p, q, lam1, lam2, half, h_c, th_c, l_v, d


cdef Params _params(tuple prm):
    cdef Params P
    P.alpha, P.p, P.q, P.lam1, P.lam2 = prm[0], prm[1], prm[2], prm[3], prm[4]
    P.half = prm[5] / 2
    P.h_c = prm[6]
    P.th_c = tanh(P.h_c)
    P.l_v, P.d = prm[7], prm[8]
    return P


cdef inline double _wrap(double y, double c) nogil:
    y = fmod(y, c)
    if y < 0:
        y = y + c
    if y >= c:
        y = y - c
    return y


cdef class _Work:
    """Scratch buffers sized for one ring."""
    cdef double[:, ::1] gap, acc, xk, vk, ax, av, xs, vs
    cdef double[::1] ysort, subj
    cdef Py_ssize_t[::1] order
    cdef Py_ssize_t[:, ::1] idx

    def __init__(self, Py_ssize_t n):
        self.gap = np.empty((2, n))
        self.acc = np.empty((2, n))
        self.xk = np.empty((2, n))
        self.vk = np.empty((2, n))
        self.ax = np.empty((2, n))
        self.av = np.empty((2, n))
        self.xs = np.empty((2, n))
        self.vs = np.empty((2, n))
        self.ysort = np.empty(n)
        self.subj = np.empty(n)
        self.order = np.empty(n, dtype=np.intp)
        self.idx = np.empty((2, n), dtype=np.intp)


cdef void _lateral(double[:, ::1] x, double[::1] circ, int mode, _Work w):
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t s, o, i, j, k, lo, hi, start
    cdef double cs, scale, y, g, key
    cdef Py_ssize_t ki
    for s in range(2):
        o = 1 - s
        cs = circ[s]
        scale = cs / circ[o]
        if mode == 0:
            # other lane is cyclically ordered: rotate to its minimum, then
            # insertion sort (linear for an already ordered ring)
            start = 0
            for j in range(n):
                w.ysort[j] = _wrap(x[o, j] * scale, cs)
                if w.ysort[j] < w.ysort[start]:
                    start = j
            for j in range(n):
                k = (start + j) % n
                w.subj[j] = w.ysort[k]
                w.order[j] = k
            for j in range(n):
                w.ysort[j] = w.subj[j]
            for j in range(1, n):
                key = w.ysort[j]
                ki = w.order[j]
                k = j - 1
                while k >= 0 and (w.ysort[k] > key or (w.ysort[k] == key and w.order[k] > ki)):
                    w.ysort[k + 1] = w.ysort[k]
                    w.order[k + 1] = w.order[k]
                    k -= 1
                w.ysort[k + 1] = key
                w.order[k + 1] = ki
            for i in range(n):
                y = _wrap(x[s, i], cs)
                lo = 0
                hi = n
                while lo < hi:
                    k = (lo + hi) // 2
                    if w.ysort[k] <= y:
                        lo = k + 1
                    else:
                        hi = k
                if lo == n:
                    w.gap[s, i] = (w.ysort[0] + cs) - y
                    w.idx[s, i] = w.order[0]
                else:
                    w.gap[s, i] = (w.ysort[lo] + 0.0) - y
                    w.idx[s, i] = w.order[lo]
        else:
            for i in range(n):
                j = (i + 1) % n
                g = _wrap(x[o, j] * scale, cs) - _wrap(x[s, i], cs)
                if g < 0:
                    g = g + cs
                w.gap[s, i] = g
                w.idx[s, i] = j


cdef inline double _headway(double[:, ::1] x, double[::1] circ, Py_ssize_t s, Py_ssize_t i, Py_ssize_t n) nogil:
    cdef double h = x[s, (i + 1) % n] - x[s, i]
    if h < 0:
        h = h + circ[s]
    return h


cdef void _accel(double[:, ::1] x, double[:, ::1] v, double[::1] circ, Params* P,
                 int mode, int gate, _Work w, double[:, ::1] out):
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t s, i
    cdef double h, g, vself, v_opt, v_bar, dv_lat
    cdef bint open_
    _lateral(x, circ, mode, w)
    for s in range(2):
        for i in range(n):
            h = _headway(x, circ, s, i, n)
            g = w.gap[s, i]
            vself = v[s, i]
            if gate == 0:
                open_ = P.l_v <= g and g < P.d
            else:
                open_ = gate == 1
            v_opt = P.half * (tanh(h - P.h_c) + P.th_c)
            if open_:
                v_bar = P.half * (tanh(g - P.h_c) + P.th_c)
                dv_lat = v[1 - s, w.idx[s, i]] - vself
            else:
                v_bar = 0.0
                dv_lat = 0.0
            out[s, i] = (P.alpha * (P.p * v_opt + P.q * v_bar - vself)
                         + P.lam1 * (v[s, (i + 1) % n] - vself) + P.lam2 * dv_lat)


cdef int _check(double[:, ::1] x, double[:, ::1] v, double[::1] circ, Py_ssize_t* lane, Py_ssize_t* veh) nogil:
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t s, i, imax
    cdef double h, total, hmax
    for s in range(2):
        for i in range(n):
            if not (isfinite(x[s, i]) and isfinite(v[s, i])):
                lane[0] = s
                veh[0] = i
                return NONFINITE
    for s in range(2):
        total = 0.0
        hmax = -1.0
        imax = 0
        for i in range(n):
            h = _headway(x, circ, s, i, n)
            if h <= 0:
                lane[0] = s
                veh[0] = i
                return COLLISION
            total += h
            if h > hmax:
                hmax = h
                imax = i
        if fabs(total - circ[s]) > ORDER_RTOL * circ[s]:
            lane[0] = s
            veh[0] = imax
            return ORDER
    return OK


cdef int _step(double[:, ::1] x, double[:, ::1] v, double[::1] circ, Params* P,
               int mode, int gate, int scheme, double dt, _Work w,
               Py_ssize_t* lane, Py_ssize_t* veh):
    """Advance (x, v) in place by one step."""
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t s, i
    cdef double h2 = dt / 2, h6 = dt / 6
    if scheme == 0:
        _accel(x, v, circ, P, mode, gate, w, w.acc)
        for s in range(2):
            for i in range(n):
                x[s, i] = x[s, i] + dt * v[s, i]
                v[s, i] = v[s, i] + dt * w.acc[s, i]
    else:
        # ax/av accumulate k1 + 2 k2 + 2 k3 + k4 in the same order as numpy
        _accel(x, v, circ, P, mode, gate, w, w.acc)
        for s in range(2):
            for i in range(n):
                w.ax[s, i] = v[s, i]
                w.av[s, i] = w.acc[s, i]
                w.xk[s, i] = x[s, i] + h2 * v[s, i]
                w.vk[s, i] = v[s, i] + h2 * w.acc[s, i]
        _accel(w.xk, w.vk, circ, P, mode, gate, w, w.acc)
        for s in range(2):
            for i in range(n):
                w.ax[s, i] = w.ax[s, i] + 2 * w.vk[s, i]
                w.av[s, i] = w.av[s, i] + 2 * w.acc[s, i]
                w.xs[s, i] = x[s, i] + h2 * w.vk[s, i]
                w.vs[s, i] = v[s, i] + h2 * w.acc[s, i]
        _accel(w.xs, w.vs, circ, P, mode, gate, w, w.acc)
        for s in range(2):
            for i in range(n):
                w.ax[s, i] = w.ax[s, i] + 2 * w.vs[s, i]
                w.av[s, i] = w.av[s, i] + 2 * w.acc[s, i]
                w.xk[s, i] = x[s, i] + dt * w.vs[s, i]
                w.vk[s, i] = v[s, i] + dt * w.acc[s, i]
        _accel(w.xk, w.vk, circ, P, mode, gate, w, w.acc)
        for s in range(2):
            for i in range(n):
                x[s, i] = x[s, i] + h6 * (w.ax[s, i] + w.vk[s, i])
                v[s, i] = v[s, i] + h6 * (w.av[s, i] + w.acc[s, i])
    for s in range(2):
        for i in range(n):
            x[s, i] = _wrap(x[s, i], circ[s])
    return _check(x, v, circ, lane, veh)


def _as_state(x, v, circ):
    return (np.ascontiguousarray(x, dtype=np.float64).copy(),
            np.ascontiguousarray(v, dtype=np.float64).copy(),
            np.ascontiguousarray(circ, dtype=np.float64))


def headways(x, circ):
    cdef double[:, ::1] xm = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] cm = np.ascontiguousarray(circ, dtype=np.float64)
    cdef Py_ssize_t n = xm.shape[1], s, i
    out = np.empty((2, n))
    cdef double[:, ::1] om = out
    for s in range(2):
        for i in range(n):
            om[s, i] = _headway(xm, cm, s, i, n)
    return out


def lateral_leaders(x, circ, int mode):
    cdef double[:, ::1] xm = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] cm = np.ascontiguousarray(circ, dtype=np.float64)
    w = _Work(xm.shape[1])
    _lateral(xm, cm, mode, w)
    return np.asarray(w.gap).copy(), np.asarray(w.idx).copy()


def accelerations(x, v, circ, tuple prm, int mode, int gate):
    xa, va, ca = _as_state(x, v, circ)
    cdef Params P = _params(prm)
    w = _Work(xa.shape[1])
    out = np.empty_like(xa)
    _accel(xa, va, ca, &P, mode, gate, w, out)
    return out


def step(x, v, circ, tuple prm, int mode, int gate, int scheme, double dt):
    xa, va, ca = _as_state(x, v, circ)
    cdef Params P = _params(prm)
    cdef Py_ssize_t lane = -1, veh = -1
    w = _Work(xa.shape[1])
    status = _step(xa, va, ca, &P, mode, gate, scheme, dt, w, &lane, &veh)
    return xa, va, status, lane, veh


def integrate(x, v, circ, tuple prm, int mode, int gate, int scheme, double dt,
              Py_ssize_t n_steps, Py_ssize_t stride):
    xa, va, ca = _as_state(x, v, circ)
    cdef double[:, ::1] xm = xa
    cdef double[:, ::1] vm = va
    cdef double[::1] cm = ca
    cdef Params P = _params(prm)
    cdef Py_ssize_t n_samples = n_steps // stride + 1
    cdef Py_ssize_t lane = -1, veh = -1, i, kept = 1
    cdef int status = OK
    w = _Work(xa.shape[1])
    xs = np.empty((n_samples,) + xa.shape)
    vs = np.empty_like(xs)
    cdef double[:, :, ::1] xsm = xs
    cdef double[:, :, ::1] vsm = vs
    xsm[0, :, :] = xm
    vsm[0, :, :] = vm
    for i in range(1, n_steps + 1):
        status = _step(xm, vm, cm, &P, mode, gate, scheme, dt, w, &lane, &veh)
        if status != OK:
            break
        if i % stride == 0:
            xsm[kept, :, :] = xm
            vsm[kept, :, :] = vm
            kept += 1
    if status != OK:
        return xs[:kept], vs[:kept], kept, status, i, lane, veh
    return xs, vs, kept, OK, -1, -1, -1
