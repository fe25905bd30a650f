# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Semantics match ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin
from libc.stdint cimport uint32_t, uint64_t, int64_t

cnp.import_array()

cdef uint64_t M0 = 0xD2511F53
cdef uint64_t M1 = 0xCD9E8D57
cdef uint32_t W0 = 0x9E3779B9
cdef uint32_t W1 = 0xBB67AE85
cdef uint64_t LO32 = 0xFFFFFFFF


cdef inline void _philox(uint32_t* x, uint32_t k0, uint32_t k1, int rounds) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t y0, y1, y2, y3
    cdef int r
    for r in range(rounds):
        if r:
            k0 = k0 + W0
            k1 = k1 + W1
        p0 = <uint64_t>x[0] * M0
        p1 = <uint64_t>x[2] * M1
        y0 = <uint32_t>(p1 >> 32) ^ x[1] ^ k0
        y1 = <uint32_t>p1
        y2 = <uint32_t>(p0 >> 32) ^ x[3] ^ k1
        y3 = <uint32_t>p0
        x[0] = y0
        x[1] = y1
        x[2] = y2
        x[3] = y3


def philox4x32(counters, key, int rounds=10):
    cdef const cnp.uint32_t[:, ::1] c = np.ascontiguousarray(counters, dtype=np.uint32)
    out = np.empty((c.shape[0], 4), dtype=np.uint32)
    cdef cnp.uint32_t[:, ::1] o = out
    cdef uint32_t k0 = <uint32_t>(int(key[0]) & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t>(int(key[1]) & 0xFFFFFFFF)
    cdef uint32_t x[4]
    cdef Py_ssize_t i
    with nogil:
        for i in range(c.shape[0]):
            x[0] = c[i, 0]
            x[1] = c[i, 1]
            x[2] = c[i, 2]
            x[3] = c[i, 3]
            _philox(x, k0, k1, rounds)
            o[i, 0] = x[0]
            o[i, 1] = x[1]
            o[i, 2] = x[2]
            o[i, 3] = x[3]
    return out


cdef inline double _u53(uint32_t hi, uint32_t lo) noexcept nogil:
    return ((<double>(hi >> 5)) * 67108864.0 + <double>(lo >> 6) + 0.5) * (1.0 / 9007199254740992.0)


def normal_block(seed, path_start, Py_ssize_t n_paths, Py_ssize_t n_steps, Py_ssize_t dim):
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t p0 = <uint64_t>int(path_start)
    cdef uint32_t k0 = <uint32_t>(s & LO32)
    cdef uint32_t k1 = <uint32_t>(s >> 32)
    cdef Py_ssize_t n_blocks = (dim + 1) // 2
    out = np.empty((n_paths, n_steps, dim), dtype=np.float64)
    cdef double[:, :, ::1] z = out
    cdef Py_ssize_t p, k, b, j
    cdef uint64_t path
    cdef uint32_t x[4]
    cdef double u1, u2, rad, ang
    with nogil:
        for p in range(n_paths):
            path = p0 + <uint64_t>p
            for k in range(n_steps):
                for b in range(n_blocks):
                    x[0] = <uint32_t>k
                    x[1] = <uint32_t>b
                    x[2] = <uint32_t>(path & LO32)
                    x[3] = <uint32_t>(path >> 32)
                    _philox(x, k0, k1, 10)
                    u1 = _u53(x[0], x[1])
                    u2 = _u53(x[2], x[3])
                    rad = sqrt(-2.0 * log(u1))
                    ang = 6.283185307179586 * u2
                    j = 2 * b
                    z[p, k, j] = rad * cos(ang)
                    if j + 1 < dim:
                        z[p, k, j + 1] = rad * sin(ang)
    return out


def gheat_steps(u0, int n_t, double dt, double dx, double s2_lo, double s2_hi, int boundary):
    cdef double[::1] u = np.array(u0, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = u.shape[0]
    cdef double[::1] d2 = np.empty(n, dtype=np.float64)
    cdef double inv = 1.0 / (dx * dx)
    cdef double g, pos, neg
    cdef Py_ssize_t i
    cdef int step
    with nogil:
        for step in range(n_t):
            for i in range(1, n - 1):
                d2[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv
            if boundary == 0:
                d2[0] = 0.0
                d2[n - 1] = 0.0
            else:
                d2[0] = (2.0 * u[1] - 2.0 * u[0]) * inv
                d2[n - 1] = (2.0 * u[n - 2] - 2.0 * u[n - 1]) * inv
            for i in range(n):
                pos = d2[i] if d2[i] > 0.0 else 0.0
                neg = -d2[i] if -d2[i] > 0.0 else 0.0
                g = 0.5 * (s2_hi * pos - s2_lo * neg)
                u[i] = u[i] + dt * g
    return np.asarray(u)


def lattice_step(v_next, pd, pm, pu, qv, gvals, fvals, double dt):
    cdef const double[::1] v = np.ascontiguousarray(v_next, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(pd, dtype=np.float64)
    cdef const double[::1] bm = np.ascontiguousarray(pm, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(pu, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(qv, dtype=np.float64)
    cdef Py_ssize_t m = v.shape[0] - 2
    cdef const double[::1] gv = np.ascontiguousarray(np.broadcast_to(gvals, (m,)), dtype=np.float64)
    cdef const double[::1] fv = np.ascontiguousarray(np.broadcast_to(fvals, (m,)), dtype=np.float64)
    out = np.empty(m, dtype=np.float64)
    arg = np.zeros(m, dtype=np.int64)
    cdef double[::1] o = out
    cdef int64_t[::1] ar = arg
    cdef Py_ssize_t j, g, ng = a.shape[0]
    cdef double best, cand
    with nogil:
        for j in range(m):
            best = a[0] * v[j] + bm[0] * v[j + 1] + c[0] * v[j + 2] + gv[j] * q[0]
            for g in range(1, ng):
                cand = a[g] * v[j] + bm[g] * v[j + 1] + c[g] * v[j + 2] + gv[j] * q[g]
                if cand > best:
                    best = cand
                    ar[j] = g
            o[j] = best + fv[j] * dt
    return out, arg
