"""Pure-numpy reference implementations of the hot kernels.

These are the fallback used when the compiled ``_kernels`` extension is not
available (or ``GSDELAB_PURE_PYTHON=1`` is set).  Operation order mirrors the
Cython code so that the deterministic kernels agree bitwise.
"""
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def philox4x32(counters, key, rounds=10):
    """Philox4x32 block cipher applied row-wise to ``counters`` (M, 4) uint32."""
    c = np.asarray(counters, dtype=np.uint32)
    x0, x1, x2, x3 = (c[:, i].astype(np.uint64) for i in range(4))
    k0 = np.uint32(key[0])
    k1 = np.uint32(key[1])
    for r in range(rounds):
        if r:
            k0 = np.uint32((int(k0) + int(_W0)) & 0xFFFFFFFF)
            k1 = np.uint32((int(k1) + int(_W1)) & 0xFFFFFFFF)
        p0 = x0 * _M0
        p1 = x2 * _M1
        y0 = ((p1 >> _S32) ^ x1 ^ np.uint64(k0)) & _MASK
        y1 = p1 & _MASK
        y2 = ((p0 >> _S32) ^ x3 ^ np.uint64(k1)) & _MASK
        y3 = p0 & _MASK
        x0, x1, x2, x3 = y0, y1, y2, y3
    return np.stack([x0, x1, x2, x3], axis=1).astype(np.uint32)


def _uniform53(hi, lo):
    a = (hi >> np.uint32(5)).astype(np.float64)
    b = (lo >> np.uint32(6)).astype(np.float64)
    return (a * 67108864.0 + b + 0.5) * (1.0 / 9007199254740992.0)


def normal_block(seed, path_start, n_paths, n_steps, dim):
    """Standard normals of shape (n_paths, n_steps, dim) from Philox counters.

    Entry (p, k, j) is a pure function of (seed, path_start + p, k, j).
    """
    n_blocks = (dim + 1) // 2
    p = np.arange(path_start, path_start + n_paths, dtype=np.uint64)
    k = np.arange(n_steps, dtype=np.uint64)
    b = np.arange(n_blocks, dtype=np.uint64)
    P, K, B = np.meshgrid(p, k, b, indexing="ij")
    ctr = np.empty((P.size, 4), dtype=np.uint32)
    ctr[:, 0] = K.ravel().astype(np.uint32)
    ctr[:, 1] = B.ravel().astype(np.uint32)
    ctr[:, 2] = (P.ravel() & _MASK).astype(np.uint32)
    ctr[:, 3] = (P.ravel() >> _S32).astype(np.uint32)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    out = philox4x32(ctr, (seed & 0xFFFFFFFF, seed >> 32))
    u1 = _uniform53(out[:, 0], out[:, 1])
    u2 = _uniform53(out[:, 2], out[:, 3])
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 6.283185307179586 * u2
    z = np.empty((P.size, 2))
    z[:, 0] = rad * np.cos(ang)
    z[:, 1] = rad * np.sin(ang)
    z = z.reshape(n_paths, n_steps, 2 * n_blocks)
    return np.ascontiguousarray(z[:, :, :dim])


def gheat_steps(u, n_t, dt, dx, s2_lo, s2_hi, boundary):
    """Advance the explicit G-heat scheme ``n_t`` steps (1-D, uniform grid).

    boundary 0: zero curvature at the ends (ghost node by linear
    extrapolation); 1: zero slope (reflecting ghost node).
    """
    u = np.array(u, dtype=np.float64, copy=True)
    inv = 1.0 / (dx * dx)
    d2 = np.empty_like(u)
    for _ in range(n_t):
        d2[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv
        if boundary == 0:
            d2[0] = 0.0
            d2[-1] = 0.0
        else:
            d2[0] = (2.0 * u[1] - 2.0 * u[0]) * inv
            d2[-1] = (2.0 * u[-2] - 2.0 * u[-1]) * inv
        g = 0.5 * (s2_hi * np.maximum(d2, 0.0) - s2_lo * np.maximum(-d2, 0.0))
        u = u + dt * g
    return u


def lattice_step(v_next, pd, pm, pu, qv, gvals, fvals, dt):
    """One backward DP step on a recombining trinomial layer.

    ``v_next`` has length m + 2; returns (values, argmax) of length m with
    value_j = max_g [pd[g] v_j + pm[g] v_{j+1} + pu[g] v_{j+2} + gvals_j qv[g]]
    + fvals_j dt.  Ties resolve to the lowest index.
    """
    v_next = np.asarray(v_next, dtype=np.float64)
    lo, mid, hi = v_next[:-2], v_next[1:-1], v_next[2:]
    best = None
    arg = np.zeros(lo.shape[0], dtype=np.int64)
    for g in range(len(pd)):
        cand = pd[g] * lo + pm[g] * mid + pu[g] * hi + gvals * qv[g]
        if best is None:
            best = cand
        else:
            better = cand > best
            best = np.where(better, cand, best)
            arg[better] = g
    return best + fvals * dt, arg
