"""Hot loops, compiled with numba when available.

Set ``FRACINF_DISABLE_NUMBA=1`` to force the pure-numpy implementations.
Both paths consume the same counter-based random stream, so Monte-Carlo
runs differ at most by last-bit rounding of transcendental functions.
"""
import math
import os

import numpy as np

_FLAG = os.environ.get("FRACINF_DISABLE_NUMBA", "").strip().lower()
try:  # pragma: no cover - import guard
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG in ("", "0", "false", "no")


def _jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=False, nogil=True)(fn)
    return fn


def backend():
    return "numba" if USE_NUMBA else "numpy"


_C_INC = 0x9E3779B97F4A7C15
_C_M1 = 0xBF58476D1CE4E5B9
_C_M2 = 0x94D049BB133111EB
_C_STREAM = 0xD6E8FEB86659FD93
_TWO53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# counter-based uniforms (splitmix64 finaliser)

def _mix_py(z):
    z = (z + np.uint64(_C_INC))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C_M2)
    return z ^ (z >> np.uint64(31))


@_jit
def _mix_nb(z):
    z = z + np.uint64(_C_INC)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C_M2)
    return z ^ (z >> np.uint64(31))


def stream_key(seed, stream):
    """64-bit key of stream ``stream`` under ``seed``."""
    with np.errstate(over="ignore"):
        a = _mix_py(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        b = np.uint64(stream & 0xFFFFFFFFFFFFFFFF) * np.uint64(_C_STREAM)
        return _mix_py(a ^ b)


def uniforms(key, start, n):
    """``n`` uniforms in (0, 1) from counters ``start .. start+n-1``."""
    with np.errstate(over="ignore"):
        ctr = np.uint64(key) + np.arange(start, start + n, dtype=np.uint64) * np.uint64(_C_INC)
        z = _mix_py(ctr)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53


@_jit
def _uniform_nb(key, counter):
    z = _mix_nb(key + np.uint64(counter) * np.uint64(_C_INC))
    return (float(z >> np.uint64(11)) + 0.5) * _TWO53


# ---------------------------------------------------------------------------
# symmetric stable variates (Chambers-Mallows-Stuck), unit scale

def cms_from_uniforms(u1, u2, alpha):
    """Symmetric ``alpha``-stable draws with characteristic function exp(-|xi|^alpha)."""
    v = np.pi * (u1 - 0.5)
    w = -np.log(u2)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha))


@_jit
def _cms_nb(u1, u2, alpha):
    v = math.pi * (u1 - 0.5)
    w = -math.log(u2)
    return (math.sin(alpha * v) / math.cos(v) ** (1.0 / alpha)
            * (math.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha))


def stable_draws(key, start, n, alpha):
    """Draws ``start .. start+n-1`` of a stream; two counters per draw."""
    u = uniforms(key, 2 * start, 2 * n)
    return cms_from_uniforms(u[0::2], u[1::2], alpha)


# ---------------------------------------------------------------------------
# one-dimensional exit episodes

@_jit
def _episodes_nb(keys, signs, x0, a, b, scale, alpha, ydir, zdir, glo, gh, max_turns):
    n_ep = keys.size
    exits = np.empty(n_ep)
    turns = np.empty(n_ep, dtype=np.int64)
    trunc = np.zeros(n_ep, dtype=np.bool_)
    ng = ydir.size
    for e in range(n_ep):
        key = keys[e]
        sg = signs[e]
        x = x0
        t = 0
        while True:
            if t >= max_turns:
                trunc[e] = True
                break
            i = int(math.floor((x - glo) / gh + 0.5))
            if i < 0:
                i = 0
            elif i >= ng:
                i = ng - 1
            u1 = _uniform_nb(key, 2 * t)
            u2 = _uniform_nb(key, 2 * t + 1)
            X = sg * scale * _cms_nb(u1, u2, alpha)
            if X >= 0.0:
                x = x + X * ydir[i]
            else:
                x = x + X * zdir[i]
            t += 1
            if x <= a or x >= b:
                break
        exits[e] = x
        turns[e] = t
    return exits, turns, trunc


def _episodes_np(keys, signs, x0, a, b, scale, alpha, ydir, zdir, glo, gh, max_turns):
    n_ep = keys.size
    x = np.full(n_ep, float(x0))
    turns = np.zeros(n_ep, dtype=np.int64)
    alive = np.ones(n_ep, dtype=bool)
    trunc = np.zeros(n_ep, dtype=bool)
    ng = ydir.size
    t = 0
    with np.errstate(over="ignore"):
        while alive.any():
            idx = np.flatnonzero(alive)
            if t >= max_turns:
                trunc[idx] = True
                break
            ctr = keys[idx] + np.uint64(2 * t) * np.uint64(_C_INC)
            u1 = ((_mix_py(ctr) >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53
            ctr = keys[idx] + np.uint64(2 * t + 1) * np.uint64(_C_INC)
            u2 = ((_mix_py(ctr) >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53
            X = signs[idx] * scale * cms_from_uniforms(u1, u2, alpha)
            cell = np.clip(np.floor((x[idx] - glo) / gh + 0.5).astype(np.int64), 0, ng - 1)
            step = np.where(X >= 0.0, X * ydir[cell], X * zdir[cell])
            x[idx] = x[idx] + step
            t += 1
            turns[idx] = t
            done = (x[idx] <= a) | (x[idx] >= b)
            alive[idx[done]] = False
    return x, turns, trunc


def run_interval_episodes(keys, signs, x0, a, b, scale, alpha, ydir, zdir, glo, gh, max_turns):
    """Exit positions, turn counts and truncation flags of 1-D episodes."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    signs = np.ascontiguousarray(signs, dtype=np.float64)
    ydir = np.ascontiguousarray(ydir, dtype=np.float64)
    zdir = np.ascontiguousarray(zdir, dtype=np.float64)
    fn = _episodes_nb if USE_NUMBA else _episodes_np
    return fn(keys, signs, float(x0), float(a), float(b), float(scale), float(alpha),
              ydir, zdir, float(glo), float(gh), int(max_turns))


# ---------------------------------------------------------------------------
# two-dimensional strip sweep (periodic in x2)

@_jit
def _strip_value_nb(V, p1, p2, x1lo, h, n1, n2, period, g1, g2):
    b1 = g1[0] + g1[1] * math.sin(g1[2] * p2 + g1[3])
    if p1 <= b1:
        return 0.0
    b2 = g2[0] + g2[1] * math.sin(g2[2] * p2 + g2[3])
    if p1 >= b2:
        return 1.0
    fi = (p1 - x1lo) / h
    i0 = int(math.floor(fi))
    if i0 < 0:
        i0 = 0
    elif i0 > n1 - 2:
        i0 = n1 - 2
    ti = fi - i0
    q = p2 - period * math.floor(p2 / period)
    fj = q / h
    j0 = int(math.floor(fj))
    tj = fj - j0
    j0 = j0 % n2
    j1 = (j0 + 1) % n2
    return ((1 - ti) * ((1 - tj) * V[i0, j0] + tj * V[i0, j1])
            + ti * ((1 - tj) * V[i0 + 1, j0] + tj * V[i0 + 1, j1]))


@_jit
def _strip_sweep_nb(V, free_i, free_j, floor, x1lo, h, period, dirs, w, rem, tail, g1, g2, top, bottom):
    n1, n2 = V.shape
    K = dirs.shape[0]
    kmax = w.size - 1
    out = V.copy()
    resid = 0.0
    A = np.empty(K)
    for f in range(free_i.size):
        i = free_i[f]
        j = free_j[f]
        x1 = x1lo + i * h
        x2 = j * h
        for k in range(K):
            d1 = dirs[k, 0]
            d2 = dirs[k, 1]
            acc = w[0] * V[i, j]
            exited = False
            for m in range(1, kmax + 1):
                p1 = x1 + m * h * d1
                if d1 > 0.0 and p1 >= top:
                    acc += rem[m]
                    exited = True
                    break
                if d1 < 0.0 and p1 <= bottom:
                    exited = True
                    break
                p2 = x2 + m * h * d2
                acc += w[m] * _strip_value_nb(V, p1, p2, x1lo, h, n1, n2, period, g1, g2)
            if not exited:
                p1 = x1 + (kmax + 1) * h * d1
                p2 = x2 + (kmax + 1) * h * d2
                acc += tail * _strip_value_nb(V, p1, p2, x1lo, h, n1, n2, period, g1, g2)
            A[k] = acc
        hi = A[0]
        lo = A[0]
        for k in range(1, K):
            if A[k] > hi:
                hi = A[k]
            if A[k] < lo:
                lo = A[k]
        val = 0.5 * (hi + lo)
        if val < floor[i, j]:
            val = floor[i, j]
        diff = abs(val - V[i, j])
        if diff > resid:
            resid = diff
        out[i, j] = val
    return out, resid


def _strip_value_np(V, p1, p2, x1lo, h, period, g1, g2):
    n1, n2 = V.shape
    b1 = g1[0] + g1[1] * np.sin(g1[2] * p2 + g1[3])
    b2 = g2[0] + g2[1] * np.sin(g2[2] * p2 + g2[3])
    fi = (p1 - x1lo) / h
    i0 = np.clip(np.floor(fi).astype(np.int64), 0, n1 - 2)
    ti = fi - i0
    q = p2 - period * np.floor(p2 / period)
    fj = q / h
    j0 = np.floor(fj).astype(np.int64)
    tj = fj - j0
    j0 = j0 % n2
    j1 = (j0 + 1) % n2
    val = ((1 - ti) * ((1 - tj) * V[i0, j0] + tj * V[i0, j1])
           + ti * ((1 - tj) * V[i0 + 1, j0] + tj * V[i0 + 1, j1]))
    val = np.where(p1 >= b2, 1.0, val)
    return np.where(p1 <= b1, 0.0, val)


def _strip_sweep_np(V, free_i, free_j, floor, x1lo, h, period, dirs, w, rem, tail, g1, g2, top, bottom):
    x1 = x1lo + free_i * h
    x2 = free_j * h
    K = dirs.shape[0]
    kmax = w.size - 1
    A = np.empty((K, free_i.size))
    for k in range(K):
        d1, d2 = dirs[k]
        acc = w[0] * V[free_i, free_j]
        alive = np.ones(free_i.size, dtype=bool)
        for m in range(1, kmax + 1):
            if not alive.any():
                break
            p1 = x1 + m * h * d1
            if d1 > 0.0:
                up = alive & (p1 >= top)
                acc = np.where(up, acc + rem[m], acc)
                alive &= ~up
            elif d1 < 0.0:
                alive &= ~(p1 <= bottom)
            p2 = x2 + m * h * d2
            val = _strip_value_np(V, p1, p2, x1lo, h, period, g1, g2)
            acc = np.where(alive, acc + w[m] * val, acc)
        if alive.any():
            p1 = x1 + (kmax + 1) * h * d1
            p2 = x2 + (kmax + 1) * h * d2
            val = _strip_value_np(V, p1, p2, x1lo, h, period, g1, g2)
            acc = np.where(alive, acc + tail * val, acc)
        A[k] = acc
    val = 0.5 * (A.max(axis=0) + A.min(axis=0))
    val = np.maximum(val, floor[free_i, free_j])
    out = V.copy()
    resid = float(np.max(np.abs(val - V[free_i, free_j]))) if free_i.size else 0.0
    out[free_i, free_j] = val
    return out, resid


def strip_sweep(V, free_i, free_j, floor, x1lo, h, period, dirs, w, rem, tail, g1, g2, top, bottom):
    """One Jacobi sweep of the directional sup-inf update on a periodic strip grid."""
    args = (np.ascontiguousarray(V, dtype=np.float64),
            np.ascontiguousarray(free_i, dtype=np.int64), np.ascontiguousarray(free_j, dtype=np.int64),
            np.ascontiguousarray(floor, dtype=np.float64), float(x1lo), float(h), float(period),
            np.ascontiguousarray(dirs, dtype=np.float64), np.ascontiguousarray(w, dtype=np.float64),
            np.ascontiguousarray(rem, dtype=np.float64), float(tail),
            np.ascontiguousarray(g1, dtype=np.float64), np.ascontiguousarray(g2, dtype=np.float64),
            float(top), float(bottom))
    if USE_NUMBA:
        return _strip_sweep_nb(*args)
    return _strip_sweep_np(*args)
