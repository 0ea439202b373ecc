"""Compiled inner loops for the simulation engine.

Randomness comes from SplitMix64 streams.  A stream is keyed by a 64-bit
value derived from ``(seed, replica, site)``; its ``k``-th output is the
SplitMix64 finalizer applied to ``key + k * GOLDEN``.  Keying by absolute site
makes event streams on overlapping windows agree site by site.

All kernels release the GIL so replica blocks can run on a thread pool.
"""
import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53
GILLESPIE_SALT = np.uint64(0xD1B54A32D192ED03)


@njit(cache=True, nogil=True)
def mix64(x):
    z = x + GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def replica_key(seed, replica):
    return mix64(mix64(np.uint64(seed)) + np.uint64(replica))


@njit(cache=True, nogil=True)
def site_key(seed, replica, site):
    # negative sites wrap to their two's complement
    return mix64(replica_key(seed, replica) + np.uint64(np.int64(site)))


@njit(cache=True, nogil=True)
def gillespie_key(seed, replica):
    return mix64(replica_key(seed, replica) ^ GILLESPIE_SALT)


@njit(cache=True, nogil=True)
def unit(state):
    """Uniform double in [0, 1) from the stream position ``state``."""
    return np.float64(mix64(state) >> _S11) * _TO_UNIT


@njit(cache=True, nogil=True)
def generate_events(seed, replica, lo, n, c_max, t):
    """Per-site Poisson(c_max) clocks on (0, t] for sites lo..lo+n-1.

    Returns ``(times, sites, marks)`` sorted by time; equal times keep
    ascending site order.
    """
    mean = c_max * t * n
    cap = int(mean + 10.0 * np.sqrt(mean) + 16.0)
    times = np.empty(cap, np.float64)
    sites = np.empty(cap, np.int64)
    marks = np.empty(cap, np.float64)
    count = 0
    if c_max > 0.0 and t > 0.0:
        for i in range(n):
            x = lo + i
            state = site_key(seed, replica, x)
            u_time = 0.0
            while True:
                state += GOLDEN
                u_time -= np.log1p(-unit(state)) / c_max
                if u_time > t:
                    break
                state += GOLDEN
                v = unit(state)
                if count == cap:
                    cap *= 2
                    times2 = np.empty(cap, np.float64)
                    sites2 = np.empty(cap, np.int64)
                    marks2 = np.empty(cap, np.float64)
                    times2[:count] = times[:count]
                    sites2[:count] = sites[:count]
                    marks2[:count] = marks[:count]
                    times, sites, marks = times2, sites2, marks2
                times[count] = u_time
                sites[count] = x
                marks[count] = v
                count += 1
    order = np.argsort(times[:count], kind="mergesort")
    return times[:count][order], sites[:count][order], marks[:count][order]


@njit(cache=True, nogil=True)
def pattern_at(core, i, left, right, radius):
    n = core.shape[0]
    code = 0
    for d in range(-radius, radius + 1):
        j = i + d
        if j < 0:
            s = left
        elif j >= n:
            s = right
        else:
            s = core[j]
        code |= s << (d + radius)
    return code


@njit(cache=True, nogil=True)
def evolve(core, left, right, lo, table, radius, c_max, sites, marks):
    """Apply uniformized clock rings in order, mutating ``core`` in place."""
    for e in range(sites.shape[0]):
        i = sites[e] - lo
        r = table[pattern_at(core, i, left, right, radius)]
        if core[i] == 0:
            p1 = r / c_max
        else:
            p1 = (c_max - r) / c_max
        core[i] = 1 if marks[e] < p1 else 0


@njit(cache=True, nogil=True)
def batch_uniformized(seed, rep_start, rep_count, lo, init_core, left, right,
                      table, radius, c_max, t):
    n = init_core.shape[0]
    out = np.empty((rep_count, n), np.int8)
    for k in range(rep_count):
        core = init_core.copy()
        _, sites, marks = generate_events(seed, rep_start + k, lo, n, c_max, t)
        evolve(core, left, right, lo, table, radius, c_max, sites, marks)
        out[k] = core
    return out


@njit(cache=True, nogil=True)
def batch_coupled(seed, rep_start, rep_count, lo, core_hi, core_lo, core_tr, shift,
                  left, right, table, radius, c_max, t):
    """Evolve two ordered configurations on shared events, plus a translated run.

    ``core_tr`` lives on the window starting at ``lo + shift`` and is driven
    by the same events relabelled ``x -> x + shift``.
    """
    n = core_hi.shape[0]
    out_hi = np.empty((rep_count, n), np.int8)
    out_lo = np.empty((rep_count, n), np.int8)
    out_tr = np.empty((rep_count, n), np.int8)
    for k in range(rep_count):
        a = core_hi.copy()
        b = core_lo.copy()
        c = core_tr.copy()
        _, sites, marks = generate_events(seed, rep_start + k, lo, n, c_max, t)
        evolve(a, left, right, lo, table, radius, c_max, sites, marks)
        evolve(b, left, right, lo, table, radius, c_max, sites, marks)
        evolve(c, left, right, lo + shift, table, radius, c_max, sites + shift, marks)
        out_hi[k] = a
        out_lo[k] = b
        out_tr[k] = c
    return out_hi, out_lo, out_tr


@njit(cache=True, nogil=True)
def gillespie(core, left, right, table, radius, t, key):
    """Direct-method simulation on the window, mutating ``core`` in place."""
    n = core.shape[0]
    rates = np.empty(n, np.float64)
    total = 0.0
    for i in range(n):
        rates[i] = table[pattern_at(core, i, left, right, radius)]
        total += rates[i]
    state = np.uint64(key)
    now = 0.0
    steps = 0
    while total > 0.0:
        state += GOLDEN
        now -= np.log1p(-unit(state)) / total
        if now > t:
            break
        state += GOLDEN
        target = unit(state) * total
        chosen = -1
        acc = 0.0
        for i in range(n):
            if rates[i] > 0.0:
                chosen = i
                acc += rates[i]
                if target < acc:
                    break
        core[chosen] = 1 - core[chosen]
        for i in range(max(0, chosen - radius), min(n, chosen + radius + 1)):
            new = table[pattern_at(core, i, left, right, radius)]
            total += new - rates[i]
            rates[i] = new
        steps += 1
        if steps % 256 == 0 or total < 1e-9:
            # bound drift of the running sum
            total = 0.0
            for i in range(n):
                total += rates[i]


@njit(cache=True, nogil=True)
def batch_gillespie(seed, rep_start, rep_count, init_core, left, right, table, radius, t):
    n = init_core.shape[0]
    out = np.empty((rep_count, n), np.int8)
    for k in range(rep_count):
        core = init_core.copy()
        gillespie(core, left, right, table, radius, t, gillespie_key(seed, rep_start + k))
        out[k] = core
    return out
