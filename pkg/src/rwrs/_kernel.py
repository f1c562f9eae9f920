"""Compiled inner loops for the trajectory engine.

Lattice points are encoded as int64 keys (see ``trajectory.encode``) so the
same loop serves d = 1 and d = 2.  Occupancy lives in an open-addressing
hash table (linear probing) that maps a key to its index in the insertion
ordered range arrays ``rkeys``/``counts``.

The step loop never grows arrays itself: when a table, range array or
histogram is full it returns the index of the step it could not take and a
status code, the caller grows the storage and resumes.
"""

import numpy as np
from numba import njit

EMPTY = np.iinfo(np.int64).min

OK = 0
GROW_TABLE = 1
GROW_RANGE = 2
GROW_HIST = 3
RANGE_CAP = 4

_MIX = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, inline="always")
def _slot(slot_keys, key):
    mask = slot_keys.shape[0] - 1
    h = np.uint64(key) * _MIX
    i = np.int64(h >> np.uint64(32)) & mask
    while True:
        k = slot_keys[i]
        if k == key or k == EMPTY:
            return i
        i = (i + 1) & mask


@njit(cache=True)
def lookup(slot_keys, slot_idx, key):
    i = _slot(slot_keys, key)
    if slot_keys[i] == EMPTY:
        return -1
    return slot_idx[i]


@njit(cache=True)
def advance(incs, start, state, slot_keys, slot_idx, rkeys, counts, hist,
            powers, lsums, shift_keys, overlaps, range_cap):
    """Apply increments ``incs[start:]``.

    ``state`` holds [position, range size].  Returns (next index, status).
    """
    pos = state[0]
    nrange = state[1]
    table_limit = slot_keys.shape[0] // 2
    npow = powers.shape[0]
    nshift = shift_keys.shape[0]
    for i in range(start, incs.shape[0]):
        new_pos = pos + incs[i]
        s = _slot(slot_keys, new_pos)
        if slot_keys[s] == EMPTY:
            if nrange >= range_cap:
                state[0] = pos
                state[1] = nrange
                return i, RANGE_CAP
            if nrange >= table_limit:
                state[0] = pos
                state[1] = nrange
                return i, GROW_TABLE
            if nrange >= rkeys.shape[0]:
                state[0] = pos
                state[1] = nrange
                return i, GROW_RANGE
            slot_keys[s] = new_pos
            slot_idx[s] = nrange
            rkeys[nrange] = new_pos
            counts[nrange] = 1
            nrange += 1
            hist[1] += 1
            for j in range(npow):
                lsums[j] += 1.0
            for j in range(nshift):
                w = shift_keys[j]
                if w == 0:
                    overlaps[j] += 1
                else:
                    t = _slot(slot_keys, new_pos - w)
                    if slot_keys[t] != EMPTY:
                        overlaps[j] += 1
                    t = _slot(slot_keys, new_pos + w)
                    if slot_keys[t] != EMPTY:
                        overlaps[j] += 1
        else:
            r = slot_idx[s]
            old = counts[r]
            if old + 1 >= hist.shape[0]:
                state[0] = pos
                state[1] = nrange
                return i, GROW_HIST
            counts[r] = old + 1
            hist[old] -= 1
            hist[old + 1] += 1
            lo = float(old)
            hi = lo + 1.0
            for j in range(npow):
                k = powers[j]
                if k > 0:
                    lsums[j] += hi**k - lo**k
        pos = new_pos
    state[0] = pos
    state[1] = nrange
    return incs.shape[0], OK


@njit(cache=True)
def rehash(slot_keys, slot_idx, rkeys, nrange, new_size):
    keys = np.full(new_size, EMPTY, dtype=np.int64)
    idx = np.zeros(new_size, dtype=np.int64)
    for r in range(nrange):
        s = _slot(keys, rkeys[r])
        keys[s] = rkeys[r]
        idx[s] = r
    return keys, idx


@njit(cache=True)
def shifted_sum(slot_keys, slot_idx, rkeys, counts, nrange, w, alpha):
    """Sum over x of l(x)^alpha * l(x + w)^alpha, one pass over the range."""
    total = 0.0
    for r in range(nrange):
        q = lookup(slot_keys, slot_idx, rkeys[r] + w)
        if q >= 0:
            total += (float(counts[r]) * float(counts[q])) ** alpha
    return total


@njit(cache=True)
def overlap_count(slot_keys, slot_idx, rkeys, nrange, w):
    """#(R intersect (R + w)) recomputed from scratch."""
    total = 0
    for r in range(nrange):
        if lookup(slot_keys, slot_idx, rkeys[r] - w) >= 0:
            total += 1
    return total
