"""Streaming simulation of a walk with incremental occupancy statistics.

The range follows R(n) = {S(1), ..., S(n)}: the starting point is counted
only once the walk comes back to it, so that the local times always sum to
n.  Per step the engine does O(1) amortized work, plus O(#shifts) when the
walk enters a new site.  Memory is O(#R(n)); trajectories are never stored.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .errors import DomainError, ResourceError, UsageError
from .seeding import make_rng
from .walk_models import build_model, sample_jumps

# 2-D points are packed as x * KEY_BASE + y
KEY_BASE = 1 << 32
CHUNK = 1 << 16
DEFAULT_RANGE_CAP = 200_000_000
THRESHOLD_TOL = 1e-9
MAX_POWER = 8


def encode(points, dimension):
    """Pack lattice points (shape (m, d) or (d,)) into int64 keys."""
    p = np.asarray(points, dtype=np.int64)
    if dimension == 1:
        return p.reshape(-1)
    p = p.reshape(-1, 2)
    return p[:, 0] * KEY_BASE + p[:, 1]


def decode(keys, dimension):
    keys = np.asarray(keys, dtype=np.int64)
    if dimension == 1:
        return keys.reshape(-1, 1)
    half = KEY_BASE // 2
    y = (keys + half) % KEY_BASE - half
    x = (keys - y) // KEY_BASE
    return np.stack([x, y], axis=1)


def as_vector(w, dimension):
    """Normalize a shift given as int, tuple or array to a tuple."""
    if np.ndim(w) == 0:
        w = (int(w),)
    w = tuple(int(x) for x in w)
    if len(w) != dimension:
        raise UsageError(f"shift {w} does not have dimension {dimension}")
    return w


def vector_label(w):
    return ",".join(str(x) for x in w)


@dataclass
class TrajectoryStats:
    n: int
    range_size: int
    self_intersections: dict = field(default_factory=dict)
    shift_overlaps: dict = field(default_factory=dict)
    localtime_histogram: dict = field(default_factory=dict)
    shifted_moments: dict = field(default_factory=dict)

    def to_record(self, model=None, seed=None):
        """JSON-ready snapshot record."""
        return {
            "model": model,
            "n": self.n,
            "seed": seed,
            "range_size": self.range_size,
            "L": {str(k): v for k, v in sorted(self.self_intersections.items())},
            "overlaps": {vector_label(w): v for w, v in self.shift_overlaps.items()},
            "histogram": [[k, v] for k, v in sorted(self.localtime_histogram.items())],
        }


def folner_ratio(stats, w):
    """#[R(n) sym-diff (R(n) + w)] / #R(n) = 2 (1 - L_{n,w}(0) / #R(n))."""
    w = tuple(int(x) for x in np.atleast_1d(w))
    if w not in stats.shift_overlaps:
        raise UsageError(f"shift {w} was not tracked for this trajectory")
    if stats.range_size == 0:
        raise UsageError("folner ratio of an empty range")
    return 2.0 * (1.0 - stats.shift_overlaps[w] / stats.range_size)


@dataclass
class LocalTimeField:
    """Occupancy of the range: distinct points (insertion order) and l(n, x)."""

    n: int
    dimension: int
    points: np.ndarray
    local_times: np.ndarray

    @property
    def range_size(self):
        return len(self.local_times)

    @property
    def range_list(self):
        return self.points

    @property
    def occupancy(self):
        return {
            tuple(int(c) for c in p): int(l)
            for p, l in zip(self.points, self.local_times)
        }

    def histogram(self):
        vals, cnt = np.unique(self.local_times, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}


class TrajectoryEngine:
    """Incremental occupancy statistics for one walk.

    Feed jumps with :meth:`advance`; read :meth:`snapshot` at checkpoints.
    """

    def __init__(self, dimension, powers=(0, 1, 2), shifts=(),
                 range_cap=DEFAULT_RANGE_CAP):
        powers = sorted(set(int(k) for k in powers))
        if any(k < 0 or k > MAX_POWER for k in powers):
            raise DomainError(f"powers must lie in 0..{MAX_POWER}")
        self.dimension = dimension
        self.powers = np.array(powers, dtype=np.int64)
        self.shifts = [as_vector(w, dimension) for w in dict.fromkeys(
            as_vector(w, dimension) for w in shifts)]
        self.shift_keys = encode(np.array(self.shifts, dtype=np.int64).reshape(-1, dimension),
                                 dimension) if self.shifts else np.zeros(0, np.int64)
        self.range_cap = int(range_cap)
        self.n = 0
        self._state = np.zeros(2, dtype=np.int64)
        self._slot_keys = np.full(1 << 10, _kernel.EMPTY, dtype=np.int64)
        self._slot_idx = np.zeros(1 << 10, dtype=np.int64)
        self._rkeys = np.zeros(1 << 9, dtype=np.int64)
        self._counts = np.zeros(1 << 9, dtype=np.int64)
        self._hist = np.zeros(64, dtype=np.int64)
        self._lsums = np.zeros(len(self.powers), dtype=float)
        self._overlaps = np.zeros(len(self.shifts), dtype=np.int64)

    @property
    def range_size(self):
        return int(self._state[1])

    @property
    def table_entries(self):
        """Number of stored occupancy entries (equals #R(n))."""
        return int(self._state[1])

    def advance(self, jumps):
        """Apply a block of jumps, shape (m, d)."""
        incs = encode(jumps, self.dimension)
        start = 0
        while True:
            start, status = _kernel.advance(
                incs, start, self._state, self._slot_keys, self._slot_idx,
                self._rkeys, self._counts, self._hist, self.powers, self._lsums,
                self.shift_keys, self._overlaps, self.range_cap)
            if status == _kernel.OK:
                break
            if status == _kernel.RANGE_CAP:
                self.n += start
                raise ResourceError(
                    f"range exceeded the cap of {self.range_cap} entries at step {self.n}",
                    reached=self.n)
            self._grow(status)
        self.n += len(incs)

    def _grow(self, status):
        if status == _kernel.GROW_TABLE:
            size = 2 * len(self._slot_keys)
            self._slot_keys, self._slot_idx = _kernel.rehash(
                self._slot_keys, self._slot_idx, self._rkeys, self.range_size, size)
        elif status == _kernel.GROW_RANGE:
            self._rkeys = _grown(self._rkeys)
            self._counts = _grown(self._counts)
        elif status == _kernel.GROW_HIST:
            self._hist = _grown(self._hist)

    def snapshot(self):
        hist = self._hist
        nz = np.nonzero(hist)[0]
        return TrajectoryStats(
            n=self.n,
            range_size=self.range_size,
            self_intersections={int(k): _exact(v) for k, v in zip(self.powers, self._lsums)},
            shift_overlaps={w: int(v) for w, v in zip(self.shifts, self._overlaps)},
            localtime_histogram={int(v): int(hist[v]) for v in nz},
        )

    def shifted_moment(self, w, alpha):
        """L_{n,w}(alpha) by one pass over the occupancy map."""
        wk = int(encode(np.array(as_vector(w, self.dimension)), self.dimension)[0])
        return _exact(_kernel.shifted_sum(self._slot_keys, self._slot_idx, self._rkeys,
                                          self._counts, self.range_size, wk, float(alpha)))

    def overlap_recount(self, w):
        wk = int(encode(np.array(as_vector(w, self.dimension)), self.dimension)[0])
        return int(_kernel.overlap_count(self._slot_keys, self._slot_idx, self._rkeys,
                                         self.range_size, wk))

    def field(self):
        r = self.range_size
        return LocalTimeField(
            n=self.n,
            dimension=self.dimension,
            points=decode(self._rkeys[:r].copy(), self.dimension),
            local_times=self._counts[:r].copy(),
        )


def _grown(a):
    b = np.zeros(2 * len(a), dtype=a.dtype)
    b[: len(a)] = a
    return b


def _exact(v):
    v = float(v)
    return int(v) if abs(v) < 2.0**53 and v == int(v) else v


def default_checkpoints(n, rho=0.5):
    """Geometric schedule ceil(n * rho^j), returned in increasing order."""
    if n <= 0:
        return []
    pts, j = set(), 0
    while True:
        c = math.ceil(n * rho**j)
        pts.add(c)
        if c <= 1:
            break
        j += 1
    return sorted(pts)


@dataclass
class TrajectoryRun:
    stats: list
    field: LocalTimeField

    def at(self, n):
        for s in self.stats:
            if s.n == n:
                return s
        raise KeyError(n)


def run_trajectory(model, n, seed=0, checkpoints=None, powers=(0, 1, 2), shifts=(),
                   shifted=(), range_cap=DEFAULT_RANGE_CAP, jumps=None):
    """Simulate ``n`` steps and return stats at every checkpoint.

    ``model`` is a :class:`JumpModel` or a model name.  ``seed`` is an
    integer or a :class:`numpy.random.Generator`.  Jumps are drawn in fixed
    blocks of ``CHUNK`` so that a trajectory's prefix does not depend on
    ``n`` or the checkpoints.  ``shifted`` lists (w, alpha) pairs for which
    L_{n,w}(alpha) is computed at each checkpoint.  ``jumps`` replaces the
    sampler by an explicit jump sequence (then ``n`` is its length).
    """
    if isinstance(model, str):
        model = build_model(model)
    if jumps is not None:
        jumps = np.asarray(jumps, dtype=np.int64).reshape(-1, model.dimension)
        n = len(jumps)
    n = int(n)
    if checkpoints is None:
        checkpoints = default_checkpoints(n)
    checkpoints = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise UsageError("checkpoints must be strictly increasing")
    if checkpoints and (checkpoints[0] < 1 or checkpoints[-1] > n):
        raise UsageError("checkpoints must lie in 1..n")
    engine = TrajectoryEngine(model.dimension, powers, shifts, range_cap)
    shifted = [(as_vector(w, model.dimension), int(a)) for w, a in shifted]
    if n == 0:
        return TrajectoryRun([], engine.field())
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)

    stats = []
    targets = iter(checkpoints)
    nxt = next(targets, None)
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        block = jumps[done:done + m] if jumps is not None else sample_jumps(model, rng, CHUNK)[:m]
        lo = 0
        while nxt is not None and nxt <= done + m:
            cut = nxt - done
            _advance(engine, block[lo:cut], stats)
            snap = engine.snapshot()
            for w, a in shifted:
                snap.shifted_moments[(w, a)] = engine.shifted_moment(w, a)
            stats.append(snap)
            lo = cut
            nxt = next(targets, None)
        _advance(engine, block[lo:], stats)
        done += m
    return TrajectoryRun(stats, engine.field())


def _advance(engine, block, stats):
    try:
        engine.advance(block)
    except ResourceError as exc:
        reached = stats[-1].n if stats else 0
        raise ResourceError(f"{exc}; last checkpoint reached: {reached}",
                            reached=reached) from exc


def sample_range_points(field, m, rng):
    """``m`` uniform draws (with replacement) from the range.

    Returns ``(points, local_times)`` arrays.
    """
    if field.range_size == 0:
        raise UsageError("cannot sample from an empty range")
    idx = rng.integers(0, field.range_size, size=int(m))
    return field.points[idx], field.local_times[idx]


def localtime_threshold(field, delta):
    """Largest c with #{x in R(n): l(n,x) > c log n} >= (1 - delta) #R(n).

    The supremum is not attained (strict inequality), so the value returned
    is the supremum minus ``THRESHOLD_TOL``.
    """
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if field.n < 2:
        raise DomainError("need n >= 2 so that log n > 0")
    if field.range_size == 0:
        raise UsageError("empty range")
    need = math.ceil((1.0 - delta) * field.range_size - 1e-9)
    need = max(need, 1)
    hist = field.histogram()
    seen = 0
    for value in sorted(hist, reverse=True):
        seen += hist[value]
        if seen >= need:
            return max(value / math.log(field.n) - THRESHOLD_TOL, 0.0)
    raise AssertionError("unreachable: histogram covers the range")


def lazy_coupling_check(n, seed, offset=0):
    """Check that the SRW range equals the lazy walk's range at its n-th jump.

    The lazy walk holds with probability 1/2; its successive jump times are
    T_0 < T_1 < ...  (T_0 is the first jump).  The simple random walk is
    built from the nonzero lazy increments, so S(k) = S'(T_{k-1}).  Both
    ranges include the starting point here: {S(0..n)} is compared with
    {S'(0..T_{n-1})}.  ``offset`` shifts the lazy index (a mutation used to
    show that the check can fail).
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, "lazy_coupling", n)
    lazy = build_model("lazy_srw2d")
    steps = []
    jumps = 0
    # draw until n + max(offset, 0) jumps have occurred
    while jumps < n + max(offset, 0) + 1:
        block = sample_jumps(lazy, rng, 4 * n + 16)
        steps.append(block)
        jumps += int(np.count_nonzero(np.any(block != 0, axis=1)))
    lazy_inc = np.concatenate(steps)
    lazy_pos = np.vstack([np.zeros((1, 2), np.int64), np.cumsum(lazy_inc, axis=0)])
    moved = np.nonzero(np.any(lazy_inc != 0, axis=1))[0] + 1  # T_0, T_1, ...
    srw_inc = lazy_inc[moved - 1][:n]
    srw_pos = np.vstack([np.zeros((1, 2), np.int64), np.cumsum(srw_inc, axis=0)])
    k = n - 1 + offset
    t_end = 0 if k < 0 else int(moved[k])
    srw_range = set(map(tuple, srw_pos.tolist()))
    lazy_range = set(map(tuple, lazy_pos[: t_end + 1].tolist()))
    return srw_range == lazy_range
