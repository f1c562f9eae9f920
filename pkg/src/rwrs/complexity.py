"""Complexity counts for i.i.d. finite-alphabet sceneries on the walk's range.

Phi_{n,eps} is the least number of scenery patterns on the range whose
product mass reaches 1 - eps.  Within a type class (fixed symbol counts)
all patterns are equiprobable, so the count only needs the classes sorted
by per-pattern probability.  Q_{n,eps} is the size of a Hamming ball in
the local-time weighted metric; for product sceneries it does not depend on
the centre.
"""

import itertools
import math
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, ResourceError
from .reports import (
    PASS,
    FAIL,
    INCONCLUSIVE,
    CheckReport,
    RunningMoments,
    band_trend_verdict,
    make_row,
)
from .seeding import make_rng
from .trajectory import DEFAULT_RANGE_CAP, localtime_threshold, run_trajectory
from .walk_models import build_model

PROB_TOL = 1e-12
EXACT_MAX_N = 64  # exact rational arithmetic below this range size
MAX_CLASSES = 5_000_000
Q_MAX_RANGE = 22
COMPLEXITY_BAND = (0.7, 1.3)
EPS_SPREAD = 0.05


class SceneryModel:
    """I.i.d. scenery with label law ``probs`` over an alphabet of size >= 2."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float).ravel()
        if len(p) < 2:
            raise DomainError("alphabet must have at least two symbols")
        if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
            raise DomainError("probs must be nonnegative and sum to 1")
        self.probs = p
        self.alphabet_size = len(p)
        # zero-probability symbols never occur, so patterns live on the support
        self.support = p[p > 0]
        self.entropy_nats = float(-np.sum(self.support * np.log(self.support)))

    @classmethod
    def uniform(cls, k=2):
        return cls([1.0 / k] * k)

    def __repr__(self):
        return f"SceneryModel({self.probs.tolist()})"


def _scenery(scenery):
    return scenery if isinstance(scenery, SceneryModel) else SceneryModel(scenery)


def _check_eps(eps):
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")


# -- Phi ----------------------------------------------------------------------


def _classes(N, support):
    """Type classes on N sites: (log per-pattern prob, log class size) arrays."""
    logp = np.log(support)
    k = len(support)
    if k == 1:
        return np.array([N * logp[0]]), np.array([0.0])
    if k == 2:
        j = np.arange(N + 1)
        lp = j * logp[1] + (N - j) * logp[0]
        lc = gammaln(N + 1) - gammaln(j + 1) - gammaln(N - j + 1)
        return lp, lc
    total = math.comb(N + k - 1, k - 1)
    if total > MAX_CLASSES:
        raise ResourceError(f"{total} type classes exceed the budget of {MAX_CLASSES}")
    comps = np.array([c for c in _compositions(N, k)], dtype=float)
    lp = comps @ logp
    lc = gammaln(N + 1) - gammaln(comps + 1).sum(axis=1)
    return lp, lc


def _compositions(N, k):
    for bars in itertools.combinations(range(N + k - 1), k - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(N + k - 2 - prev)
        yield out


def _merge_ties(lp, lc):
    """Sort classes by per-pattern log prob (descending) and merge ties."""
    order = np.argsort(-lp, kind="stable")
    lp, lc = lp[order], lc[order]
    scale = np.maximum(1.0, np.abs(lp))
    new = np.concatenate([[True], np.diff(lp) < -PROB_TOL * scale[1:]])
    groups = np.cumsum(new) - 1
    out_lp = lp[new]
    out_lc = np.array([logsumexp(lc[groups == g]) for g in range(groups[-1] + 1)]) \
        if not new.all() else lc
    return out_lp, out_lc


def phi_count(N, scenery, eps):
    """Natural log of Phi: least number of patterns on N sites with mass >= 1 - eps."""
    _check_eps(eps)
    N = int(N)
    if N < 1:
        raise DomainError("N must be >= 1")
    scenery = _scenery(scenery)
    if N <= EXACT_MAX_N:
        return math.log(phi_value(N, scenery, eps))
    lp, lc = _merge_ties(*_classes(N, scenery.support))
    mass = np.exp(lp + lc)
    cum = np.cumsum(mass)
    need = 1.0 - eps
    j = int(np.searchsorted(cum, need * (1 - 1e-15), side="left"))
    j = min(j, len(cum) - 1)
    before = cum[j - 1] if j > 0 else 0.0
    residual = need - before
    log_partial = math.log(residual) - lp[j] if residual > 0 else 0.0
    if log_partial < 40:  # the ceiling matters only for moderate counts
        log_partial = math.log(max(1, math.ceil(math.exp(log_partial) * (1 - 1e-12))))
    log_partial = min(log_partial, lc[j])
    return float(logsumexp(np.append(lc[:j], log_partial)))


def phi_value(N, scenery, eps):
    """Phi as an exact integer (rational arithmetic; meant for small N)."""
    _check_eps(eps)
    scenery = _scenery(scenery)
    ps = [Fraction(float(x)) for x in scenery.support]
    ps = [x / sum(ps) for x in ps]
    need = 1 - Fraction(float(eps))
    classes = {}
    for comp in _compositions(N, len(ps)):
        prob = math.prod(p**c for p, c in zip(ps, comp))
        size = math.factorial(N) // math.prod(math.factorial(c) for c in comp)
        classes[prob] = classes.get(prob, 0) + size
    count, cum = 0, Fraction(0)
    for prob in sorted(classes, reverse=True):
        size = classes[prob]
        if cum + size * prob >= need:
            return count + max(1, math.ceil((need - cum) / prob))
        cum += size * prob
        count += size
    return count


def phi_bruteforce(N, scenery, eps):
    """Phi by sorting all pattern probabilities (exact; N <= 16).

    Masses are kept as integer numerators over the common denominator D^N.
    """
    scenery = _scenery(scenery)
    ps = [Fraction(float(x)) for x in scenery.support]
    ps = [x / sum(ps) for x in ps]
    D = math.lcm(*(x.denominator for x in ps))
    nums = [x.numerator * (D // x.denominator) for x in ps]
    need = 1 - Fraction(float(eps))
    target = need.numerator * D**N  # cum / D^N >= need  <=>  cum * den >= target
    masses = sorted((math.prod(nums[s] for s in pat)
                     for pat in itertools.product(range(len(ps)), repeat=N)), reverse=True)
    cum = 0
    for i, m in enumerate(masses, 1):
        cum += m
        if cum * need.denominator >= target:
            return i
    return len(masses)


# -- Hamming bound and delta --------------------------------------------------


def binary_entropy(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log(x) - (1 - x) * math.log(1 - x)


class HammingBound(NamedTuple):
    log_bound: float
    asymptotic: float
    radius: int


def hamming_bound(range_size, n, delta, alphabet_size, gamma_d):
    """log[C(#R, k) * beta^k] with k = 3 delta b_d(n), plus its asymptotic form.

    b_d(n) = gamma_d n / log n.  k is rounded down (a 1e-9 slack absorbs
    float error in 3 delta b).
    """
    if not 0 < delta < 1 / 3:
        raise DomainError("delta must lie in (0, 1/3)")
    if n < 2:
        raise DomainError("n must be >= 2")
    b = gamma_d * n / math.log(n)
    x = 3 * delta * b
    if x > range_size + 1e-9:
        raise DomainError("3 delta b_d(n) exceeds the range size")
    k = int(math.floor(x + 1e-9))
    N = int(range_size)
    log_bound = (gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1)
                 + k * math.log(alphabet_size))
    asym = b * (3 * delta * math.log(alphabet_size) + 2 * binary_entropy(1.5 * delta))
    return HammingBound(max(float(log_bound), 0.0), asym, k)


def delta_criterion(delta, alphabet_size):
    return 2 * binary_entropy(1.5 * delta) + 3 * delta * math.log(alphabet_size)


def select_delta(eps, alphabet_size, iters=200):
    """Largest delta with 2H(3 delta/2) + 3 delta ln beta < eps, times 0.99."""
    _check_eps(eps)
    cap = 1 / 3 - 1e-9
    if delta_criterion(cap, alphabet_size) < eps:
        return cap
    lo, hi = 0.0, cap
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if delta_criterion(mid, alphabet_size) < eps:
            lo = mid
        else:
            hi = mid
    return 0.99 * lo


# -- exact small-instance Q and covers ---------------------------------------


def _weights(field):
    lt = np.asarray(field.local_times, dtype=np.int64)
    if np.any(lt <= 0):
        raise DomainError("local times on the range must be positive")
    return lt


def _subset_sums(lt):
    """Sum of local times over every subset D of the range (bit mask index)."""
    sums = np.zeros(1, dtype=np.int64)
    for v in lt:
        sums = np.concatenate([sums, sums + v])
    return sums


def exact_q_oracle(field, scenery, eps):
    """Exact Q: size of any d_n ball of radius eps among patterns on the range.

    A pattern z is within eps of a when sum over differing sites of
    l(n, x) is at most eps n.  Each differing site can take any of the
    other (beta - 1) symbols, so Q sums (beta - 1)^|D| over admissible
    difference sets D.
    """
    scenery = _scenery(scenery)
    lt = _weights(field)
    R = len(lt)
    if R > Q_MAX_RANGE:
        raise ResourceError(f"range size {R} exceeds the exhaustive budget {Q_MAX_RANGE}")
    n = int(lt.sum())
    sums = _subset_sums(lt)
    ok = sums <= eps * n + 1e-12 * n
    sizes = _popcounts(R)
    beta = len(scenery.support)
    return int(sum((beta - 1) ** int(s) for s in sizes[ok]))


def _popcounts(R):
    idx = np.arange(1 << R, dtype=np.int64)
    out = np.zeros_like(idx)
    for b in range(R):
        out += (idx >> b) & 1
    return out


def pattern_masses(field, scenery):
    """Product mass of every binary pattern on the range (bit mask index)."""
    scenery = _scenery(scenery)
    if len(scenery.support) != 2:
        raise DomainError("pattern enumeration supports binary sceneries only")
    R = field.range_size
    ones = _popcounts(R)
    p0, p1 = scenery.support
    return p1**ones * p0 ** (R - ones)


def greedy_cover_size(field, scenery, eps):
    """Greedy count of d_n balls (radius eps) covering mass >= 1 - eps.

    Binary sceneries only; a ball around a is {a xor D : D admissible}.
    """
    lt = _weights(field)
    R = len(lt)
    if R > 14:
        raise ResourceError("greedy cover is limited to range size <= 14")
    n = int(lt.sum())
    masses = pattern_masses(field, scenery)
    diffs = np.nonzero(_subset_sums(lt) <= eps * n + 1e-12 * n)[0]
    balls = np.arange(1 << R)[:, None] ^ diffs[None, :]
    covered = np.zeros(1 << R, dtype=bool)
    mass, count = 0.0, 0
    need = 1.0 - eps - 1e-12
    while mass < need:
        gain = np.where(covered[balls], 0.0, masses[balls]).sum(axis=1)
        c = int(np.argmax(gain))
        covered[balls[c]] = True
        mass += gain[c]
        count += 1
    return count


def lower_bound_violations(field, delta, gamma_d):
    """Count difference sets D breaking |D| <= b (d_n/c_hat + 2 delta).

    Two patterns a, a' differ on D and d_n(a, a') = sum_D l / n, so the
    pairwise inequality depends on the pair only through D; all 2^#R sets
    are checked.  c comes from ``localtime_threshold(field, delta)`` and
    c_hat = c b log n / n.
    """
    lt = _weights(field)
    R = len(lt)
    if R > Q_MAX_RANGE:
        raise ResourceError(f"range size {R} exceeds the exhaustive budget {Q_MAX_RANGE}")
    n = field.n
    b = gamma_d * n / math.log(n)
    c = localtime_threshold(field, delta)
    if c <= 0:
        raise DomainError("local-time threshold is zero; n too small")
    c_hat = c * b * math.log(n) / n
    dist = _subset_sums(lt) / n
    rhs = b * (dist / c_hat + 2 * delta)
    return int(np.count_nonzero(_popcounts(R) > rhs + 1e-9))


def lower_bound_violations_pairs(field, delta, gamma_d):
    """Same as :func:`lower_bound_violations`, literally over binary pattern pairs."""
    lt = _weights(field)
    R = len(lt)
    n = field.n
    b = gamma_d * n / math.log(n)
    c_hat = localtime_threshold(field, delta) * b * math.log(n) / n
    bad = 0
    for a in itertools.product((0, 1), repeat=R):
        for z in itertools.product((0, 1), repeat=R):
            diff = [x != y for x, y in zip(a, z)]
            d = sum(l for l, f in zip(lt, diff) if f) / n
            bad += sum(diff) > b * (d / c_hat + 2 * delta) + 1e-9
    return bad


# -- checks -------------------------------------------------------------------


@dataclass
class ComplexityReport:
    n: int
    range_size: int
    epsilon: float
    log_phi: float
    normalized: float
    log_q_bound: float
    delta_used: float
    lower_bound_positive: bool

    def to_dict(self):
        return asdict(self)


def complexity_reports(model, scenery, n_list, eps, seed, range_cap=DEFAULT_RANGE_CAP):
    """One trajectory sampled at every n in ``n_list``; Phi from #R(n)."""
    model = build_model(model) if isinstance(model, str) else model
    scenery = _scenery(scenery)
    _check_eps(eps)
    n_list = sorted(int(n) for n in n_list)
    run = run_trajectory(model, n_list[-1], make_rng(seed, "complexity"),
                         checkpoints=n_list, powers=(0,), range_cap=range_cap)
    delta = select_delta(eps, scenery.alphabet_size)
    out = []
    for s in run.stats:
        n, R = s.n, s.range_size
        log_phi = phi_count(R, scenery, eps)
        try:
            log_q = hamming_bound(R, n, delta, scenery.alphabet_size, model.gamma_d).log_bound
        except DomainError:
            log_q = float("nan")
        norm = math.log(n) / (model.gamma_d * n) * log_phi
        out.append(ComplexityReport(n, R, float(eps), log_phi, norm, log_q, delta,
                                    bool(log_phi - log_q > 0)))
    return out


def complexity_check(model, scenery, n_list, eps, seed, band=COMPLEXITY_BAND,
                     range_cap=DEFAULT_RANGE_CAP):
    """(log n/(gamma_d n)) log Phi against the scenery entropy.

    Returns ``(complexity_reports, CheckReport)``.
    """
    start = time.perf_counter()
    model = build_model(model) if isinstance(model, str) else model
    scenery = _scenery(scenery)
    reps = complexity_reports(model, scenery, n_list, eps, seed, range_cap)
    rows = [make_row(r.n, r.normalized, scenery.entropy_nats) for r in reps]
    verdict = band_trend_verdict(rows, band) if scenery.entropy_nats > 0 else (
        PASS if all(r.observed == 0 for r in rows) else FAIL)
    params = {"n_list": [r.n for r in reps], "eps": float(eps), "seed": seed,
              "probs": scenery.probs.tolist(), "band": list(band),
              "lower_bound_positive": [r.lower_bound_positive for r in reps]}
    report = CheckReport("complexity", model.name, params, rows, verdict,
                         int(1000 * (time.perf_counter() - start)))
    return reps, report


def epsilon_sensitivity(model, scenery, n, eps_list, seed, max_spread=EPS_SPREAD,
                        range_cap=DEFAULT_RANGE_CAP):
    """Normalized log Phi at one n for several eps on the same trajectory.

    Rows are keyed by eps; observed is the normalized value, target the
    value at the first eps.  Passes when every ratio is within max_spread.
    """
    start = time.perf_counter()
    model = build_model(model) if isinstance(model, str) else model
    scenery = _scenery(scenery)
    run = run_trajectory(model, n, make_rng(seed, "complexity"), checkpoints=[n], powers=(0,),
                         range_cap=range_cap)
    R = run.stats[-1].range_size
    norm = math.log(n) / (model.gamma_d * n)
    values = [norm * phi_count(R, scenery, e) for e in eps_list]
    rows = [make_row(n, v, values[0], key=f"eps={e}") for e, v in zip(eps_list, values)]
    spread = max(abs(r.ratio - 1) for r in rows)
    verdict = INCONCLUSIVE if len(rows) < 2 else (PASS if spread <= max_spread else FAIL)
    params = {"n": n, "eps_list": [float(e) for e in eps_list], "seed": seed,
              "probs": scenery.probs.tolist(), "max_spread": max_spread}
    return CheckReport("epsilon_sensitivity", model.name, params, rows, verdict,
                       int(1000 * (time.perf_counter() - start)))


def smb_check(model, scenery, n_list, replicas, seed, band=COMPLEXITY_BAND,
              range_cap=DEFAULT_RANGE_CAP):
    """Normalized -log nu of a random scenery pattern on the range vs entropy.

    The labels on R(n) are i.i.d., so only their symbol counts matter; they
    are drawn as one multinomial vector per replica.
    """
    start = time.perf_counter()
    model = build_model(model) if isinstance(model, str) else model
    scenery = _scenery(scenery)
    n_list = sorted(int(n) for n in n_list)
    neglog = -np.log(scenery.support)
    rows = []
    accs = {n: RunningMoments() for n in n_list}
    for r in range(replicas):
        run = run_trajectory(model, n_list[-1], make_rng(seed, "smb", r),
                             checkpoints=n_list, powers=(0,), range_cap=range_cap)
        rng = make_rng(seed, "smb-scenery", r)
        for s in run.stats:
            counts = rng.multinomial(s.range_size, scenery.support)
            value = float(counts @ neglog)
            accs[s.n].push(math.log(s.n) / (model.gamma_d * s.n) * value)
    for n in n_list:
        rows.append(make_row(n, accs[n].mean, scenery.entropy_nats))
    if scenery.entropy_nats > 0:
        verdict = band_trend_verdict(rows, band)
    else:
        verdict = PASS if all(r.observed == 0 for r in rows) else FAIL
    params = {"n_list": n_list, "replicas": replicas, "seed": seed,
              "probs": scenery.probs.tolist(), "band": list(band)}
    return CheckReport("smb", model.name, params, rows, verdict,
                       int(1000 * (time.perf_counter() - start)))
