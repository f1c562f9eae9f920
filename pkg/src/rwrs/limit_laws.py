"""Monte Carlo checks of the range, local-time and self-intersection laws.

Every check takes a ``seed``; the trajectory for grid point ``n`` and
replica ``r`` is driven by ``make_rng(seed, n, r)``, so two checks given
the same seed see the same walks.  All finite-n tolerance bands are
engineering choices (the underlying theorems only give limits) and are
recorded in each report's ``params``.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import ConfigurationError, DomainError
from .reports import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    CheckReport,
    RunningMoments,
    band_trend_verdict,
    combine,
    decreasing_verdict,
    make_row,
    median,
)
from .seeding import make_rng
from .trajectory import (
    DEFAULT_RANGE_CAP,
    as_vector,
    folner_ratio,
    run_trajectory,
    sample_range_points,
)
from .walk_models import build_model

RANGE_BAND = (0.7, 1.3)
MOMENT_BAND = (0.6, 1.4)
LOCALTIME_MAX_DISTANCE = 0.1
VARIANCE_FACTOR = 4.0
DEFAULT_U_GRID = tuple(0.25 * i for i in range(1, 13))


def _model(model):
    return build_model(model) if isinstance(model, str) else model


def _grid(n_list):
    n_list = [int(n) for n in n_list]
    if sorted(n_list) != n_list or len(set(n_list)) != len(n_list):
        raise DomainError("n_list must be strictly increasing")
    if n_list[0] < 2:
        raise DomainError("n must be >= 2 (log n appears in every normalization)")
    return n_list


def _replica(task):
    """Top-level worker so replicas can run in a process pool."""
    model, n, seed, r, powers, shifts, shifted, range_cap = task
    run = run_trajectory(model, n, make_rng(seed, n, r), checkpoints=[n], powers=powers,
                         shifts=shifts, shifted=shifted, range_cap=range_cap)
    return run.stats[-1]


def run_replicas(model, n_list, replicas, seed, powers=(0, 1), shifts=(), shifted=(),
                 workers=1, range_cap=DEFAULT_RANGE_CAP):
    """Final-time stats for every (n, replica): dict n -> list of stats."""
    tasks = [(model, n, seed, r, tuple(powers), tuple(shifts), tuple(shifted), range_cap)
             for n in n_list for r in range(replicas)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replica, tasks))
    else:
        results = [_replica(t) for t in tasks]
    out = {n: [] for n in n_list}
    for t, s in zip(tasks, results):
        out[t[1]].append(s)
    return out


def _report(check, model, params, rows, verdict, start):
    return CheckReport(check=check, model=model.name, params=params, rows=rows,
                       verdict=verdict, runtime_ms=int(1000 * (time.perf_counter() - start)))


def range_law_check(model, n_list, replicas, seed, band=RANGE_BAND, workers=1,
                    range_cap=DEFAULT_RANGE_CAP):
    """Replica mean of (log n / (gamma_d n)) #R(n) against 1."""
    start = time.perf_counter()
    model = _model(model)
    n_list = _grid(n_list)
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    stats = run_replicas(model, n_list, replicas, seed, powers=(0,),
                         workers=workers, range_cap=range_cap)
    rows = []
    for n in n_list:
        norm = math.log(n) / (model.gamma_d * n)
        acc = RunningMoments.of(s.range_size * norm for s in stats[n])
        rows.append(make_row(n, acc.mean, 1.0))
    params = {"n_list": n_list, "replicas": replicas, "seed": seed, "band": list(band)}
    return _report("range_law", model, params, rows, band_trend_verdict(rows, band), start)


def survival_curve(local_times, scale, u_grid):
    """Empirical P[scale * l >= u] for each u."""
    x = np.sort(np.asarray(local_times, dtype=float) * scale)
    m = len(x)
    return np.array([(m - np.searchsorted(x, u, side="left")) / m for u in u_grid])


def localtime_law_check(model, n_list, m_samples, u_grid=DEFAULT_U_GRID, seed=0,
                        max_distance=LOCALTIME_MAX_DISTANCE, range_cap=DEFAULT_RANGE_CAP):
    """Sup distance between the survival of gamma_d l(n, Y)/log n and e^{-u}.

    One trajectory per n (the statement is conditional on the walk), with
    ``m_samples`` uniform draws from its range.
    """
    start = time.perf_counter()
    model = _model(model)
    n_list = _grid(n_list)
    u_grid = [float(u) for u in u_grid]
    if any(u <= 0 or u > 5 for u in u_grid):
        raise DomainError("u_grid must lie in (0, 5]")
    if m_samples < 10_000:
        raise DomainError("m_samples must be >= 10^4")
    rows = []
    for n in n_list:
        run = run_trajectory(model, n, make_rng(seed, n, 0), checkpoints=[n], powers=(0,),
                             range_cap=range_cap)
        _, lt = sample_range_points(run.field, m_samples, make_rng(seed, n, "draws"))
        surv = survival_curve(lt, model.gamma_d / math.log(n), u_grid)
        dist = float(np.max(np.abs(surv - np.exp(-np.asarray(u_grid)))))
        rows.append(make_row(n, dist, 0.0))
    params = {"n_list": n_list, "m_samples": int(m_samples), "u_grid": u_grid, "seed": seed,
              "max_distance": max_distance}
    verdict = decreasing_verdict(rows, final_max=max_distance)
    return _report("localtime_law", model, params, rows, verdict, start)


def moment_check(model, n_list, k_list, replicas, seed, band=MOMENT_BAND, workers=1,
                 range_cap=DEFAULT_RANGE_CAP):
    """Replica mean of L_n(k) gamma_d^{k-1} / (n (log n)^{k-1}) against k!."""
    start = time.perf_counter()
    model = _model(model)
    n_list = _grid(n_list)
    k_list = sorted(int(k) for k in k_list)
    if any(k < 1 or k > 4 for k in k_list):
        raise DomainError("k must lie in {1, 2, 3, 4}")
    stats = run_replicas(model, n_list, replicas, seed, powers=k_list,
                         workers=workers, range_cap=range_cap)
    rows, verdicts = [], []
    for k in k_list:
        series = []
        for n in n_list:
            norm = model.gamma_d ** (k - 1) / (n * math.log(n) ** (k - 1))
            acc = RunningMoments.of(s.self_intersections[k] * norm for s in stats[n])
            series.append(make_row(n, acc.mean, math.factorial(k), key=f"k={k}"))
        rows += series
        verdicts.append(PASS if k == 1 and all(r.ratio == 1.0 for r in series)
                        else band_trend_verdict(series, band))
    params = {"n_list": n_list, "k_list": k_list, "replicas": replicas, "seed": seed,
              "band": list(band)}
    return _report("moment", model, params, rows, combine(verdicts), start)


def shifted_moment_check(model, n_list, alpha, w, replicas, seed, band=MOMENT_BAND,
                         allow_periodic=False, workers=1,
                         range_cap=DEFAULT_RANGE_CAP):
    """Replica mean of L_{n,w}(alpha) gamma_d^{2a-1} / (n (log n)^{2a-1}) vs (2a)!."""
    start = time.perf_counter()
    model = _model(model)
    n_list = _grid(n_list)
    alpha = int(alpha)
    if alpha not in (1, 2):
        raise DomainError("alpha must be 1 or 2")
    if model.period != 1 and not allow_periodic:
        raise ConfigurationError(
            f"{model.name} is periodic; pass allow_periodic=True to run the extension")
    w = as_vector(w, model.dimension)
    stats = run_replicas(model, n_list, replicas, seed, powers=(0,),
                         shifted=[(w, alpha)], workers=workers, range_cap=range_cap)
    rows = []
    e = 2 * alpha - 1
    for n in n_list:
        norm = model.gamma_d**e / (n * math.log(n) ** e)
        acc = RunningMoments.of(s.shifted_moments[(w, alpha)] * norm for s in stats[n])
        rows.append(make_row(n, acc.mean, math.factorial(2 * alpha)))
    params = {"n_list": n_list, "alpha": alpha, "w": list(w), "replicas": replicas,
              "seed": seed, "band": list(band), "allow_periodic": allow_periodic}
    return _report("shifted_moment", model, params, rows, band_trend_verdict(rows, band), start)


def variance_scaling_check(model, n_list, k, replicas, seed, factor=VARIANCE_FACTOR,
                           workers=1, range_cap=DEFAULT_RANGE_CAP):
    """Sample variance of L_n(k) over replicas divided by n^2 (log n)^{2k-4}.

    Passes when the value at the largest n is at most ``factor`` times the
    median over the grid (the theorem only gives an upper bound).
    """
    start = time.perf_counter()
    model = _model(model)
    n_list = _grid(n_list)
    k = int(k)
    if k not in (1, 2, 3):
        raise DomainError("k must lie in {1, 2, 3}")
    if replicas < 64 and k != 1:
        raise DomainError("variance scaling needs at least 64 replicas")
    stats = run_replicas(model, n_list, replicas, seed, powers=(k,),
                         workers=workers, range_cap=range_cap)
    values = []
    for n in n_list:
        acc = RunningMoments.of(float(s.self_intersections[k]) for s in stats[n])
        values.append(acc.variance / (n * n * math.log(n) ** (2 * k - 4)))
    med = median(values)
    rows = [make_row(n, v, med) for n, v in zip(n_list, values)]
    if len(rows) < 2:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS if values[-1] <= factor * med else FAIL
    params = {"n_list": n_list, "k": k, "replicas": replicas, "seed": seed, "factor": factor}
    return _report("variance_scaling", model, params, rows, verdict, start)


def folner_check(model, n_list, w, replicas, seed, workers=1, range_cap=DEFAULT_RANGE_CAP):
    """Replica mean of the Folner ratio for shift ``w``; must strictly decrease."""
    start = time.perf_counter()
    model = _model(model)
    n_list = _grid(n_list)
    w = as_vector(w, model.dimension)
    stats = run_replicas(model, n_list, replicas, seed, powers=(0,), shifts=[w],
                         workers=workers, range_cap=range_cap)
    rows = []
    for n in n_list:
        acc = RunningMoments.of(folner_ratio(s, w) for s in stats[n])
        rows.append(make_row(n, acc.mean, 0.0))
    params = {"n_list": n_list, "w": list(w), "replicas": replicas, "seed": seed}
    return _report("folner", model, params, rows, decreasing_verdict(rows, strict=True), start)


def conditional_moments(field, gamma_d):
    """First two moments of gamma_d l(n, Y)/log n given the walk.

    Computed from the local-time histogram; by counting, the first equals
    gamma_d n / (#R log n) and the second (gamma_d/log n)^2 L_n(2)/#R.
    """
    hist = field.histogram()
    size = sum(hist.values())
    scale = gamma_d / math.log(field.n)
    m1 = sum(c * v for v, c in hist.items()) * scale / size
    m2 = sum(c * v * v for v, c in hist.items()) * scale * scale / size
    return m1, m2


__all__ = [
    "FAIL",
    "PASS",
    "INCONCLUSIVE",
    "range_law_check",
    "localtime_law_check",
    "moment_check",
    "shifted_moment_check",
    "variance_scaling_check",
    "folner_check",
    "conditional_moments",
    "survival_curve",
    "run_replicas",
]
