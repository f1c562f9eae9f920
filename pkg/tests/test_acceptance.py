"""The sixteen acceptance criteria at their stated tolerances.

Every criterion records (passed, detail) in ``conftest.ACCEPTANCE`` so the
terminal summary prints one PASS/FAIL line per criterion.  Monte Carlo
criteria use seed 1.  Criteria that fail at these finite n are left failing;
no band is widened here.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from rwrs import limit_laws
from rwrs.complexity import (
    complexity_check,
    epsilon_sensitivity,
    exact_q_oracle,
    lower_bound_violations,
    lower_bound_violations_pairs,
    phi_bruteforce,
    phi_value,
    select_delta,
    smb_check,
)
from rwrs.exact_kernels import (
    dp_series,
    green_fn,
    quadrature_series,
    resolvent_integral,
    resolvent_series,
    return_prob,
)
from rwrs.reports import PASS
from rwrs.seeding import make_rng
from rwrs.trajectory import lazy_coupling_check, run_trajectory
from rwrs.walk_models import build_model, char_fn_real

SEED = 1
MC_LIMIT_S = 15 * 60
ZETA = build_model("zeta1d")
SRW = build_model("srw2d")
LAZY = build_model("lazy_srw2d")


def record(k, parts, elapsed, limit):
    """parts: list of (ok, text).  The criterion passes if all do and in time."""
    in_time = elapsed < limit
    ok = all(p for p, _ in parts) and in_time
    detail = "; ".join(t for _, t in parts) + f"; {elapsed:.1f}s (limit {limit:g}s)"
    ACCEPTANCE[k] = (ok, detail)
    assert ok, detail


def ratios(rep, key=None):
    return [r.ratio for r in rep.rows if key is None or r.key == key]


def fmt(xs):
    return "[" + ", ".join(f"{x:.4f}" for x in xs) + "]"


# -- deterministic ------------------------------------------------------------


def test_criterion_01_zeta_anchors():
    t0 = time.perf_counter()
    p1 = return_prob(ZETA, 1).value
    p2 = return_prob(ZETA, 2).value
    phi = char_fn_real(ZETA, math.pi)
    record(1, [(abs(p1) <= 1e-8, f"P1={p1:.2e}"),
               (abs(p2 - 0.2) <= 1e-8, f"P2-0.2={p2 - 0.2:.2e}"),
               (abs(phi + 0.5) <= 1e-10, f"phi(pi)+0.5={phi + 0.5:.1e}")],
           time.perf_counter() - t0, 1)


def test_criterion_02_quadrature_vs_dp():
    t0 = time.perf_counter()
    ws = [(0, 0), (1, 0), (1, 1), (3, -2), (10, 5), (0, 40)]
    diff = float(np.max(np.abs(quadrature_series(LAZY, 512, ws) - dp_series(LAZY, 512, ws))))
    record(2, [(diff <= 1e-8, f"max diff {diff:.2e}")], time.perf_counter() - t0, 30)


def test_criterion_03_lclt_constant():
    t0 = time.perf_counter()
    m = 10**4
    v = 3 * m * return_prob(ZETA, m).value
    record(3, [(abs(v - 1) <= 0.05, f"3mP={v:.4f}")], time.perf_counter() - t0, 10)


def test_criterion_04_resolvent():
    t0 = time.perf_counter()
    lam = 1 - 1e-6
    q = resolvent_integral(ZETA, lam).value
    ratio = q / (math.log(1 / (1 - lam)) / 3)
    q99 = resolvent_integral(ZETA, 0.99).value
    s99, _ = resolvent_series(0.99, 10**5)
    record(4, [(abs(ratio - 1) <= 0.05, f"ratio at 1-1e-6 = {ratio:.4f}"),
               (abs(q99 - s99) <= 1e-6, f"series-quadrature at 0.99 = {abs(q99 - s99):.1e}")],
           time.perf_counter() - t0, 10)


def test_criterion_05_green():
    t0 = time.perf_counter()
    n = 10**5
    hz = green_fn(ZETA, n).value / math.log(n)
    hs = green_fn(SRW, n).value / math.log(n)
    record(5, [(abs(3 * hz - 1) <= 0.1, f"zeta1d 3h/log n = {3 * hz:.4f}"),
               (abs(math.pi * hs - 1) <= 0.1, f"srw2d pi h/log n = {math.pi * hs:.4f}")],
           time.perf_counter() - t0, 60)


def test_criterion_06_phi_bruteforce():
    t0 = time.perf_counter()
    bad = total = 0
    for N in range(1, 17):
        for p in (0.5, 0.7, 0.9):
            for eps in (0.05, 0.25):
                total += 1
                bad += phi_value(N, [p, 1 - p], eps) != phi_bruteforce(N, [p, 1 - p], eps)
    record(6, [(bad == 0, f"{bad}/{total} mismatches")], time.perf_counter() - t0, 10)


def test_criterion_07_q_fixture():
    t0 = time.perf_counter()
    field = run_trajectory("zeta1d", 3, jumps=[1, 1, -1]).field
    q = exact_q_oracle(field, [0.5, 0.5], 0.4)
    record(7, [(q == 2, f"Q={q}")], time.perf_counter() - t0, 1)


# -- Monte Carlo --------------------------------------------------------------

GRID = [10**4, 10**5, 10**6, 10**7]


@pytest.fixture(scope="module")
def moment_reports():
    return {m: limit_laws.moment_check(m, GRID, [2, 3], 8, SEED) for m in ("srw2d", "zeta1d")}


def test_criterion_08_range_law():
    t0 = time.perf_counter()
    parts = []
    for m in ("srw2d", "zeta1d"):
        rep = limit_laws.range_law_check(m, GRID, 8, SEED)
        r = ratios(rep)
        parts.append((rep.verdict == PASS, f"{m} {fmt(r)}"))
    record(8, parts, time.perf_counter() - t0, MC_LIMIT_S)


def test_criterion_09_localtime_law():
    t0 = time.perf_counter()
    parts = []
    for m in ("srw2d", "zeta1d"):
        rep = limit_laws.localtime_law_check(m, [10**5, 10**6, 10**7], 100_000, seed=SEED)
        d = [r.observed for r in rep.rows]
        ok = d[-1] <= 0.1 and all(b <= a for a, b in zip(d, d[1:]))
        parts.append((ok, f"{m} sup-dist {fmt(d)}"))
    record(9, parts, time.perf_counter() - t0, MC_LIMIT_S)


def test_criterion_10_moments(moment_reports):
    t0 = time.perf_counter()
    parts = []
    for m, rep in moment_reports.items():
        for k in (2, 3):
            rows = [r for r in rep.rows if r.key == f"k={k}"]
            r = [x.ratio for x in rows]
            ok = 0.6 <= r[-1] <= 1.4 and abs(r[-1] - 1) < abs(r[0] - 1)
            parts.append((ok, f"{m} k={k} {fmt(r)}"))
    record(10, parts, time.perf_counter() - t0 + sum(r.runtime_ms for r in
                                                     moment_reports.values()) / 1000,
           2 * MC_LIMIT_S)


def test_criterion_11_shifted_moments():
    t0 = time.perf_counter()
    parts = []
    for m, w, periodic in (("srw2d", (1, 0), True), ("lazy_srw2d", (1, 0), False),
                           ("zeta1d", 1, False)):
        rep = limit_laws.shifted_moment_check(m, [10**4, 10**7], 1, w, 8, SEED,
                                              allow_periodic=periodic)
        r = ratios(rep)
        parts.append((0.6 <= r[-1] <= 1.4, f"{m} {fmt(r)}"))
    record(11, parts, time.perf_counter() - t0, MC_LIMIT_S)


def test_criterion_12_folner():
    t0 = time.perf_counter()
    parts = []
    for m, w in (("srw2d", (1, 0)), ("lazy_srw2d", (1, 0)), ("zeta1d", 1)):
        rep = limit_laws.folner_check(m, [10**4, 10**6, 10**7], w, 8, SEED)
        parts.append((rep.verdict == PASS, f"{m} {fmt([r.observed for r in rep.rows])}"))
    coupled = sum(lazy_coupling_check(1000, s) for s in range(100))
    parts.append((coupled == 100, f"lazy coupling {coupled}/100"))
    record(12, parts, time.perf_counter() - t0, MC_LIMIT_S)


def test_criterion_13_variance_scaling():
    t0 = time.perf_counter()
    parts = []
    for m in ("srw2d", "zeta1d"):
        rep = limit_laws.variance_scaling_check(m, [10**4, 10**5, 10**6], 2, 64, SEED)
        v = [r.observed for r in rep.rows]
        parts.append((rep.verdict == PASS, f"{m} var/n^2 {fmt(v)}"))
    record(13, parts, time.perf_counter() - t0, MC_LIMIT_S)


def test_criterion_14_complexity_normalization():
    t0 = time.perf_counter()
    parts = []
    for probs in ([0.5, 0.5], [0.9, 0.1]):
        _, rep = complexity_check("srw2d", probs, [10**4, 10**5, 10**6], 0.1, SEED)
        r = ratios(rep)
        ok = 0.7 <= r[-1] <= 1.3 and abs(r[-1] - 1) < abs(r[0] - 1)
        parts.append((ok and rep.verdict == PASS, f"p={probs} {fmt(r)}"))
    for probs in ([0.5, 0.5], [0.9, 0.1]):
        rep = epsilon_sensitivity("srw2d", probs, 10**6, [0.05, 0.1, 0.2], SEED)
        obs = [r.observed for r in rep.rows]
        spread = (max(obs) - min(obs)) / max(obs)
        parts.append((spread <= 0.05, f"p={probs} eps spread {spread:.4f}"))
    record(14, parts, time.perf_counter() - t0, MC_LIMIT_S)


def test_criterion_15_smb():
    t0 = time.perf_counter()
    rep = smb_check("srw2d", [0.9, 0.1], [10**4, 10**5, 10**6], 8, SEED)
    r = ratios(rep)
    record(15, [(0.7 <= r[-1] <= 1.3, f"{fmt(r)}")], time.perf_counter() - t0, MC_LIMIT_S)


def test_criterion_16_lower_bound():
    t0 = time.perf_counter()
    delta = select_delta(0.1, 2)
    instances = bad = pair_checked = 0
    i = 0
    while instances < 50:
        n = 8 + i % 13
        field = run_trajectory("srw2d", n, make_rng(SEED, "lower-bound", i),
                               checkpoints=[n]).field
        i += 1
        if field.range_size > 20:
            continue
        instances += 1
        bad += lower_bound_violations(field, delta, SRW.gamma_d)
        if field.range_size <= 7:
            bad += lower_bound_violations_pairs(field, delta, SRW.gamma_d)
            pair_checked += 1
    record(16, [(bad == 0, f"{bad} violations over {instances} instances "
                           f"({pair_checked} also by literal pairs)")],
           time.perf_counter() - t0, MC_LIMIT_S)
