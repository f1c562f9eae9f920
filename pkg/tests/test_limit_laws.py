import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwrs.errors import ConfigurationError, DomainError
from rwrs.limit_laws import (
    conditional_moments,
    folner_check,
    localtime_law_check,
    moment_check,
    range_law_check,
    shifted_moment_check,
    survival_curve,
    variance_scaling_check,
)
from rwrs.reports import CheckReport
from rwrs.trajectory import run_trajectory
from rwrs.walk_models import build_model

GRID = [2_000, 20_000]


def test_range_law_report_shape():
    rep = range_law_check("srw2d", GRID, 3, seed=1)
    assert isinstance(rep, CheckReport)
    assert [r.n for r in rep.rows] == GRID
    assert rep.params["band"] == [0.7, 1.3]
    assert all(r.target == 1.0 and r.ratio == r.observed for r in rep.rows)
    assert rep.verdict in ("pass", "fail")


def test_single_grid_point_inconclusive():
    assert range_law_check("zeta1d", [5_000], 2, seed=1).verdict == "inconclusive"


def test_grid_validation():
    with pytest.raises(DomainError):
        range_law_check("srw2d", [100, 10], 1, seed=0)
    with pytest.raises(DomainError):
        range_law_check("srw2d", [100], 0, seed=0)


def test_moment_k1_exact():
    rep = moment_check("zeta1d", GRID, [1, 2], 2, seed=3)
    k1 = rep.series("k=1")
    assert all(r.ratio == 1.0 for r in k1)


def test_shifted_zero_shift_equals_moment_k2():
    m = moment_check("lazy_srw2d", GRID, [2], 3, seed=7)
    s = shifted_moment_check("lazy_srw2d", GRID, 1, (0, 0), 3, seed=7)
    assert [r.ratio for r in m.series("k=2")] == [r.ratio for r in s.rows]


def test_shifted_requires_flag_for_periodic():
    with pytest.raises(ConfigurationError):
        shifted_moment_check("srw2d", GRID, 1, (1, 0), 2, seed=1)
    rep = shifted_moment_check("srw2d", GRID, 1, (1, 0), 2, seed=1, allow_periodic=True)
    assert rep.params["allow_periodic"] is True


def test_shifted_alpha_domain():
    with pytest.raises(DomainError):
        shifted_moment_check("zeta1d", GRID, 3, 1, 2, seed=1)


def test_variance_k1_zero():
    rep = variance_scaling_check("zeta1d", GRID, 1, 4, seed=2)
    assert all(r.observed == 0.0 for r in rep.rows)


def test_variance_needs_replicas():
    with pytest.raises(DomainError):
        variance_scaling_check("zeta1d", GRID, 2, 10, seed=2)


def test_folner_report():
    rep = folner_check("lazy_srw2d", [1_000, 100_000], (1, 0), 4, seed=5)
    assert all(0 <= r.observed <= 2 for r in rep.rows)
    assert rep.verdict == "pass"


def test_localtime_small_u_limit():
    rep = localtime_law_check("zeta1d", [1_000, 10_000], 10_000, u_grid=[1e-9], seed=1)
    # every range point has l >= 1, so S(0+) = 1 = e^0 up to 1e-9
    assert all(r.observed <= 1e-8 for r in rep.rows)


def test_localtime_preconditions():
    with pytest.raises(DomainError):
        localtime_law_check("zeta1d", [1_000], 100, seed=1)
    with pytest.raises(DomainError):
        localtime_law_check("zeta1d", [1_000], 10_000, u_grid=[6.0], seed=1)


def test_checks_deterministic():
    a = moment_check("srw2d", GRID, [2, 3], 2, seed=11)
    b = moment_check("srw2d", GRID, [2, 3], 2, seed=11)
    a.runtime_ms = b.runtime_ms = 0
    assert a.to_json() == b.to_json()


def test_workers_match_serial():
    a = range_law_check("zeta1d", GRID, 3, seed=4)
    b = range_law_check("zeta1d", GRID, 3, seed=4, workers=2)
    assert [r.observed for r in a.rows] == [r.observed for r in b.rows]


@pytest.mark.parametrize("name", ["srw2d", "zeta1d"])
def test_conditional_moment_identities(name):
    model = build_model(name)
    n = 50_000
    run = run_trajectory(model, n, seed=3, checkpoints=[n], powers=(0, 2))
    s = run.stats[-1]
    m1, m2 = conditional_moments(run.field, model.gamma_d)
    assert m1 == pytest.approx(model.gamma_d * n / (s.range_size * math.log(n)), rel=1e-12)
    want = (model.gamma_d / math.log(n)) ** 2 * s.self_intersections[2] / s.range_size
    assert m2 == pytest.approx(want, rel=1e-12)


@given(st.lists(st.integers(1, 30), min_size=1, max_size=200),
       st.lists(st.floats(0.01, 5.0), min_size=2, max_size=12, unique=True))
def test_survival_nonincreasing(lt, u):
    u = sorted(u)
    s = survival_curve(lt, 0.3, u)
    assert np.all(np.diff(s) <= 0)
    assert np.all((s >= 0) & (s <= 1))
    # right-continuous convention: S(u) counts values >= u
    x = np.array(lt) * 0.3
    assert s[0] == np.mean(x >= u[0])
