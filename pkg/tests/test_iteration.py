import io
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import frac_semimetric, random_model
from filtlab.errors import DimensionMismatch, HorizonExceeded, LevelMissing, WindowTooLarge
from filtlab.iteration import (INCONCLUSIVE, KANTOROVICH, NONSTANDARD, STANDARD, TV_REFRESH,
                               FunctionSpec, InitialMetricSpec, concentration_check,
                               decide_standardness, iterate, transfer_semimetric,
                               write_series_csv)
from filtlab.model import bernoulli, pascal, symmetric
from filtlab.transport import Semimetric, discrete_metric
from filtlab.trees import FunctionValuation, brute_force_coupling_oracle, build_tree


def test_transfer_on_bernoulli_is_zero():
    q = bernoulli().cotransition(1)
    d = transfer_semimetric(Semimetric(np.array([[F(0), F(7)], [F(7), F(0)]], dtype=object)), q)
    assert d[0, 1] == 0


def test_transfer_scales_with_ground():
    q = symmetric().cotransition(1)
    assert transfer_semimetric(discrete_metric(2), q)[0, 1] == F(1, 2)
    c = F(3, 7)
    assert transfer_semimetric(discrete_metric(2) * c, q)[0, 1] == c / 2


def test_transfer_dimension_check():
    with pytest.raises(DimensionMismatch):
        transfer_semimetric(discrete_metric(3), symmetric().cotransition(1))


def test_symmetric_kantorovich_closed_form():
    rep = iterate(symmetric(), N=32)
    for n in rep.levels:
        assert rep.distance(n)[0, 1] == F(1, 2**n)
        assert rep.functional(n) == F(1, 2**(n + 1))


def test_symmetric_recursion_against_brute_force_couplings():
    m = symmetric(horizon=3)
    rep = iterate(m, N=3)
    val = FunctionValuation.of(m, FunctionSpec.coordinate(m))
    for n in (1, 2, 3):
        t0, t1 = build_tree(m, n, 0), build_tree(m, n, 1)
        assert brute_force_coupling_oracle(t0, t1, val) == rep.distance(n)[0, 1]


def test_symmetric_tv_refresh_constant():
    rep = iterate(symmetric(), N=32, semantics="tv-per-level")
    assert rep.semantics == TV_REFRESH
    assert all(rep.distance(n)[0, 1] == F(1, 2) for n in rep.levels)
    assert all(x == F(1, 4) for x in rep.functionals)
    assert decide_standardness(rep) == NONSTANDARD


@pytest.mark.parametrize("init", [
    InitialMetricSpec.discrete(),
    InitialMetricSpec.cylinder([1]),
    InitialMetricSpec.cylinder([1, F(1, 2)]),
    InitialMetricSpec.cylinder([1, 1, 1]),
])
def test_bernoulli_functional_vanishes(init):
    rep = iterate(bernoulli(horizon=10), init, 10)
    assert all(x == 0 for x in rep.functionals)
    assert decide_standardness(rep, window=2) == STANDARD


def test_cylinder_depth_sets_first_level():
    rep = iterate(pascal(6), InitialMetricSpec.cylinder([1, 1, 1]), 6)
    assert rep.levels == [3, 4, 5, 6]
    with pytest.raises(LevelMissing):
        rep.distance(2)
    with pytest.raises(HorizonExceeded):
        iterate(pascal(2), InitialMetricSpec.cylinder([1, 1, 1]), 2)


def test_functional_nonincreasing_on_random_models(rng):
    for _ in range(30):
        m = random_model(rng, zero_prob=0.2)
        rep = iterate(m)
        assert all(b <= a for a, b in zip(rep.functionals, rep.functionals[1:]))
        for d in rep.distances:
            assert all(d[i, i] == 0 for i in range(d.size))
            assert (d.d == d.d.T).all()


def test_initial_metric_monotonicity(rng):
    for _ in range(30):
        m = random_model(rng)
        k0 = m.state_count(0)
        d1 = frac_semimetric(rng, k0)
        k = F(int(rng.integers(1, 4)))
        d2 = d1 * k + frac_semimetric(rng, k0)  # d1 <= d2 <= k * d2
        small = iterate(m, InitialMetricSpec.on_level0(Semimetric(d1)))
        big = iterate(m, InitialMetricSpec.on_level0(Semimetric(d2)))
        assert all(a <= b for a, b in zip(small.functionals, big.functionals))


def test_scaling_equivariance(rng):
    for _ in range(20):
        m = random_model(rng)
        c = F(int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        init = InitialMetricSpec.on_level0(Semimetric(frac_semimetric(rng, m.state_count(0))))
        base, scaled = iterate(m, init), iterate(m, init.scaled(c))
        for d, e in zip(base.distances, scaled.distances):
            assert (d.d * c == e.d).all()


def test_pascal_functional_nonincreasing():
    # one vertex at level 0, so use a cylinder metric on the first steps
    rep = iterate(pascal(12), InitialMetricSpec.cylinder([1, 1, 1]))
    assert all(b <= a for a, b in zip(rep.functionals, rep.functionals[1:]))
    assert rep.functionals[-1] < rep.functionals[0]


def test_parallel_transfer_matches_serial():
    m = pascal(8)
    a, b = iterate(m), iterate(m, workers=4)
    assert all(x == y for x, y in zip(a.distances, b.distances))


def test_float_mode_close_to_exact():
    exact = iterate(pascal(8, exact=True))
    approx = iterate(pascal(8, exact=False))
    assert np.allclose([float(x) for x in exact.functionals], approx.functionals)


def test_decisions():
    sym = iterate(symmetric(horizon=10))
    assert decide_standardness(sym) == INCONCLUSIVE
    assert decide_standardness(iterate(symmetric(horizon=40), N=40)) == STANDARD
    with pytest.raises(WindowTooLarge):
        decide_standardness(sym, window=11)
    with pytest.raises(WindowTooLarge):
        decide_standardness(sym, window=0)


def test_concentration():
    bern = iterate(bernoulli(horizon=4))
    assert concentration_check(bernoulli(horizon=4), bern, 3, F(1, 100))["ball_mass"] == 1
    sym = symmetric(horizon=6)
    rep = iterate(sym)
    assert concentration_check(sym, rep, 6, F(1, 32))["satisfied"]
    tv = iterate(sym, semantics=TV_REFRESH)
    res = concentration_check(sym, tv, 6, F(1, 4))
    assert res["ball_mass"] == F(1, 2) and not res["satisfied"]


def test_function_initial_metric_matches_level0():
    m = symmetric(horizon=5)
    f = FunctionSpec(1, {(0,): F(0), (1,): F(3)})
    a = iterate(m, InitialMetricSpec.from_function(f))
    b = iterate(m, InitialMetricSpec.on_level0(discrete_metric(2) * 3))
    assert all(x == y for x, y in zip(a.functionals, b.functionals))


def test_function_spec_round_trip():
    f = FunctionSpec.from_dict({"depth": 2, "table": {"0,1": "1/3", "1,1": 2}})
    assert f.table[(0, 1)] == F(1, 3)
    assert FunctionSpec.from_dict(f.to_dict()) == f


def test_csv_columns():
    rep = iterate(symmetric(horizon=3))
    buf = io.StringIO()
    text = write_series_csv([(rep, INCONCLUSIVE)], buf)
    assert text.splitlines()[0] == "n,I_n,max_pair_distance,semantics,decision"
    assert text.splitlines()[1] == "1,1/4,1/2,kantorovich,inconclusive"
    assert buf.getvalue() == text
