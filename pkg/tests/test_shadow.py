import math
from fractions import Fraction as F

import numpy as np
import pytest

from filtlab.errors import EmptySample, InputError, LevelMissing
from filtlab.model import bernoulli, pascal, symmetric
from filtlab.shadow import (DistanceMatrixSample, exact_two_point_law, exchangeability_check,
                            law_distance, sample_matrix_distribution, secondary_entropy,
                            shadow_stabilization, two_point_law)


def test_bernoulli_matrices_are_zero():
    s = sample_matrix_distribution(bernoulli(), 4, "kantorovich", 3, 500, 1)
    assert not s.matrices.any()
    assert two_point_law(s).support == [0]
    assert exchangeability_check(s)["max_deviation"] == 0


def test_symmetric_entries():
    tv = sample_matrix_distribution(symmetric(), 8, "tv_refresh", 2, 1000, 3)
    assert set(tv.entries(0, 1)) <= {F(0), F(1, 2)}
    k = sample_matrix_distribution(symmetric(), 10, "kantorovich", 2, 1000, 3)
    law = two_point_law(k)
    assert law.support == [0, F(1, 1024)]
    assert abs(law.frequencies[0] - 0.5) < 0.05


def test_matrices_are_symmetric_semimetrics():
    s = sample_matrix_distribution(pascal(8), 8, "kantorovich", 4, 300, 5)
    m = s.matrices
    assert (m == m.transpose(0, 2, 1)).all()
    assert (np.diagonal(m, axis1=1, axis2=2) == 0).all()
    for x in m:
        assert (x[:, :, None] <= x[:, None, :] + x.T[None, :, :] + 1e-12).all()


def test_seed_and_parallel_determinism():
    a = sample_matrix_distribution(symmetric(), 6, "tv_refresh", 3, 20000, 9)
    b = sample_matrix_distribution(symmetric(), 6, "tv_refresh", 3, 20000, 9, workers=4)
    c = sample_matrix_distribution(symmetric(), 6, "tv_refresh", 3, 20000, 10)
    assert (a.states == b.states).all()
    assert not (a.states == c.states).all()


def test_prefix_property_of_counter_stream():
    a = sample_matrix_distribution(symmetric(), 6, "tv_refresh", 5, 100, 2)
    b = sample_matrix_distribution(symmetric(), 6, "tv_refresh", 5, 5000, 2)
    assert (a.states == b.states[:100]).all()


def test_empirical_law_close_to_exact():
    m = pascal(10)
    count = 20000
    s = sample_matrix_distribution(m, 10, "kantorovich", 2, count, 4)
    exact = exact_two_point_law(m, 10, s.semimetric)
    assert sum(exact.values()) == 1
    assert two_point_law(s).tv_to(exact) < 4 * math.sqrt(math.log(count) / count)


def test_stabilization():
    tv = shadow_stabilization(symmetric(), "tv_refresh", 2, 1000, [2, 4, 6, 8])
    assert tv["stabilized"] and tv["successive_distances"] == [0, 0, 0]
    k = shadow_stabilization(symmetric(), "kantorovich", 2, 1000, [2, 4, 6])
    assert k["successive_distances"] == [F(3, 32), F(3, 128)]
    assert not k["stabilized"]
    assert shadow_stabilization(bernoulli(), "kantorovich", 2, 100, [1, 2])["stabilized"]


def test_law_distance_on_line():
    assert law_distance({F(0): F(1)}, {F(1, 2): F(1)}) == F(1, 2)
    assert law_distance({0.0: 0.5, 1.0: 0.5}, {0.0: 0.5, 1.0: 0.5}) == 0


def test_exchangeability_within_noise():
    s = sample_matrix_distribution(pascal(6), 6, "kantorovich", 4, 10000, 11)
    res = exchangeability_check(s)
    assert res["pairs"] == 6 and res["max_deviation"] < res["three_sigma"]


def test_secondary_entropy():
    assert secondary_entropy({0: 0.5, 0.5: 0.5}, 0.1)["covering_number"] == 2
    assert secondary_entropy({0: 0.5, 0.1: 0.5}, 0.1)["covering_number"] == 1


def test_errors():
    with pytest.raises(InputError):
        sample_matrix_distribution(symmetric(), 3, "kantorovich", 1, 10, 0)
    with pytest.raises(InputError):
        sample_matrix_distribution(symmetric(), 3, "kantorovich", 2, 0, 0)
    with pytest.raises(LevelMissing):
        sample_matrix_distribution(symmetric(horizon=4), 5, "kantorovich", 2, 10, 0)
    with pytest.raises(InputError):
        exchangeability_check(sample_matrix_distribution(symmetric(), 3, "kantorovich", 2, 10, 0))
    s = sample_matrix_distribution(symmetric(), 3, "kantorovich", 2, 10, 0)
    empty = DistanceMatrixSample(3, s.semantics, 2, 0, 0, s.states[:0], s.semimetric)
    with pytest.raises(EmptySample):
        two_point_law(empty)
