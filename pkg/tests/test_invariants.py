from fractions import Fraction as F

import numpy as np

from conftest import random_model
from filtlab.invariants import finitely_isomorphic, fingerprint
from filtlab.model import MarkovModel, bernoulli, pascal, stationary, symmetric


def relabel(model, rng):
    perms = [rng.permutation(len(model._full_marginal(n))) for n in range(model.horizon + 1)]
    init = model._full_marginal(0)[np.argsort(perms[0])]
    kernels = []
    for n in range(model.horizon):
        k = model._raw_kernel(n)
        kernels.append(k[np.ix_(np.argsort(perms[n]), np.argsort(perms[n + 1]))])
    return MarkovModel("explicit", init, kernels=kernels)


def test_example_pair_agrees():
    res = finitely_isomorphic(bernoulli(), symmetric(), 8)
    assert res["agree"] and res["equal_up_to"] == 8 and res["first_mismatch"] is None


def test_different_bernoulli_parameters_mismatch_at_level_one():
    res = finitely_isomorphic(bernoulli(F(3, 4)), bernoulli(F(2, 3)), 4)
    assert res["first_mismatch"] == 1 and res["equal_up_to"] == 0


def test_single_class_models():
    for m in (bernoulli(), symmetric()):
        fp = fingerprint(m, 5)
        assert all(list(t.values()) == [1] for t in fp.levels)
    dyadic = stationary([["1/2", "1/2"], ["1/2", "1/2"]], ["1/2", "1/2"], 4)
    assert all(len(t) == 1 for t in fingerprint(dyadic, 4).levels)


def test_masses_sum_to_one(rng):
    for _ in range(10):
        m = random_model(rng, zero_prob=0.2)
        for table in fingerprint(m, m.horizon).levels:
            assert sum(table.values()) == 1


def test_relabeling_invariance(rng):
    for _ in range(15):
        m = random_model(rng)
        a, b = fingerprint(m, m.horizon), fingerprint(relabel(m, rng), m.horizon)
        assert a.levels == b.levels


def test_model_against_itself():
    m = pascal(6)
    assert finitely_isomorphic(m, m, 6)["equal_up_to"] == 6


def test_pascal_classes_pair_mirror_vertices():
    fp = fingerprint(pascal(3), 3)
    assert sorted(fp.classes(3).values()) == [F(1, 4), F(3, 4)]
    out = fp.to_dict()
    assert out[3]["level"] == 3 and len(out[3]["classes"]) == 2
