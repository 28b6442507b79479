from fractions import Fraction as F
from itertools import permutations, product

import numpy as np
import pytest

from conftest import random_model
from filtlab.errors import HeightMismatch, LevelTooSmall, NoCoupling, SemanticsNotApplicable, TooLarge
from filtlab.iteration import FunctionSpec, InitialMetricSpec, iterate
from filtlab.model import bernoulli, pascal, symmetric
from filtlab.transport import kantorovich, line_metric
from filtlab.trees import (ISO, MARKOV, ORBIT, EquippedTree, FunctionValuation, LeafValuation,
                           brute_force_coupling_oracle, build_tree, coupling_distance,
                           criterion_check, criterion_report, isomorphisms, martingale_distance,
                           quotient_criterion)


def binary_automorphisms(h):
    """Leaf permutations of the binary tree of height h, by swapping subtrees."""
    if h == 0:
        return [[0]]
    sub = binary_automorphisms(h - 1)
    half = 2 ** (h - 1)
    out = []
    for a in sub:
        for b in sub:
            out.append(a + [half + x for x in b])
            out.append([half + x for x in b] + a)
    return out


def orbit_oracle(v1, v2, h):
    return min(sum(abs(v1[i] - v2[phi[i]]) for i in range(2**h)) for phi in binary_automorphisms(h)) / F(2**h)


def naive_isomorphic(t1, t2):
    """Isomorphism search by trying every child matching; no canonical forms."""
    if t1.is_leaf or t2.is_leaf:
        return t1.is_leaf and t2.is_leaf
    if len(t1.children) != len(t2.children):
        return False
    for perm in permutations(range(len(t2.children))):
        if all(m == t2.children[perm[i]][0] and naive_isomorphic(c, t2.children[perm[i]][1])
               for i, (m, c) in enumerate(t1.children)):
            return True
    return False


def random_tree(rng, height, max_children=3):
    if height == 0:
        return None
    k = int(rng.integers(1, max_children + 1))
    w = rng.integers(1, 3, k)
    return [(F(int(x), int(w.sum())), random_tree(rng, height - 1, max_children)) for x in w]


def test_build_tree_examples():
    t = build_tree(symmetric(), 1, 0)
    assert [m for m, _ in t.children] == [F(3, 4), F(1, 4)]
    b = bernoulli()
    assert build_tree(b, 2, 0).canonical == build_tree(b, 2, 1).canonical
    p = build_tree(pascal(4), 2, 1)
    assert [m for m, _ in p.children] == [F(1, 2), F(1, 2)]
    assert build_tree(symmetric(), 3, 1).leaf_count == 8


def test_uniform_trees_automorphism_counts():
    assert len(list(isomorphisms(EquippedTree.uniform(2, 2), EquippedTree.uniform(2, 2)))) == 8
    assert len(list(isomorphisms(EquippedTree.uniform(2, 3), EquippedTree.uniform(2, 3)))) == 128
    assert len(binary_automorphisms(3)) == 128


def test_orbit_examples():
    t1, t2 = EquippedTree.uniform(2, 1), EquippedTree.uniform(2, 1)
    assert coupling_distance(t1, t2, LeafValuation([0, 1]), LeafValuation([1, 0]), ORBIT) == 0
    t1, t2 = EquippedTree.uniform(2, 2), EquippedTree.uniform(2, 2)
    assert coupling_distance(t1, t2, LeafValuation([0, 1, 1, 1]), LeafValuation([1, 1, 0, 1]), ORBIT) == 0


def test_orbit_dp_matches_enumeration_small_heights():
    for h in (1, 2):
        t = EquippedTree.uniform(2, h)
        for v1 in product((0, 1), repeat=2**h):
            for v2 in product((0, 1), repeat=2**h):
                got = coupling_distance(t, t, LeafValuation(v1), LeafValuation(v2), ORBIT)
                assert got == orbit_oracle(v1, v2, h)


def test_orbit_dp_matches_enumeration_height3(rng):
    t = EquippedTree.uniform(2, 3)
    for _ in range(200):
        v1, v2 = (tuple(int(x) for x in rng.integers(0, 2, 8)) for _ in range(2))
        assert coupling_distance(t, t, LeafValuation(v1), LeafValuation(v2), ORBIT) == orbit_oracle(v1, v2, 3)


def test_orbit_distance_is_normalized_hamming_minimum(rng):
    t = EquippedTree.uniform(2, 3)
    for _ in range(50):
        v1, v2 = (tuple(int(x) for x in rng.integers(0, 2, 8)) for _ in range(2))
        ham = min(sum(a != b for a, b in zip(v1, [v2[i] for i in phi])) for phi in binary_automorphisms(3))
        assert coupling_distance(t, t, LeafValuation(v1), LeafValuation(v2), ORBIT) == F(ham, 8)


def test_markov_on_symmetric_model():
    m = symmetric(horizon=6)
    val = FunctionValuation.of(m, FunctionSpec.coordinate(m))
    for n in range(1, 7):
        d = coupling_distance(build_tree(m, n, 0), build_tree(m, n, 1), val, val, MARKOV)
        assert d == F(1, 2**n)
    t0, t1 = build_tree(m, 2, 0), build_tree(m, 2, 1)
    assert brute_force_coupling_oracle(t0, t1, val) == F(1, 4)


def test_markov_coupling_equals_iterated_metric(rng):
    for _ in range(20):
        m = random_model(rng, zero_prob=0.2)
        labels = m.labels(0)
        f = FunctionSpec(1, {(a,): F(int(rng.integers(0, 5))) for a in labels})
        rep = iterate(m, InitialMetricSpec.from_function(f))
        val = FunctionValuation.of(m, f)
        for n in rep.levels:
            trees = [build_tree(m, n, a) for a in range(m.state_count(n))]
            for a in range(len(trees)):
                for b in range(len(trees)):
                    assert coupling_distance(trees[a], trees[b], val, val, MARKOV) == rep.distance(n)[a, b]


def test_dp_matches_oracle_on_random_trees(rng):
    checked = 0
    while checked < 40:
        s1, s2 = random_tree(rng, 2, 3), random_tree(rng, 2, 3)
        t1, t2 = EquippedTree.from_nested(s1), EquippedTree.from_nested(s2)
        if t1.leaf_count + t2.leaf_count > 12:
            continue
        v1 = LeafValuation([F(int(x)) for x in rng.integers(0, 3, t1.leaf_count)])
        v2 = LeafValuation([F(int(x)) for x in rng.integers(0, 3, t2.leaf_count)])
        for sem in (MARKOV, ISO):
            try:
                want = brute_force_coupling_oracle(t1, t2, v1, v2, sem)
            except NoCoupling:
                with pytest.raises(NoCoupling):
                    coupling_distance(t1, t2, v1, v2, sem)
                continue
            assert coupling_distance(t1, t2, v1, v2, sem) == want
        checked += 1


def test_coupling_classes_are_nested(rng):
    t = EquippedTree.uniform(2, 3)
    for _ in range(50):
        v1, v2 = ([F(int(x)) for x in rng.integers(0, 4, 8)] for _ in range(2))
        a, b = LeafValuation(v1), LeafValuation(v2)
        mk, iso, orb = (coupling_distance(t, t, a, b, s) for s in (MARKOV, ISO, ORBIT))
        assert mk <= iso <= orb
        pts = sorted(set(v1) | set(v2))
        la = [F(v1.count(x), 8) for x in pts]
        lb = [F(v2.count(x), 8) for x in pts]
        assert kantorovich(la, lb, line_metric(pts))[0] <= mk


def test_identity_coupling_gives_zero(rng):
    for _ in range(20):
        t = EquippedTree.from_nested(random_tree(rng, 3, 2))
        v = LeafValuation([F(int(x)) for x in rng.integers(0, 5, t.leaf_count)])
        for sem in (MARKOV, ISO):
            assert coupling_distance(t, t, v, v, sem) == 0


def test_canonical_form_matches_isomorphism_search(rng):
    trees = [EquippedTree.from_nested(random_tree(rng, 2, 2)) for _ in range(40)]
    trees = [t for t in trees if t.leaf_count <= 16]
    for t1 in trees:
        for t2 in trees:
            assert (t1.canonical == t2.canonical) == naive_isomorphic(t1, t2)


def test_iso_mixture_symmetric_pair_is_feasible():
    # the two level-n trees are mirror images, so an isomorphism exists
    m = symmetric(horizon=4)
    val = FunctionValuation.of(m, FunctionSpec.coordinate(m))
    for n in (1, 2, 3):
        assert coupling_distance(build_tree(m, n, 0), build_tree(m, n, 1), val, val, ISO) == 1


def test_iso_mixture_reports_no_coupling_on_pascal():
    m = pascal(4)
    f = FunctionSpec(1, {(0,): F(0)})
    res = criterion_check(m, f, F(1, 10), 2, ISO)
    assert res["no_coupling"]
    assert all(res["distances"][a][b] is None for a, b in res["no_coupling"])


def test_criterion_examples():
    b = bernoulli(horizon=3)
    assert criterion_check(b, FunctionSpec.coordinate(b), F(1, 10), 1)["satisfied"]
    s = symmetric(horizon=8)
    f = FunctionSpec.coordinate(s)
    eps = F(1, 20)
    results = {n: criterion_check(s, f, eps, n, MARKOV)["satisfied"] for n in range(1, 9)}
    assert results == {n: n >= 5 for n in range(1, 9)}
    assert not criterion_check(s, f, eps, 4, ISO)["satisfied"]
    rep = criterion_report(s, f, eps, 2)
    assert set(rep) == {MARKOV, ISO}


def test_criterion_errors():
    s = symmetric(horizon=4)
    with pytest.raises(LevelTooSmall):
        criterion_check(s, FunctionSpec(2, {(a, b): 0 for a in (0, 1) for b in (0, 1)}), F(1, 2), 1)
    with pytest.raises(SemanticsNotApplicable):
        criterion_check(s, FunctionSpec.coordinate(s), F(1, 2), 2, ORBIT)
    with pytest.raises(HeightMismatch):
        coupling_distance(EquippedTree.uniform(2, 1), EquippedTree.uniform(2, 2),
                          LeafValuation([0, 1]), LeafValuation([0, 1, 0, 1]))
    with pytest.raises(TooLarge):
        big = EquippedTree.uniform(2, 4)
        brute_force_coupling_oracle(big, big, LeafValuation([0] * 16))


def test_quotient_criterion():
    s = symmetric(horizon=8)
    f = FunctionSpec.coordinate(s)
    assert quotient_criterion(s, f, F(1, 10), 4, 0) == criterion_check(s, f, F(1, 10), 4)
    q = quotient_criterion(s, f, F(1, 10), 4, 1)
    assert q["distances"][0][1] == F(1, 8)
    b = bernoulli(horizon=6)
    assert quotient_criterion(b, FunctionSpec.coordinate(b), F(1, 10), 5, 2)["satisfied"]


def test_martingale_distance():
    s = symmetric(horizon=6)
    for n in range(4):
        assert martingale_distance(s, n)["r"][0, 1] == F(1, 2 ** (n + 1))
    assert martingale_distance(bernoulli(horizon=4), 2)["integral"] == 0
    rep = iterate(s, N=5)
    for n in range(4):
        assert martingale_distance(s, n)["integral"] == rep.functional(n + 1)
