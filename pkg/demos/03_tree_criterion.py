"""Trees of histories and the coupling criterion.

Each level-n state is the root of a tree whose branches are the possible
histories leading to it. Two states are close when their trees can be
coupled so that a function of the earliest coordinate rarely differs.

Run: python3 demos/03_tree_criterion.py
"""
from fractions import Fraction as F

from filtlab.errors import NoCoupling
from filtlab.iteration import FunctionSpec
from filtlab.model import pascal, symmetric
from filtlab.trees import (EquippedTree, FunctionValuation, LeafValuation, brute_force_coupling_oracle,
                           build_tree, coupling_distance, criterion_report, martingale_distance)

model = symmetric(horizon=8)
f = FunctionSpec.coordinate(model)
val = FunctionValuation.of(model, f)

t0, t1 = build_tree(model, 3, 0), build_tree(model, 3, 1)
print("tree of state 0 at level 3:", t0.leaf_count, "leaves")
for sem in ("markov_recursive", "iso_mixture"):
    print(f"{sem}: distance {coupling_distance(t0, t1, val, val, sem)}")
print("brute force over all recursive couplings:", brute_force_coupling_oracle(t0, t1, val))

for n in (2, 4, 6, 8):
    rep = criterion_report(model, f, F(1, 20), n)
    print(n, {s: r["satisfied"] for s, r in rep.items()})

# automorphisms of a binary tree: only swaps at nodes are allowed
t = EquippedTree.uniform(2, 2)
a, b = LeafValuation([0, 1, 1, 1]), LeafValuation([1, 1, 0, 1])
print("orbit distance:", coupling_distance(t, t, a, b, "automorphism_orbit"))

# structure-preserving couplings can fail to exist
p = pascal(4)
try:
    coupling_distance(build_tree(p, 2, 0), build_tree(p, 2, 1),
                      LeafValuation([0]), LeafValuation([0, 0]), "iso_mixture")
except NoCoupling as e:
    print("no coupling:", e)

print("martingale form at n=2:", martingale_distance(model, 2)["integral"])
