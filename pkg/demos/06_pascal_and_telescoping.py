"""The Pascal graph, and skipping levels of a chain.

Run: python3 demos/06_pascal_and_telescoping.py
"""
from filtlab.iteration import InitialMetricSpec, iterate
from filtlab.model import pascal, symmetric, telescope

model = pascal(12)
print("cotransitions at level 4 (row k: back to k-1, stay at k):")
print(model.cotransition(4))
rep = iterate(model, InitialMetricSpec.cylinder([1, 1, 1]), 12)
print("I_n:", [f"{float(x):.4f}" for x in rep.functionals])

# keeping only levels 0, 1, 2, 4, 8 composes the kernels in between
fast = telescope(symmetric(), [1, 2, 4, 8])
rep = iterate(fast, N=fast.horizon, semantics="tv_refresh")
print("telescoped per-level distances:", [str(rep.distance(n)[0, 1]) for n in rep.levels])
