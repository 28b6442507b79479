"""Iterated semimetrics on two chains with the same one-step laws.

The first chain draws i.i.d. symbols; the second keeps its symbol with
probability p. Under the transport recursion the second chain's distances
shrink geometrically, while the per-level total variation of the
cotransitions stays at |p - q|.

Run: python3 demos/02_two_semantics.py
"""
from filtlab.iteration import (InitialMetricSpec, concentration_check, decide_standardness,
                               iterate)
from filtlab.model import bernoulli, ergodicity_diagnostic, symmetric

N = 12
for name, model in (("i.i.d.", bernoulli()), ("symmetric", symmetric())):
    print(f"--- {name} chain")
    for semantics in ("kantorovich", "tv_refresh"):
        rep = iterate(model, InitialMetricSpec.discrete(), N, semantics)
        series = ", ".join(str(x) for x in rep.functionals[:6])
        print(f"{semantics:12s} I_n = {series}, ...  decision: {decide_standardness(rep)}")
    diag = ergodicity_diagnostic(model, N)
    print("Dobrushin product at level", N, "=", diag["product_bound"])

# a deeper initial metric changes the numbers, not the verdict
rep = iterate(bernoulli(), InitialMetricSpec.cylinder([1, 1, 1]), N)
print("i.i.d., cylinder metric on three coordinates: I_n from level", rep.levels[0],
      "=", set(rep.functionals))

# concentration: once d_n is below eps everything is in one ball
model = symmetric()
rep = iterate(model, N=N)
print(concentration_check(model, rep, 8, 0.01))
