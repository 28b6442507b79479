"""Finite invariants: which tree shapes occur at each level, and with what mass.

Run: python3 demos/04_fingerprints.py
"""
from fractions import Fraction as F

from filtlab.invariants import fingerprint, finitely_isomorphic
from filtlab.model import bernoulli, pascal, symmetric

res = finitely_isomorphic(bernoulli(), symmetric(), 8)
print("i.i.d. vs symmetric: agree up to level", res["equal_up_to"])

res = finitely_isomorphic(bernoulli(F(3, 4)), bernoulli(F(2, 3)), 8)
print("p=3/4 vs p=2/3: first mismatch at level", res["first_mismatch"])

# the Pascal graph has several shapes per level; mirror vertices share one
for row in fingerprint(pascal(5), 5).to_dict(short=8):
    print(row["level"], [(c["form"], c["mass"]) for c in row["classes"]])
