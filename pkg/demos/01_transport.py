"""Exact optimal transport between small discrete measures.

Run: python3 demos/01_transport.py
"""
from fractions import Fraction as F

import numpy as np

from filtlab.transport import (brute_force_transport, discrete_metric, kantorovich,
                               line_metric, total_variation)

# two measures on the points 0, 1, 2 of the line
alpha = [F(1, 2), F(1, 4), F(1, 4)]
beta = [F(0), F(1, 4), F(3, 4)]
ground = line_metric([0, 1, 2])

value, plan = kantorovich(alpha, beta, ground)
print("transport cost:", value)
print("optimal plan:")
print(plan.plan)
print("vertex enumeration agrees:", brute_force_transport(alpha, beta, ground) == value)

# with the discrete metric the cost is the total variation distance
a, b = [F(3, 4), F(1, 4)], [F(1, 4), F(3, 4)]
print("two-point cost:", kantorovich(a, b, discrete_metric(2))[0], "tv:", total_variation(a, b))

# the cost is monotone in the ground metric and scales with it
print("scaled by 3:", kantorovich(alpha, beta, ground * 3)[0])

# but the optimum of a sum of metrics can exceed the sum of optima:
# the two metrics below prefer different plans
d1 = line_metric([0, 3, 0, 2])
d2 = line_metric([3, 3, 1, 0])
u = [F(0), F(1, 2), F(1, 2), F(0)]
v = [F(1, 2), F(0), F(0), F(1, 2)]
k1, k2 = kantorovich(u, v, d1)[0], kantorovich(u, v, d2)[0]
print(f"K(d1) + K(d2) = {k1} + {k2} = {k1 + k2};  K(d1 + d2) = {kantorovich(u, v, d1 + d2)[0]}")

# float mode for larger problems
rng = np.random.default_rng(0)
x = rng.dirichlet(np.ones(40))
y = rng.dirichlet(np.ones(40))
pts = np.sort(rng.random(40))
print("40-point float cost:", kantorovich(x, y, line_metric(pts, exact=False), exact=False)[0])
