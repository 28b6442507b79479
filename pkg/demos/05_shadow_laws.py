"""Random distance matrices: sample states, record their pairwise distances.

Run: python3 demos/05_shadow_laws.py
"""
from filtlab.iteration import InitialMetricSpec
from filtlab.model import pascal, symmetric
from filtlab.shadow import (exchangeability_check, sample_matrix_distribution, secondary_entropy,
                            shadow_stabilization, two_point_law)

model = symmetric()
sample = sample_matrix_distribution(model, 8, "tv_refresh", k=2, count=10_000, seed=42)
law = two_point_law(sample)
for x, f, h in zip(law.support, law.frequencies, law.half_widths):
    print(f"distance {x}: frequency {f:.4f} +- {h:.4f}")

# the same seed gives the same sample however the work is split
again = sample_matrix_distribution(model, 8, "tv_refresh", 2, 10_000, 42, workers=4)
print("parallel sample identical:", (again.states == sample.states).all())

for sem in ("tv_refresh", "kantorovich"):
    st = shadow_stabilization(model, sem, 2, 2000, [2, 4, 6, 8], seed=1)
    print(sem, "successive law distances:", [str(s) for s in st["successive_distances"]],
          "stabilized:", st["stabilized"])

# the Pascal graph starts from one vertex, so measure distances on the first steps
init = InitialMetricSpec.cylinder([1, 1, 1])
big = sample_matrix_distribution(pascal(10), 10, "kantorovich", k=4, count=10_000, seed=3, init=init)
print(exchangeability_check(big))
print(secondary_entropy(two_point_law(big), 0.05))
