"""Exact Kantorovich distance between probability vectors on a finite space.

The optimal plan is found with the transportation simplex (network simplex
on the complete bipartite graph) using Bland's rule. In exact mode all
masses and costs are scaled to integers first, so every pivot is integer
arithmetic and the optimum is returned as a ``Fraction``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import _numeric as num
from .errors import DimensionMismatch, NotNormalized, ShapeMismatch, TooLarge

__all__ = [
    "Semimetric",
    "CouplingPlan",
    "kantorovich",
    "total_variation",
    "brute_force_transport",
    "discrete_metric",
    "line_metric",
    "transport_vertices",
]


class Semimetric:
    """Symmetric, zero-diagonal distance matrix satisfying the triangle inequality.

    With ``semimetric=False`` distinct points must be at positive distance.
    """

    __slots__ = ("d", "exact")

    def __init__(self, d, *, semimetric: bool = True, validate: bool = True,
                 exact: bool | None = None, tol: float = num.FLOAT_TOL):
        if not isinstance(d, np.ndarray):
            d = np.asarray(d)
        if exact is None:
            exact = d.dtype == object
        d = num.convert(d, exact) if (d.dtype == object) != exact else d
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ShapeMismatch(f"distance matrix must be square, got {d.shape}")
        self.d = d
        self.exact = exact
        if validate:
            self._validate(semimetric, tol)

    @classmethod
    def from_rows(cls, rows, exact: bool = True, **kw) -> "Semimetric":
        return cls(num.as_matrix(rows, exact), exact=exact, **kw)

    def _validate(self, semimetric: bool, tol: float) -> None:
        d = self.d
        t = 0 if self.exact else tol
        n = d.shape[0]
        if n == 0:
            return
        if self.exact:
            bad = any(d[i, j] < 0 or d[i, j] != d[j, i]
                      for i in range(n) for j in range(n))
            if bad or any(d[i, i] != 0 for i in range(n)):
                raise ValueError("distance matrix must be symmetric, nonnegative, zero on the diagonal")
        else:
            if (d < -t).any() or (abs(d - d.T) > t).any() or (abs(np.diag(d)) > t).any():
                raise ValueError("distance matrix must be symmetric, nonnegative, zero on the diagonal")
        if not semimetric:
            off = d[~np.eye(n, dtype=bool)]
            if any(v <= t for v in off):
                raise ValueError("metric requires positive off-diagonal distances")
        # d[a, c] <= d[a, b] + d[b, c]
        via = d[:, :, None] + d[None, :, :]
        shortest = via.min(axis=1)
        if self.exact:
            if any(d[a, c] > shortest[a, c] for a in range(n) for c in range(n)):
                raise ValueError("triangle inequality violated")
        elif (d - shortest > t).any():
            raise ValueError("triangle inequality violated")

    @property
    def size(self) -> int:
        return self.d.shape[0]

    def __getitem__(self, key):
        return self.d[key]

    def __mul__(self, c) -> "Semimetric":
        return Semimetric(self.d * c, exact=self.exact, validate=False)

    __rmul__ = __mul__

    def __add__(self, other: "Semimetric") -> "Semimetric":
        return Semimetric(self.d + other.d, exact=self.exact, validate=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, Semimetric) and self.d.shape == other.d.shape and bool((self.d == other.d).all())

    def __repr__(self) -> str:
        return f"Semimetric(size={self.size}, exact={self.exact})"


def discrete_metric(n: int, exact: bool = True) -> Semimetric:
    d = np.ones((n, n), dtype=object if exact else float)
    if exact:
        d[:] = Fraction(1)
    for i in range(n):
        d[i, i] = num.zero(exact)
    return Semimetric(d, exact=exact, validate=False)


def line_metric(points, exact: bool = True) -> Semimetric:
    """Metric ``|x - y|`` on real points."""
    pts = num.as_vector(points, exact)
    return Semimetric(np.abs(pts[:, None] - pts[None, :]), exact=exact, validate=False)


@dataclass(frozen=True)
class CouplingPlan:
    plan: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def cost(self, ground) -> object:
        g = ground.d if isinstance(ground, Semimetric) else np.asarray(ground)
        return (self.plan * g).sum()

    def is_valid(self, exact: bool = True, tol: float = num.FLOAT_TOL) -> bool:
        if (self.plan < 0).any():
            return False
        rows = self.plan.sum(axis=1)
        cols = self.plan.sum(axis=0)
        return all(num.close(a, b, exact, tol) for a, b in zip(rows, self.row_marginal)) and all(
            num.close(a, b, exact, tol) for a, b in zip(cols, self.col_marginal))


def _check_inputs(alpha, beta, ground, exact, tol):
    if isinstance(ground, Semimetric):
        g = ground.d
    else:
        g = np.asarray(ground)
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    if g.ndim != 2 or g.shape != (len(alpha), len(beta)):
        raise DimensionMismatch(
            f"ground matrix {g.shape} does not match marginals ({len(alpha)}, {len(beta)})")
    for name, v in (("alpha", alpha), ("beta", beta)):
        if len(v) == 0:
            raise DimensionMismatch(f"{name} is empty")
        if any(x < 0 for x in v):
            raise NotNormalized(f"{name} has negative entries")
        if not num.close(v.sum(), num.one(exact), exact, tol):
            raise NotNormalized(f"{name} sums to {v.sum()}, not 1")
    return alpha, beta, g


def _northwest(a: list, b: list):
    m, n = len(a), len(b)
    a, b = list(a), list(b)
    flow = {}
    i = j = 0
    while True:
        x = min(a[i], b[j])
        flow[(i, j)] = x
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1 or a[i] == 0:
            i += 1
        else:
            j += 1
    return flow


def _tree_path(basis, m: int, n: int, i0: int, j0: int):
    """Cells on the unique basis-tree path from row ``i0`` to column ``j0``."""
    # nodes: rows 0..m-1, columns m..m+n-1
    adj: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for (i, j) in basis:
        adj.setdefault(i, []).append((m + j, (i, j)))
        adj.setdefault(m + j, []).append((i, (i, j)))
    start, goal = i0, m + j0
    prev = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            break
        for v, cell in adj.get(u, ()):
            if v not in prev:
                prev[v] = (u, cell)
                queue.append(v)
    path = []
    u = goal
    while prev[u] is not None:
        u, cell = prev[u]
        path.append(cell)
    path.reverse()
    return path


def _potentials(basis, cost, m, n):
    u = [None] * m
    v = [None] * n
    u[0] = 0
    by_row: dict[int, list[int]] = {}
    by_col: dict[int, list[int]] = {}
    for (i, j) in basis:
        by_row.setdefault(i, []).append(j)
        by_col.setdefault(j, []).append(i)
    stack = [("r", 0)]
    while stack:
        kind, k = stack.pop()
        if kind == "r":
            for j in by_row.get(k, ()):
                if v[j] is None:
                    v[j] = cost[k][j] - u[k]
                    stack.append(("c", j))
        else:
            for i in by_col.get(k, ()):
                if u[i] is None:
                    u[i] = cost[i][k] - v[k]
                    stack.append(("r", i))
    return u, v


def _transport_simplex(a: list, b: list, cost: list, tol):
    """Minimise ``sum cost*x`` over plans with margins ``a``, ``b`` (equal totals).

    ``tol`` is 0 for exact (integer) inputs. Returns the flow dictionary.
    """
    m, n = len(a), len(b)
    flow = _northwest(a, b)
    basis = set(flow)
    while True:
        u, v = _potentials(basis, cost, m, n)
        entering = None
        for i in range(m):
            for j in range(n):
                if (i, j) not in basis and cost[i][j] - u[i] - v[j] < -tol:
                    entering = (i, j)
                    break
            if entering is not None:
                break
        if entering is None:
            return {c: x for c, x in flow.items()}
        i0, j0 = entering
        # cycle: entering (+), then the path from column j0 back to row i0
        path = _tree_path(basis, m, n, i0, j0)
        # path runs row i0 -> ... -> column j0; cells alternate -, +, -, ...
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min(c for c in minus if flow[c] == theta)
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[entering] = theta
        del flow[leaving]
        basis.discard(leaving)
        basis.add(entering)


def _scaled_problem(alpha, beta, g):
    """Integer-scaled margins and costs plus the scale factors."""
    da = num.common_denominator(list(alpha) + list(beta))
    dc = num.common_denominator(g.ravel())
    a = [int(x * da) for x in alpha]
    b = [int(x * da) for x in beta]
    cost = [[int(x * dc) for x in row] for row in g]
    return a, b, cost, da, dc


def kantorovich(alpha, beta, ground, *, exact: bool | None = None,
                tol: float = num.FLOAT_TOL):
    """Optimal transport cost between ``alpha`` and ``beta`` over ``ground``.

    ``ground`` may be a :class:`Semimetric` (both measures on one point set)
    or a rectangular cost matrix of shape ``(len(alpha), len(beta))``.

    Returns ``(value, CouplingPlan)``.
    """
    if exact is None:
        g0 = ground.d if isinstance(ground, Semimetric) else np.asarray(ground)
        exact = g0.dtype == object
    alpha = num.convert(np.asarray(alpha), exact)
    beta = num.convert(np.asarray(beta), exact)
    g = ground.d if isinstance(ground, Semimetric) else np.asarray(ground)
    g = num.convert(g, exact)
    alpha, beta, g = _check_inputs(alpha, beta, g, exact, tol)

    rows = [i for i, x in enumerate(alpha) if x != 0]
    cols = [j for j, x in enumerate(beta) if x != 0]
    sub_a = alpha[rows]
    sub_b = beta[cols]
    sub_g = g[np.ix_(rows, cols)]
    plan = np.empty((len(alpha), len(beta)), dtype=object if exact else float)
    plan[:] = num.zero(exact)

    if exact:
        a, b, cost, da, dc = _scaled_problem(sub_a, sub_b, sub_g)
        flow = _transport_simplex(a, b, cost, 0)
        total = sum(cost[i][j] * x for (i, j), x in flow.items())
        value = Fraction(total, da * dc)
        for (i, j), x in flow.items():
            plan[rows[i], cols[j]] = Fraction(x, da)
    else:
        s = float(sub_a.sum())
        a = [float(x) for x in sub_a]
        b = [float(x) * s / float(sub_b.sum()) for x in sub_b]
        cost = [[float(x) for x in row] for row in sub_g]
        flow = _transport_simplex(a, b, cost, 1e-13)
        value = 0.0
        for (i, j), x in flow.items():
            x = max(x, 0.0)
            plan[rows[i], cols[j]] = x
            value += cost[i][j] * x
    return value, CouplingPlan(plan, alpha, beta)


def total_variation(alpha, beta):
    """Half the l1 distance between two probability vectors."""
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    if alpha.shape != beta.shape:
        raise DimensionMismatch(f"lengths differ: {alpha.shape} vs {beta.shape}")
    s = abs(alpha - beta).sum()
    return s / 2 if alpha.dtype == object else float(s) / 2


@lru_cache(maxsize=None)
def _vertex_maps(m: int, n: int) -> np.ndarray:
    """Linear maps from margins to basic solutions, one per spanning tree.

    Every vertex of the m-by-n transportation polytope is the solution
    supported on a spanning tree of the complete bipartite graph K(m, n);
    the solution is an integer (0, +1, -1) combination of the margins.
    Shape: (trees, m*n, m+n).
    """
    cells = [(i, j) for i in range(m) for j in range(n)]
    maps = []
    for tree in combinations(range(len(cells)), m + n - 1):
        parent = list(range(m + n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for c in tree:
            i, j = cells[c]
            ri, rj = find(i), find(m + j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if not ok:
            continue
        # peel leaves; each remaining margin is a vector over (a, b)
        rem = {k: np.eye(m + n, dtype=np.int64)[k] for k in range(m + n)}
        edges = {cells[c] for c in tree}
        mat = np.zeros((m * n, m + n), dtype=np.int64)
        while edges:
            deg: dict[int, int] = {}
            for (i, j) in edges:
                deg[i] = deg.get(i, 0) + 1
                deg[m + j] = deg.get(m + j, 0) + 1
            (i, j) = min(e for e in edges if deg[e[0]] == 1 or deg[m + e[1]] == 1)
            x = rem[i].copy() if deg[i] == 1 else rem[m + j].copy()
            mat[i * n + j] = x
            rem[i] = rem[i] - x
            rem[m + j] = rem[m + j] - x
            edges.discard((i, j))
        maps.append(mat)
    return np.array(maps)


def brute_force_transport(alpha, beta, ground, *, max_support: int = 4,
                          exact: bool | None = None):
    """Transport cost by enumerating every vertex of the transportation polytope.

    Independent of :func:`kantorovich`; intended as a test oracle for
    supports of size at most ``max_support``.
    """
    g = ground.d if isinstance(ground, Semimetric) else np.asarray(ground)
    if exact is None:
        exact = g.dtype == object
    alpha = num.convert(np.asarray(alpha), exact)
    beta = num.convert(np.asarray(beta), exact)
    g = num.convert(g, exact)
    alpha, beta, g = _check_inputs(alpha, beta, g, exact, num.FLOAT_TOL)
    rows = [i for i, x in enumerate(alpha) if x != 0]
    cols = [j for j, x in enumerate(beta) if x != 0]
    if len(rows) > max_support or len(cols) > max_support:
        raise TooLarge(f"support sizes {len(rows)}x{len(cols)} exceed {max_support}")
    m, n = len(rows), len(cols)
    maps = _vertex_maps(m, n)
    sub_g = g[np.ix_(rows, cols)].ravel()
    margins = np.concatenate([alpha[rows], beta[cols]])
    if exact:
        a, b, cost, da, dc = _scaled_problem(alpha[rows], beta[cols], g[np.ix_(rows, cols)])
        if max(a + b) < 2**31:
            flows = maps @ np.array(a + b, dtype=np.int64)
        else:
            flows = maps.astype(object) @ np.array(a + b, dtype=object)
        c = np.array([x for row in cost for x in row], dtype=object)
        feasible = (flows >= 0).all(axis=1)
        best = min((flows[k] * c).sum() for k in np.flatnonzero(feasible))
        return Fraction(int(best), da * dc)
    flows = maps @ margins.astype(float)
    feasible = (flows >= -1e-12).all(axis=1)
    return float((flows[feasible] @ sub_g.astype(float)).min())


def transport_vertices(alpha, beta):
    """All vertices of the transportation polytope with margins ``alpha``, ``beta``.

    Exact (Fraction) inputs only; yields ``len(alpha) x len(beta)`` plans.
    Zero-mass rows and columns stay zero in every plan.
    """
    alpha = num.convert(np.asarray(alpha), True)
    beta = num.convert(np.asarray(beta), True)
    rows = [i for i, x in enumerate(alpha) if x != 0]
    cols = [j for j, x in enumerate(beta) if x != 0]
    if len(rows) > 5 or len(cols) > 5:
        raise TooLarge(f"support sizes {len(rows)}x{len(cols)} too large for vertex enumeration")
    margins = np.concatenate([alpha[rows], beta[cols]])
    den = num.common_denominator(margins)
    scaled = [int(x * den) for x in margins]
    maps = _vertex_maps(len(rows), len(cols))
    if max(scaled) < 2**31:
        flows = maps @ np.array(scaled, dtype=np.int64)
    else:
        flows = maps.astype(object) @ np.array(scaled, dtype=object)
    # distinct feasible flows, in the order their spanning trees are listed
    feasible = flows[(flows >= 0).all(axis=1)]
    _, first = np.unique(feasible, axis=0, return_index=True)
    for idx in sorted(first):
        key = [int(x) for x in feasible[idx]]
        plan = np.empty((len(alpha), len(beta)), dtype=object)
        plan[:] = Fraction(0)
        for c, x in enumerate(key):
            plan[rows[c // len(cols)], cols[c % len(cols)]] = Fraction(x, den)
        yield plan
