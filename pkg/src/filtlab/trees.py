"""Equipped trees of partition elements and couplings between them.

The element of the level-n partition containing a path with ``x_n = a`` is
the set of histories ``(x_0, ..., x_{n-1})`` leading to ``a``. Its
hierarchy of earlier partitions makes it a tree of height n whose children
at each node carry cotransition masses. Since a subtree depends only on
its root state, trees from a model are shared DAGs memoized on
``(level, state)``.

Three classes of couplings between two trees are supported:

``markov_recursive``
    at each matched node pair, any coupling of the children laws;
    recursion by dynamic programming over node pairs.
``automorphism_orbit``
    uniform trees only; couplings are tree isomorphisms, so the
    distance is the minimum over the automorphism orbit.
``iso_mixture``
    children may only be matched with children of equal mass and
    isomorphic subtree; infeasible pairs raise :class:`NoCoupling`.
"""
from __future__ import annotations

import hashlib
import math
import threading
import warnings
from fractions import Fraction
from itertools import permutations

import numpy as np

from . import _numeric as num
from .errors import (HeightMismatch, LevelTooSmall, NoCoupling, SemanticsNotApplicable,
                     TooLarge, ZeroMassState)
from .iteration import FunctionSpec, InitialMetricSpec
from .model import MarkovModel
from .transport import Semimetric, kantorovich, transport_vertices

__all__ = [
    "EquippedTree",
    "LeafValuation",
    "FunctionValuation",
    "build_tree",
    "canonical_form",
    "coupling_distance",
    "criterion_check",
    "criterion_report",
    "quotient_criterion",
    "martingale_distance",
    "brute_force_coupling_oracle",
    "isomorphisms",
    "applicable_semantics",
    "MARKOV",
    "ORBIT",
    "ISO",
    "SEMANTICS",
]

MARKOV = "markov_recursive"
ORBIT = "automorphism_orbit"
ISO = "iso_mixture"
SEMANTICS = (MARKOV, ORBIT, ISO)
_ALIASES = {
    "markov": MARKOV, "markov_recursive": MARKOV, "markov-recursive": MARKOV,
    "orbit": ORBIT, "automorphism_orbit": ORBIT, "automorphism-orbit": ORBIT,
    "iso": ISO, "iso_mixture": ISO, "iso-mixture": ISO, "iso-mix": ISO,
}

FLOAT_GRID = 10**12
_lock = threading.Lock()


def resolve_semantics(name: str) -> str:
    try:
        return _ALIASES[name]
    except KeyError:
        raise SemanticsNotApplicable(f"unknown tree coupling semantics {name!r}") from None


class EquippedTree:
    """Node of an equipped tree; ``children`` is a tuple of ``(mass, EquippedTree)``.

    Leaves have no children. ``level`` counts down to 0 at the leaves and
    ``state`` is the model state (retained index) of the node.
    """

    __slots__ = ("level", "state", "children", "_canon", "_leaves", "_uniform", "__weakref__")

    def __init__(self, level: int, state: int, children=()):
        self.level = level
        self.state = state
        self.children = tuple(children)
        self._canon = None
        self._leaves = None
        self._uniform = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def height(self) -> int:
        return 0 if self.is_leaf else 1 + self.children[0][1].height

    @property
    def leaf_count(self) -> int:
        if self._leaves is None:
            self._leaves = 1 if self.is_leaf else sum(c.leaf_count for _, c in self.children)
        return self._leaves

    @property
    def is_uniform(self) -> bool:
        if self._uniform is None:
            masses = [m for m, _ in self.children]
            self._uniform = all(m == masses[0] for m in masses) and all(
                c.is_uniform for _, c in self.children)
        return self._uniform

    @property
    def canonical(self) -> str:
        if self._canon is None:
            self._canon = canonical_form(self)
        return self._canon

    @classmethod
    def uniform(cls, branching: int, height: int, exact: bool = True) -> "EquippedTree":
        """Homogeneous tree; leaves get states ``0..branching**height - 1`` left to right."""
        mass = Fraction(1, branching) if exact else 1.0 / branching
        counter = iter(range(branching**height))

        def make(h):
            if h == 0:
                return cls(0, next(counter))
            return cls(h, 0, [(mass, make(h - 1)) for _ in range(branching)])

        return make(height)

    @classmethod
    def from_nested(cls, spec, exact: bool = True) -> "EquippedTree":
        """Tree from nested ``[(mass, subtree), ...]`` lists; ``None`` is a leaf."""
        counter = iter(range(10**9))

        def make(s):
            if s is None:
                return cls(0, next(counter))
            kids = [(num.parse_number(m, exact), make(c)) for m, c in s]
            level = 1 + kids[0][1].level
            return cls(level, 0, kids)

        return make(spec)

    def leaves(self):
        """Leaf nodes in depth-first order."""
        if self.is_leaf:
            yield self
            return
        for _, c in self.children:
            yield from c.leaves()

    def __repr__(self) -> str:
        return f"EquippedTree(level={self.level}, state={self.state}, children={len(self.children)})"


def _mass_token(m) -> str:
    if isinstance(m, Fraction):
        return str(m)
    return str(round(float(m) * FLOAT_GRID))


def canonical_form(tree: EquippedTree) -> str:
    """Digest identifying the tree up to measure-preserving relabelling of children.

    Children are sorted by ``(mass, child form)``; float masses are rounded
    to a 1e-12 grid first.
    """
    if tree._canon is not None:
        return tree._canon
    if tree.is_leaf:
        tree._canon = hashlib.sha256(b"leaf").hexdigest()
        return tree._canon
    if tree.children and not isinstance(tree.children[0][0], Fraction):
        warnings.warn("canonical form of float masses uses a 1e-12 grid", stacklevel=2)
    parts = sorted((_mass_token(m), canonical_form(c)) for m, c in tree.children)
    h = hashlib.sha256(repr(parts).encode()).hexdigest()
    tree._canon = h
    return h


def build_tree(model: MarkovModel, n: int, a: int) -> EquippedTree:
    """Equipped tree of the level-n element with ``x_n = a`` (retained index)."""
    if not 0 <= a < model.state_count(n):
        raise ZeroMassState(f"state {a} is not in the support of level {n}")
    memo = model.trees
    key = (n, a)
    got = memo.get(key)
    if got is not None:
        return got
    if n == 0:
        node = EquippedTree(0, a)
    else:
        q = model.cotransition(n)
        node = EquippedTree(n, a, [(q[a, c], build_tree(model, n - 1, c))
                                   for c in range(q.shape[1]) if q[a, c] != 0])
    with _lock:
        return memo.setdefault(key, node)


# -- valuations -------------------------------------------------------------

class LeafValuation:
    """Explicit leaf values in depth-first order."""

    __slots__ = ("values",)

    def __init__(self, values):
        self.values = tuple(values)

    @property
    def key(self):
        return self.values

    def descend(self, node: EquippedTree, i: int) -> "LeafValuation":
        start = sum(c.leaf_count for _, c in node.children[:i])
        return LeafValuation(self.values[start:start + node.children[i][1].leaf_count])

    def label(self, leaf: EquippedTree):
        return self.values[0]


class FunctionValuation:
    """Leaf values ``f(x_0, ..., x_{m-1})`` read along the path to the leaf.

    ``suffix`` holds the states strictly above the current node up to level
    ``m - 1``; with ``labels`` the retained indices are mapped back to the
    labels used in the function table. ``metric`` switches the leaf label to
    the raw cylinder tuple (for costs given by an initial semimetric).
    """

    __slots__ = ("depth", "table", "labels", "suffix", "metric")

    def __init__(self, depth: int, table, labels, suffix=(), metric: bool = False):
        self.depth = depth
        self.table = table
        self.labels = labels
        self.suffix = tuple(suffix)
        self.metric = metric

    @classmethod
    def of(cls, model: MarkovModel, f: FunctionSpec) -> "FunctionValuation":
        labels = [model.labels(k) for k in range(min(f.depth, model.horizon + 1))]
        return cls(f.depth, f, labels)

    @property
    def key(self):
        return self.suffix

    def descend(self, node: EquippedTree, i: int) -> "FunctionValuation":
        if node.level - 1 < self.depth - 1:
            suffix = ((node.state,) + self.suffix)[: self.depth - 1]
        else:
            suffix = ()
        return FunctionValuation(self.depth, self.table, self.labels, suffix, self.metric)

    def label(self, leaf: EquippedTree):
        path = (leaf.state,) + self.suffix
        if self.metric:
            return path
        return self.table.value(tuple(self.labels[k][x] for k, x in enumerate(path)))


def _abs_cost(x, y):
    return abs(x - y)


# -- dynamic programs -------------------------------------------------------

def _check_heights(t1: EquippedTree, t2: EquippedTree) -> None:
    if t1.height != t2.height:
        raise HeightMismatch(f"tree heights differ: {t1.height} vs {t2.height}")


def _markov(t1, v1, t2, v2, cost, memo, exact):
    key = (t1, v1.key, t2, v2.key)
    got = memo.get(key)
    if got is not None:
        return got
    if t1.is_leaf or t2.is_leaf:
        if not (t1.is_leaf and t2.is_leaf):
            raise HeightMismatch("trees have leaves at different depths")
        val = cost(v1.label(t1), v2.label(t2))
    else:
        k1, k2 = len(t1.children), len(t2.children)
        ground = np.empty((k1, k2), dtype=object if exact else float)
        for i in range(k1):
            c1 = v1.descend(t1, i)
            for j in range(k2):
                ground[i, j] = _markov(t1.children[i][1], c1, t2.children[j][1],
                                       v2.descend(t2, j), cost, memo, exact)
        a = np.array([m for m, _ in t1.children], dtype=object if exact else float)
        b = np.array([m for m, _ in t2.children], dtype=object if exact else float)
        val = kantorovich(a, b, ground, exact=exact)[0]
    memo[key] = val
    return val


def _orbit(t1, v1, t2, v2, cost, memo, exact):
    key = (t1, v1.key, t2, v2.key)
    got = memo.get(key)
    if got is not None:
        return got
    if t1.is_leaf or t2.is_leaf:
        if not (t1.is_leaf and t2.is_leaf):
            raise HeightMismatch("trees have leaves at different depths")
        val = cost(v1.label(t1), v2.label(t2))
    elif len(t1.children) != len(t2.children):
        val = math.inf
    else:
        k = len(t1.children)
        if k > 8:
            raise TooLarge(f"{k} children: permutation search limited to 8")
        sub = [[_orbit(t1.children[i][1], v1.descend(t1, i), t2.children[j][1],
                       v2.descend(t2, j), cost, memo, exact) for j in range(k)] for i in range(k)]
        val = math.inf
        for perm in permutations(range(k)):
            parts = [sub[i][perm[i]] for i in range(k)]
            if any(p == math.inf for p in parts):
                continue
            s = sum(parts, num.zero(exact))
            s = s / k
            if val == math.inf or s < val:
                val = s
    memo[key] = val
    return val


def _iso(t1, v1, t2, v2, cost, memo, exact):
    key = (t1, v1.key, t2, v2.key)
    got = memo.get(key)
    if got is not None:
        return got
    if t1.is_leaf or t2.is_leaf:
        if not (t1.is_leaf and t2.is_leaf):
            raise HeightMismatch("trees have leaves at different depths")
        val = cost(v1.label(t1), v2.label(t2))
        memo[key] = val
        return val
    if t1.canonical != t2.canonical:
        memo[key] = math.inf
        return math.inf
    classes: dict = {}
    for side, t in ((0, t1), (1, t2)):
        for i, (m, c) in enumerate(t.children):
            classes.setdefault((_mass_token(m), c.canonical), ([], []))[side].append(i)
    val = num.zero(exact)
    for (_, _), (left, right) in sorted(classes.items()):
        ma = np.array([t1.children[i][0] for i in left], dtype=object if exact else float)
        mb = np.array([t2.children[j][0] for j in right], dtype=object if exact else float)
        total = ma.sum()
        ground = np.empty((len(left), len(right)), dtype=object if exact else float)
        for x, i in enumerate(left):
            c1 = v1.descend(t1, i)
            for y, j in enumerate(right):
                ground[x, y] = _iso(t1.children[i][1], c1, t2.children[j][1],
                                    v2.descend(t2, j), cost, memo, exact)
        val = val + total * kantorovich(ma / total, mb / total, ground, exact=exact)[0]
    memo[key] = val
    return val


_DP = {MARKOV: _markov, ORBIT: _orbit, ISO: _iso}


def _exact_of(t: EquippedTree) -> bool:
    node = t
    while not node.is_leaf:
        if not isinstance(node.children[0][0], Fraction):
            return False
        node = node.children[0][1]
    return True


def coupling_distance(t1: EquippedTree, t2: EquippedTree, f1, f2=None, semantics: str = MARKOV,
                      *, cost=None, memo: dict | None = None):
    """Smallest expected leaf discrepancy over couplings of the given class.

    ``f1``/``f2`` are :class:`LeafValuation` or :class:`FunctionValuation`
    objects (``f2`` defaults to ``f1``). ``cost`` compares two leaf labels
    and defaults to ``|x - y|``.
    """
    semantics = resolve_semantics(semantics)
    f2 = f1 if f2 is None else f2
    _check_heights(t1, t2)
    if semantics == ORBIT and not (t1.is_uniform and t2.is_uniform):
        raise SemanticsNotApplicable("automorphism_orbit needs uniform child masses at every node")
    exact = _exact_of(t1) and _exact_of(t2)
    memo = {} if memo is None else memo
    val = _DP[semantics](t1, f1, t2, f2, cost or _abs_cost, memo, exact)
    if val == math.inf:
        raise NoCoupling(f"no {semantics} coupling between the two trees")
    return val


# -- criterion --------------------------------------------------------------

def _pairs_report(model, n, f, eps, semantics, valuation_of=None, cost=None):
    k = model.state_count(n)
    mu = model.marginal(n)
    trees = [build_tree(model, n, a) for a in range(k)]
    val = FunctionValuation.of(model, f) if valuation_of is None else valuation_of
    dist = [[None] * k for _ in range(k)]
    memo: dict = {}
    no_coupling = []
    below = num.zero(model.exact)
    for a in range(k):
        for b in range(a, k):
            try:
                d = coupling_distance(trees[a], trees[b], val, val, semantics, cost=cost, memo=memo)
            except NoCoupling:
                d = None
                no_coupling.append((a, b))
            dist[a][b] = dist[b][a] = d
    for a in range(k):
        for b in range(k):
            d = dist[a][b]
            if d is not None and d < eps:
                below = below + mu[a] * mu[b]
    return dist, no_coupling, below


def criterion_check(model: MarkovModel, f: FunctionSpec, eps, n: int, semantics: str = MARKOV) -> dict:
    """Mass of level-n pairs whose trees couple within ``eps``; satisfied iff it exceeds ``1 - eps``."""
    semantics = resolve_semantics(semantics)
    if n < f.depth:
        raise LevelTooSmall(f"level {n} is below the function depth {f.depth}")
    model._check(n)
    if semantics == ORBIT:
        for a in range(model.state_count(n)):
            if not build_tree(model, n, a).is_uniform:
                raise SemanticsNotApplicable("automorphism_orbit needs a homogeneous model")
    dist, no_coupling, below = _pairs_report(model, n, f, eps, semantics)
    return {
        "level": n,
        "semantics": semantics,
        "eps": eps,
        "pair_mass_below_eps": below,
        "satisfied": bool(below > 1 - eps),
        "distances": dist,
        "no_coupling": no_coupling,
    }


def applicable_semantics(model: MarkovModel, n: int) -> list[str]:
    out = [MARKOV]
    if all(build_tree(model, n, a).is_uniform for a in range(model.state_count(n))):
        out.append(ORBIT)
    out.append(ISO)
    return out


def criterion_report(model: MarkovModel, f: FunctionSpec, eps, n: int) -> dict:
    """``criterion_check`` under every applicable coupling class."""
    return {s: criterion_check(model, f, eps, n, s) for s in applicable_semantics(model, n)}


def quotient_criterion(model: MarkovModel, f: FunctionSpec, eps, n: int, k: int,
                       semantics: str = MARKOV) -> dict:
    """Criterion for the quotient filtration: chain re-based at level ``k``, checked at ``n``.

    ``f`` is read on the coordinates of the re-based chain.
    """
    if not 0 <= k < n:
        raise LevelTooSmall(f"need 0 <= k < n, got k={k}, n={n}")
    if k == 0:
        return criterion_check(model, f, eps, n, semantics)
    out = criterion_check(model.rebase(k), f, eps, n - k, semantics)
    out["level"] = n
    out["quotient_base"] = k
    return out


def martingale_distance(model: MarkovModel, n: int, rho: InitialMetricSpec | None = None) -> dict:
    """``r_n(x, y)`` over level-(n+1) states and its mean under ``mu_{n+1}``.

    ``r_n`` is the best Markov coupling of the laws of ``(x_0, ..., x_n)``
    given ``x_{n+1}``, costed by ``rho`` on the first coordinates.
    """
    rho = InitialMetricSpec.discrete() if rho is None else rho
    model._check(n + 1)
    m = rho.depth
    if n + 1 < m - 1:
        raise LevelTooSmall(f"initial metric depth {m} needs level >= {m - 1}")
    dist_fn = rho.distance_fn(model)
    valuation = FunctionValuation(m, None, None, metric=True)
    k = model.state_count(n + 1)
    trees = [build_tree(model, n + 1, a) for a in range(k)]
    memo: dict = {}
    out = np.empty((k, k), dtype=object if model.exact else float)
    for a in range(k):
        for b in range(a, k):
            v = coupling_distance(trees[a], trees[b], valuation, valuation, MARKOV,
                                  cost=dist_fn, memo=memo)
            out[a, b] = out[b, a] = v
    mu = model.marginal(n + 1)
    r = Semimetric(out, exact=model.exact, validate=False)
    return {"level": n + 1, "r": r, "integral": mu @ out @ mu}


# -- oracle -----------------------------------------------------------------

def _leaf_table(t: EquippedTree, v, exact):
    """``[(mass, label), ...]`` for every leaf in depth-first order."""
    if t.is_leaf:
        return [(num.one(exact), v.label(t))]
    out = []
    for i, (m, c) in enumerate(t.children):
        out.extend((m * w, lab) for w, lab in _leaf_table(c, v.descend(t, i), exact))
    return out


def isomorphisms(t1: EquippedTree, t2: EquippedTree):
    """Every structure- and mass-preserving bijection of leaves, as index lists."""
    if t1.is_leaf and t2.is_leaf:
        yield [0]
        return
    if t1.is_leaf or t2.is_leaf or len(t1.children) != len(t2.children):
        return
    k = len(t1.children)
    off2 = [0]
    for _, c in t2.children:
        off2.append(off2[-1] + c.leaf_count)
    for perm in permutations(range(k)):
        if any(t1.children[i][0] != t2.children[perm[i]][0]
               or t1.children[i][1].canonical != t2.children[perm[i]][1].canonical
               for i in range(k)):
            continue

        def combine(i):
            if i == k:
                yield []
                return
            sub = list(isomorphisms(t1.children[i][1], t2.children[perm[i]][1]))
            for rest in combine(i + 1):
                for s in sub:
                    yield [off2[perm[i]] + x for x in s] + rest

        yield from combine(0)


def _brute_markov(t1, v1, t2, v2, cost, exact, restrict):
    if t1.is_leaf and t2.is_leaf:
        return cost(v1.label(t1), v2.label(t2))
    if t1.is_leaf or t2.is_leaf:
        raise HeightMismatch("trees have leaves at different depths")
    k1, k2 = len(t1.children), len(t2.children)
    sub = {}
    for i in range(k1):
        for j in range(k2):
            c1, c2 = t1.children[i], t2.children[j]
            if restrict and (c1[0] != c2[0] or c1[1].canonical != c2[1].canonical):
                continue
            sub[i, j] = _brute_markov(c1[1], v1.descend(t1, i), c2[1], v2.descend(t2, j),
                                      cost, exact, restrict)
    a = [m for m, _ in t1.children]
    b = [m for m, _ in t2.children]
    best = math.inf
    for plan in transport_vertices(a, b):
        support = [(i, j) for i in range(k1) for j in range(k2) if plan[i, j] != 0]
        if any(c not in sub or sub[c] == math.inf for c in support):
            continue
        val = sum((plan[c] * sub[c] for c in support), Fraction(0))
        best = min(best, val)
    return best


def brute_force_coupling_oracle(t1: EquippedTree, t2: EquippedTree, f1, f2=None,
                                semantics: str = MARKOV, *, cost=None, max_leaves: int = 16):
    """Exhaustive minimum for small trees; exact masses required.

    ``markov_recursive`` and ``iso_mixture`` enumerate every vertex plan at
    every node pair (no memoization); ``automorphism_orbit`` enumerates
    every tree isomorphism.
    """
    semantics = resolve_semantics(semantics)
    f2 = f1 if f2 is None else f2
    cost = cost or _abs_cost
    if t1.leaf_count + t2.leaf_count > max_leaves:
        raise TooLarge(f"{t1.leaf_count + t2.leaf_count} leaves exceed {max_leaves}")
    _check_heights(t1, t2)
    if not (_exact_of(t1) and _exact_of(t2)):
        raise TooLarge("oracle needs exact masses")
    if semantics == ORBIT:
        if not (t1.is_uniform and t2.is_uniform):
            raise SemanticsNotApplicable("automorphism_orbit needs uniform trees")
        l1 = _leaf_table(t1, f1, True)
        l2 = _leaf_table(t2, f2, True)
        best = math.inf
        for phi in isomorphisms(t1, t2):
            val = sum((w * cost(lab, l2[phi[i]][1]) for i, (w, lab) in enumerate(l1)), Fraction(0))
            best = min(best, val)
    else:
        if semantics == ISO and t1.canonical != t2.canonical:
            best = math.inf
        else:
            best = _brute_markov(t1, f1, t2, f2, cost, True, semantics == ISO)
    if best == math.inf:
        raise NoCoupling(f"no {semantics} coupling between the two trees")
    return best
