"""Iterated transfer of a semimetric along the tail filtration.

Starting from an initial cylinder semimetric on paths, each level replaces
a state by its cotransition law and distances by transport cost between
those laws. The mean pair distance

    I_n = sum_{a, b} mu_n(a) mu_n(b) d_n(a, b)

tends to zero exactly for standard chains. ``tv_refresh`` is a second,
diagnostic semantics: at every level it uses total variation between
cotransition rows, ignoring earlier levels.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _numeric as num
from .errors import (DimensionMismatch, HorizonExceeded, InputError, LevelMissing,
                     WindowTooLarge)
from .model import MarkovModel
from .transport import Semimetric, kantorovich, total_variation

__all__ = [
    "FunctionSpec",
    "InitialMetricSpec",
    "IterationReport",
    "transfer_semimetric",
    "iterate",
    "collapse_initial",
    "decide_standardness",
    "concentration_check",
    "write_series_csv",
    "KANTOROVICH",
    "TV_REFRESH",
    "STANDARD",
    "NONSTANDARD",
    "INCONCLUSIVE",
]

KANTOROVICH = "kantorovich"
TV_REFRESH = "tv_refresh"
SEMANTICS_ALIASES = {
    "kantorovich": KANTOROVICH,
    "tv_refresh": TV_REFRESH,
    "tv-refresh": TV_REFRESH,
    "tv-per-level": TV_REFRESH,
    "tv_per_level": TV_REFRESH,
}

STANDARD = "standard_evidence"
NONSTANDARD = "nonstandard_evidence"
INCONCLUSIVE = "inconclusive"


def resolve_semantics(name: str) -> str:
    try:
        return SEMANTICS_ALIASES[name]
    except KeyError:
        raise InputError(f"unknown semantics {name!r}") from None


@dataclass(frozen=True)
class FunctionSpec:
    """Real function of the first ``depth`` coordinates ``(x_0, ..., x_{depth-1})``.

    Keys of ``table`` are tuples of state labels as written in the model
    description (before pruning).
    """
    depth: int
    table: dict

    def __post_init__(self):
        if self.depth < 1:
            raise InputError("function depth must be at least 1")
        for key in self.table:
            if len(key) != self.depth:
                raise InputError(f"table key {key} does not have length {self.depth}")

    def value(self, labels: tuple):
        try:
            return self.table[labels]
        except KeyError:
            raise InputError(f"function table has no value for cylinder {labels}") from None

    @classmethod
    def coordinate(cls, model: MarkovModel, values=None) -> "FunctionSpec":
        """``f(x) = values[x_0]``; by default the label of ``x_0`` itself."""
        labels = model.labels(0)
        if values is None:
            table = {(a,): num.parse_number(a, model.exact) for a in labels}
        else:
            table = {(a,): num.parse_number(values[a], model.exact) for a in labels}
        return cls(1, table)

    @classmethod
    def from_dict(cls, spec: dict, exact: bool = True) -> "FunctionSpec":
        if "table" not in spec:
            raise InputError("function spec needs a 'table'")
        table = {}
        for key, val in spec["table"].items():
            parts = tuple(int(p) for p in str(key).split(","))
            table[parts] = num.parse_number(val, exact)
        depth = int(spec.get("depth", len(next(iter(table))) if table else 1))
        return cls(depth, table)

    def to_dict(self) -> dict:
        return {"depth": self.depth,
                "table": {",".join(map(str, k)): num.to_json(v) for k, v in sorted(self.table.items())}}


@dataclass(frozen=True)
class InitialMetricSpec:
    """Initial cylinder semimetric on paths.

    kinds: ``discrete_on_level0``; ``weighted_cylinder`` with
    ``rho(x, y) = sum_k weights[k] * [x_k != y_k]`` over the first
    ``len(weights)`` coordinates; ``from_function`` with ``|f(x) - f(y)|``;
    ``level0`` with an explicit semimetric on (retained) level-0 states.
    """
    kind: str = "discrete_on_level0"
    weights: tuple = ()
    function: FunctionSpec | None = None
    level0: Semimetric | None = None

    @property
    def depth(self) -> int:
        if self.kind == "weighted_cylinder":
            return len(self.weights)
        if self.kind == "from_function":
            return self.function.depth
        return 1

    @classmethod
    def discrete(cls) -> "InitialMetricSpec":
        return cls("discrete_on_level0")

    @classmethod
    def cylinder(cls, weights) -> "InitialMetricSpec":
        if not weights or any(w < 0 for w in weights):
            raise InputError("cylinder weights must be nonnegative and nonempty")
        return cls("weighted_cylinder", weights=tuple(weights))

    @classmethod
    def from_function(cls, f: FunctionSpec) -> "InitialMetricSpec":
        return cls("from_function", function=f)

    @classmethod
    def on_level0(cls, d: Semimetric) -> "InitialMetricSpec":
        return cls("level0", level0=d)

    def scaled(self, c) -> "InitialMetricSpec":
        if self.kind == "weighted_cylinder":
            return InitialMetricSpec.cylinder([w * c for w in self.weights])
        if self.kind == "from_function":
            f = self.function
            return InitialMetricSpec.from_function(
                FunctionSpec(f.depth, {k: v * c for k, v in f.table.items()}))
        if self.kind == "level0":
            return InitialMetricSpec.on_level0(self.level0 * c)
        raise InputError("discrete initial metric cannot be scaled; use level0")

    def distance_fn(self, model: MarkovModel) -> Callable[[tuple, tuple], object]:
        """Distance between two cylinders given as tuples of retained indices."""
        exact = model.exact
        m = self.depth
        labels = [model.labels(k) for k in range(m)]

        def lab(t):
            return tuple(labels[k][x] for k, x in enumerate(t))

        if self.kind == "discrete_on_level0":
            one, zero = num.one(exact), num.zero(exact)
            return lambda s, t: zero if s[0] == t[0] else one
        if self.kind == "weighted_cylinder":
            w = [num.parse_number(x, exact) for x in self.weights]
            zero = num.zero(exact)
            return lambda s, t: sum((w[k] for k in range(m) if s[k] != t[k]), zero)
        if self.kind == "from_function":
            f = self.function
            return lambda s, t: abs(num.parse_number(f.value(lab(s)), exact)
                                    - num.parse_number(f.value(lab(t)), exact))
        if self.kind == "level0":
            d = num.convert(self.level0.d, exact)
            if d.shape[0] != model.state_count(0):
                raise DimensionMismatch("level-0 semimetric does not match level 0")
            return lambda s, t: d[s[0], t[0]]
        raise InputError(f"unknown initial metric kind {self.kind!r}")

    def describe(self) -> dict:
        out: dict = {"kind": self.kind, "depth": self.depth}
        if self.weights:
            out["weights"] = [num.to_json(w) for w in self.weights]
        if self.function is not None:
            out["function"] = self.function.to_dict()
        return out


@dataclass
class IterationReport:
    semantics: str
    levels: list[int]
    distances: list[Semimetric]
    functionals: list
    marginals: list[np.ndarray]
    exact: bool
    init: dict = field(default_factory=dict)

    def _index(self, n: int) -> int:
        try:
            return self.levels.index(n)
        except ValueError:
            raise LevelMissing(f"level {n} not in report (levels {self.levels[0]}..{self.levels[-1]})") from None

    def distance(self, n: int) -> Semimetric:
        return self.distances[self._index(n)]

    def functional(self, n: int):
        return self.functionals[self._index(n)]

    def max_pair_distance(self, n: int):
        d = self.distance(n).d
        return d.max() if d.size else num.zero(self.exact)


def transfer_semimetric(d_prev: Semimetric, Q: np.ndarray, *, workers: int | None = None) -> Semimetric:
    """``d_n(a, b) = K(Q[a], Q[b])`` over the ground ``d_prev``."""
    if Q.shape[1] != d_prev.size:
        raise DimensionMismatch(f"kernel has {Q.shape[1]} columns, semimetric has {d_prev.size} points")
    exact = d_prev.exact
    k = Q.shape[0]
    out = np.empty((k, k), dtype=object if exact else float)
    out[:] = num.zero(exact)
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]

    def one(pair):
        a, b = pair
        if all(x == y for x, y in zip(Q[a], Q[b])):
            return num.zero(exact)
        return kantorovich(Q[a], Q[b], d_prev, exact=exact)[0]

    if workers and workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    for (a, b), v in zip(pairs, values):
        out[a, b] = out[b, a] = v
    return Semimetric(out, exact=exact, validate=False)


def _tuples(model: MarkovModel, m: int) -> list[list[tuple]]:
    """Positive-probability cylinders ``(x_j, ..., x_{m-1})`` for j = 0..m-1."""
    out: list[list[tuple]] = [[] for _ in range(m)]
    out[m - 1] = [(a,) for a in range(model.state_count(m - 1))]
    for j in range(m - 1, 0, -1):
        q = model.cotransition(j)
        out[j - 1] = [(c,) + t for t in out[j] for c in range(q.shape[1]) if q[t[0], c] != 0]
    return out


def collapse_initial(model: MarkovModel, init: InitialMetricSpec) -> Semimetric:
    """Semimetric on level-(depth-1) states obtained from a cylinder semimetric.

    The coordinates below level ``depth - 1`` are integrated out one level
    at a time by the same transport step used for the iteration.
    """
    m = init.depth
    if m - 1 > model.horizon:
        raise HorizonExceeded(f"initial metric depth {m} exceeds horizon {model.horizon}")
    exact = model.exact
    rho = init.distance_fn(model)
    tuples = _tuples(model, m)
    cur = tuples[0]
    dist = np.empty((len(cur), len(cur)), dtype=object if exact else float)
    for i, s in enumerate(cur):
        for j, t in enumerate(cur):
            dist[i, j] = rho(s, t)
    for j in range(1, m):
        q = model.cotransition(j)
        index = {t: i for i, t in enumerate(cur)}
        nxt = tuples[j]
        new = np.empty((len(nxt), len(nxt)), dtype=dist.dtype)
        new[:] = num.zero(exact)
        for a, s in enumerate(nxt):
            cs = [c for c in range(q.shape[1]) if q[s[0], c] != 0]
            for b in range(a + 1, len(nxt)):
                t = nxt[b]
                ct = [c for c in range(q.shape[1]) if q[t[0], c] != 0]
                ground = dist[np.ix_([index[(c,) + s] for c in cs], [index[(c,) + t] for c in ct])]
                v = kantorovich(q[s[0], cs], q[t[0], ct], ground, exact=exact)[0]
                new[a, b] = new[b, a] = v
        dist, cur = new, nxt
    return Semimetric(dist, exact=exact, validate=False)


def _functional(d: Semimetric, mu: np.ndarray):
    return mu @ d.d @ mu


def iterate(model: MarkovModel, init: InitialMetricSpec | None = None, N: int | None = None,
            semantics: str = KANTOROVICH, *, workers: int | None = None) -> IterationReport:
    """Semimetrics ``d_n`` and functionals ``I_n``.

    Kantorovich semantics reports levels ``depth..N``: a depth-m cylinder
    semimetric is collapsed to level m first. ``tv_refresh`` reports
    levels ``1..N``.
    """
    init = InitialMetricSpec.discrete() if init is None else init
    semantics = resolve_semantics(semantics)
    N = model.horizon if N is None else N
    if N > model.horizon:
        raise HorizonExceeded(f"N={N} exceeds horizon {model.horizon}")
    levels, dists, funcs, margs = [], [], [], []
    if semantics == KANTOROVICH:
        m = init.depth
        if m > N:
            raise HorizonExceeded(f"initial metric depth {m} exceeds N={N}")
        d = collapse_initial(model, init)
        for n in range(m, N + 1):
            d = transfer_semimetric(d, model.cotransition(n), workers=workers)
            levels.append(n)
            dists.append(d)
    else:
        for n in range(1, N + 1):
            q = model.cotransition(n)
            k = q.shape[0]
            out = np.empty((k, k), dtype=object if model.exact else float)
            out[:] = num.zero(model.exact)
            for a in range(k):
                for b in range(a + 1, k):
                    out[a, b] = out[b, a] = total_variation(q[a], q[b])
            levels.append(n)
            dists.append(Semimetric(out, exact=model.exact, validate=False))
    for n, d in zip(levels, dists):
        mu = model.marginal(n)
        margs.append(mu)
        funcs.append(_functional(d, mu))
    return IterationReport(semantics, levels, dists, funcs, margs, model.exact,
                           init=init.describe() if semantics == KANTOROVICH else {})


def decide_standardness(report: IterationReport, tol: float = 1e-6, window: int = 5) -> str:
    """Evidence at a finite horizon; never a statement about the limit."""
    if window < 1:
        raise WindowTooLarge("window must contain at least one level")
    if window > len(report.functionals):
        raise WindowTooLarge(f"window {window} exceeds the {len(report.functionals)} reported levels")
    tail = report.functionals[-window:]
    if all(x < tol for x in tail) and all(b <= a for a, b in zip(tail, tail[1:])):
        return STANDARD
    if all(x > tol for x in tail) and all(abs(b - a) < tol for a, b in zip(tail, tail[1:])):
        return NONSTANDARD
    return INCONCLUSIVE


def concentration_check(model: MarkovModel, report: IterationReport, n: int, eps) -> dict:
    """Heaviest open ``eps``-ball of level-n states under ``d_n``."""
    d = report.distance(n).d
    mu = model.marginal(n)
    best_v, best_mass = None, None
    for v in range(d.shape[0]):
        mass = sum((mu[u] for u in range(d.shape[0]) if d[v, u] < eps), num.zero(model.exact))
        if best_mass is None or mass > best_mass:
            best_v, best_mass = v, mass
    return {
        "level": n,
        "vertex": best_v,
        "label": model.labels(n)[best_v],
        "ball_mass": best_mass,
        "satisfied": bool(best_mass >= 1 - eps),
    }


CSV_COLUMNS = ["n", "I_n", "max_pair_distance", "semantics", "decision"]


def write_series_csv(reports: list[tuple[IterationReport, str]], out=None) -> str:
    """CSV rows ``n, I_n, max_pair_distance, semantics, decision``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep, decision in reports:
        for n, val in zip(rep.levels, rep.functionals):
            w.writerow([n, num.fmt(val), num.fmt(rep.max_pair_distance(n)), rep.semantics, decision])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
