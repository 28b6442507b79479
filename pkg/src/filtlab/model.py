"""Finite-state, time-inhomogeneous Markov chains and Bratteli diagrams.

A :class:`MarkovModel` stores forward kernels ``P_n`` (level ``n`` to level
``n + 1``) and the level-0 law. Everything conditional (level marginals,
cotransition kernels) is derived from those. States of zero mass are pruned
when a level is first materialised; ``labels(n)`` maps retained indices back
to the states of the input description.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from pathlib import Path

import numpy as np

from . import _numeric as num
from .errors import (BadSchedule, EmptyLevel, HorizonExceeded, InputError,
                     NonStochasticRow, ShapeMismatch, ZeroMassState)
from .transport import total_variation

__all__ = [
    "MarkovModel",
    "LevelMeasure",
    "CotransitionKernel",
    "build_model",
    "load_model",
    "level_marginal",
    "cotransitions",
    "telescope",
    "ergodicity_diagnostic",
    "bernoulli",
    "symmetric",
    "stationary",
    "pascal",
]

DEFAULT_STATIONARY_HORIZON = 32


@dataclass(frozen=True)
class LevelMeasure:
    level: int
    weights: np.ndarray


@dataclass(frozen=True)
class CotransitionKernel:
    """``rows[a, c]``: probability of level-(n-1) state ``c`` given level-n state ``a``."""
    level: int
    rows: np.ndarray


def _validate_stochastic(mat: np.ndarray, exact: bool, where: str) -> None:
    if mat.ndim != 2 or mat.shape[0] == 0 or mat.shape[1] == 0:
        raise EmptyLevel(f"{where}: empty kernel")
    for i, row in enumerate(mat):
        if any(x < 0 for x in row):
            raise NonStochasticRow(f"{where}: row {i} has a negative entry")
        if not num.close(row.sum(), num.one(exact), exact):
            raise NonStochasticRow(f"{where}: row {i} sums to {row.sum()}")


def _validate_vector(vec: np.ndarray, exact: bool, where: str) -> None:
    if len(vec) == 0:
        raise EmptyLevel(f"{where}: empty")
    if any(x < 0 for x in vec) or not num.close(vec.sum(), num.one(exact), exact):
        raise NonStochasticRow(f"{where}: not a probability vector")


class MarkovModel:
    """Immutable chain ``y_0, y_1, ...`` with finite state sets.

    ``kind`` is ``"explicit"``, ``"stationary"`` or ``"bratteli"``. For
    stationary models only one matrix is stored and levels are unrolled on
    demand; the per-level caches are guarded so concurrent first access
    computes each level once.
    """

    def __init__(self, kind: str, initial, *, kernels=None, matrix=None,
                 horizon: int | None = None, exact: bool = True, meta: dict | None = None):
        self.kind = kind
        self.exact = exact
        self.meta = dict(meta or {})
        self._raw_initial = initial
        if kind == "stationary":
            if matrix is None:
                raise InputError("stationary model needs a matrix")
            if matrix.shape[0] != matrix.shape[1]:
                raise ShapeMismatch(f"stationary matrix must be square, got {matrix.shape}")
            _validate_stochastic(matrix, exact, "matrix")
            self._matrix = matrix
            self._raw_kernels = None
            self.horizon = DEFAULT_STATIONARY_HORIZON if horizon is None else int(horizon)
            if len(initial) != matrix.shape[0]:
                raise ShapeMismatch("initial length does not match the matrix")
        else:
            kernels = list(kernels or [])
            self._matrix = None
            self._raw_kernels = kernels
            self.horizon = len(kernels) if horizon is None else int(horizon)
            if self.horizon > len(kernels):
                raise HorizonExceeded(f"horizon {self.horizon} exceeds {len(kernels)} kernels")
            width = len(initial)
            for n, k in enumerate(kernels):
                if k.shape[0] != width:
                    raise ShapeMismatch(
                        f"kernel {n} has {k.shape[0]} rows, level {n} has {width} states")
                _validate_stochastic(k, exact, f"kernel {n}")
                width = k.shape[1]
        if self.horizon < 0:
            raise InputError("horizon must be nonnegative")
        _validate_vector(initial, exact, "initial")

        self._lock = threading.RLock()
        keep = [i for i, x in enumerate(initial) if x != 0]
        self._labels: list[list[int]] = [keep]
        self._marginals: list[np.ndarray] = [initial[keep]]
        self._kernels: list[np.ndarray] = []
        self._cotrans: dict[int, CotransitionKernel] = {}
        self.trees: dict = {}

    # -- raw access -------------------------------------------------------
    def _raw_kernel(self, n: int) -> np.ndarray:
        return self._matrix if self._matrix is not None else self._raw_kernels[n]

    def _check(self, n: int) -> None:
        if n < 0 or n > self.horizon:
            raise HorizonExceeded(f"level {n} outside 0..{self.horizon}")

    def _materialise(self, n: int) -> None:
        self._check(n)
        if len(self._marginals) > n:
            return
        with self._lock:
            while len(self._marginals) <= n:
                k = len(self._marginals) - 1
                rows = self._labels[k]
                raw = self._raw_kernel(k)[rows]
                mu = self._marginals[k]
                nxt = mu @ raw
                keep = [j for j, x in enumerate(nxt) if x != 0]
                if not keep:
                    raise EmptyLevel(f"level {k + 1} has no mass")
                self._kernels.append(raw[:, keep])
                self._labels.append(keep)
                self._marginals.append(nxt[keep])

    # -- public -----------------------------------------------------------
    def state_count(self, n: int) -> int:
        self._materialise(n)
        return len(self._labels[n])

    def labels(self, n: int) -> list[int]:
        """Original indices of the states retained at level ``n``."""
        self._materialise(n)
        return list(self._labels[n])

    def marginal(self, n: int) -> np.ndarray:
        self._materialise(n)
        return self._marginals[n]

    def kernel(self, n: int) -> np.ndarray:
        """Forward kernel from level ``n`` to level ``n + 1`` on retained states."""
        self._materialise(n + 1)
        return self._kernels[n]

    def cotransition(self, n: int) -> np.ndarray:
        if n < 1:
            raise ZeroMassState("cotransitions need n >= 1 (level 0 has no predecessor)")
        self._materialise(n)
        got = self._cotrans.get(n)
        if got is None:
            mu_prev = self._marginals[n - 1]
            mu = self._marginals[n]
            joint = mu_prev[:, None] * self._kernels[n - 1]
            rows = (joint / mu[None, :]).T
            if not self.exact:
                rows = rows.astype(float)
            got = CotransitionKernel(n, rows)
            with self._lock:
                self._cotrans.setdefault(n, got)
                got = self._cotrans[n]
        return got.rows

    def initial(self) -> np.ndarray:
        return self.marginal(0)

    def with_horizon(self, horizon: int) -> "MarkovModel":
        if self.kind != "stationary":
            raise HorizonExceeded("only stationary models extend their horizon")
        return MarkovModel("stationary", self._raw_initial, matrix=self._matrix,
                           horizon=horizon, exact=self.exact, meta=self.meta)

    def to_explicit(self, horizon: int | None = None) -> "MarkovModel":
        """Explicit model on retained states (labels are renumbered)."""
        horizon = self.horizon if horizon is None else horizon
        kernels = [self.kernel(n) for n in range(horizon)]
        return MarkovModel("explicit", self.initial(), kernels=kernels,
                           exact=self.exact, meta=self.meta)

    def _full_marginal(self, n: int) -> np.ndarray:
        """Level-n law on all input states, zero on pruned ones."""
        mu = self.marginal(n)
        width = len(self._raw_initial) if n == 0 else self._raw_kernel(n - 1).shape[1]
        full = np.empty(width, dtype=mu.dtype)
        full[:] = num.zero(self.exact)
        full[self._labels[n]] = mu
        return full

    def rebase(self, k: int) -> "MarkovModel":
        """Model of the chain started at level ``k`` (levels shifted down by ``k``).

        State labels of the input description are preserved.
        """
        self._check(k)
        full = self._full_marginal(k)
        if self.kind == "stationary":
            return MarkovModel("stationary", full, matrix=self._matrix,
                               horizon=self.horizon - k, exact=self.exact, meta=self.meta)
        kernels = [self._raw_kernel(n) for n in range(k, self.horizon)]
        return MarkovModel("explicit", full, kernels=kernels, exact=self.exact, meta=self.meta)

    def to_dict(self) -> dict:
        """JSON description of the model restricted to retained states."""
        if self.kind == "stationary":
            return {
                "kind": "stationary",
                "matrix": [[num.to_json(x) for x in r] for r in self._matrix],
                "initial": [num.to_json(x) for x in self._raw_initial],
                "horizon": self.horizon,
            }
        return {
            "kind": "explicit",
            "kernels": [[[num.to_json(x) for x in r] for r in self.kernel(n)]
                        for n in range(self.horizon)],
            "initial": [num.to_json(x) for x in self.initial()],
            "horizon": self.horizon,
        }

    def __repr__(self) -> str:
        return f"MarkovModel(kind={self.kind!r}, horizon={self.horizon}, exact={self.exact})"


# -- construction -----------------------------------------------------------

def _auto_exact(counts: list[int], horizon: int | None) -> bool:
    h = DEFAULT_STATIONARY_HORIZON if horizon is None else horizon
    return max(counts) <= num.EXACT_MAX_STATES and h <= num.EXACT_MAX_HORIZON


def _bratteli_levels(spec: dict):
    """Per-level ``(from, to, multiplicity)`` edge lists from either layout."""
    edges = spec.get("edges")
    if not edges:
        raise EmptyLevel("bratteli description has no edges")
    if all(isinstance(e, (list, tuple)) and len(e) == 4 and not isinstance(e[0], (list, tuple))
           for e in edges):
        depth = max(int(e[0]) for e in edges) + 1
        levels: list[list] = [[] for _ in range(depth)]
        for lvl, a, b, mult in edges:
            levels[int(lvl)].append((int(a), int(b), int(mult)))
        return levels
    return [[(int(a), int(b), int(mult)) for a, b, mult in level] for level in edges]


def _build_bratteli(spec: dict, exact: bool | None):
    levels = _bratteli_levels(spec)
    horizon = len(levels)
    counts = spec.get("state_counts")
    if counts is None:
        counts = [0] * (horizon + 1)
        for n, level in enumerate(levels):
            for a, b, _ in level:
                counts[n] = max(counts[n], a + 1)
                counts[n + 1] = max(counts[n + 1], b + 1)
    if len(counts) != horizon + 1:
        raise ShapeMismatch("state_counts must list horizon + 1 levels")
    if any(c < 1 for c in counts):
        raise EmptyLevel("every level needs at least one vertex")
    if exact is None:
        exact = _auto_exact(counts, horizon)
    mult = []
    for n, level in enumerate(levels):
        m = np.zeros((counts[n], counts[n + 1]), dtype=np.int64)
        for a, b, k in level:
            if not (0 <= a < counts[n] and 0 <= b < counts[n + 1]) or k < 0:
                raise ShapeMismatch(f"bad edge ({a}, {b}, {k}) at level {n}")
            m[a, b] += k
        mult.append(m)
    # dim(v): number of paths from level 0 to v
    dims = [[1] * counts[0]]
    for n, m in enumerate(mult):
        dims.append([sum(int(m[a, b]) * dims[n][a] for a in range(counts[n]))
                     for b in range(counts[n + 1])])
    measure = spec.get("measure", "central")
    if measure == "central":
        cot = []
        for n, m in enumerate(mult):
            q = np.empty((counts[n + 1], counts[n]), dtype=object)
            for v in range(counts[n + 1]):
                for c in range(counts[n]):
                    dv = dims[n + 1][v]
                    q[v, c] = Fraction(int(m[c, v]) * dims[n][c], dv) if dv else Fraction(0)
            cot.append(q if exact else q.astype(float))
    elif isinstance(measure, list):
        if len(measure) != horizon:
            raise ShapeMismatch("explicit cotransitions must list one matrix per level")
        cot = [num.as_matrix(q, exact) for q in measure]
        for n, q in enumerate(cot):
            if q.shape != (counts[n + 1], counts[n]):
                raise ShapeMismatch(f"cotransition matrix {n + 1} has shape {q.shape}")
            for v in range(counts[n + 1]):
                for c in range(counts[n]):
                    if q[v, c] != 0 and mult[n][c, v] == 0:
                        raise ShapeMismatch(f"cotransition ({v}, {c}) at level {n + 1} has no edge")
    else:
        raise InputError(f"unknown measure {measure!r}")
    boundary = spec.get("boundary")
    if boundary is None:
        total = sum(dims[horizon])
        mu = num.as_vector([Fraction(d, total) for d in dims[horizon]], exact)
    else:
        mu = num.as_vector(boundary, exact)
        if len(mu) != counts[horizon]:
            raise ShapeMismatch("boundary weights must cover the last level")
    _validate_vector(mu, exact, "boundary")
    # push the boundary law back through the cotransitions
    marginals = [None] * (horizon + 1)
    marginals[horizon] = mu
    for n in range(horizon, 0, -1):
        q = cot[n - 1]
        for v in range(q.shape[0]):
            if marginals[n][v] != 0 and not num.close(q[v].sum(), num.one(exact), exact):
                raise NonStochasticRow(f"cotransition row {v} at level {n} sums to {q[v].sum()}")
        marginals[n - 1] = marginals[n] @ q
    kernels = []
    for n in range(horizon):
        mu0, mu1, q = marginals[n], marginals[n + 1], cot[n]
        p = np.empty((counts[n], counts[n + 1]), dtype=object if exact else float)
        for c in range(counts[n]):
            for v in range(counts[n + 1]):
                if mu0[c] != 0:
                    p[c, v] = mu1[v] * q[v, c] / mu0[c]
                else:
                    # unreachable vertex: any stochastic row, pruned later
                    p[c, v] = num.one(exact) if v == 0 else num.zero(exact)
        kernels.append(p)
    meta = {"dims": dims}
    return MarkovModel("bratteli", marginals[0], kernels=kernels, exact=exact, meta=meta)


def build_model(spec: dict, *, exact: bool | None = None) -> MarkovModel:
    """Validated model from a JSON-style description.

    ``exact=None`` picks rational arithmetic when every level has at most 64
    states and the horizon is at most 32.
    """
    if not isinstance(spec, dict):
        raise InputError("model description must be an object")
    kind = spec.get("kind")
    if kind == "bratteli":
        return _build_bratteli(spec, exact)
    if "initial" not in spec:
        raise InputError("missing field 'initial'")
    if kind == "stationary":
        if "matrix" not in spec:
            raise InputError("missing field 'matrix'")
        rows = spec["matrix"]
        horizon = spec.get("horizon")
        if exact is None:
            exact = _auto_exact([len(rows)], horizon)
        return MarkovModel("stationary", num.as_vector(spec["initial"], exact),
                           matrix=num.as_matrix(rows, exact), horizon=horizon, exact=exact)
    if kind == "explicit":
        if "kernels" not in spec:
            raise InputError("missing field 'kernels'")
        kernels = spec["kernels"]
        if exact is None:
            counts = [len(spec["initial"])] + [len(k[0]) if k else 0 for k in kernels]
            exact = _auto_exact(counts, spec.get("horizon", len(kernels)))
        return MarkovModel("explicit", num.as_vector(spec["initial"], exact),
                           kernels=[num.as_matrix(k, exact) for k in kernels],
                           horizon=spec.get("horizon"), exact=exact)
    raise InputError(f"field 'kind' must be stationary, explicit or bratteli, got {kind!r}")


def load_model(path, *, exact: bool | None = None) -> MarkovModel:
    try:
        spec = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise InputError(f"model file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"model file {path} is not valid JSON: {e}") from e
    return build_model(spec, exact=exact)


# -- generators -------------------------------------------------------------

def stationary(matrix, initial, horizon: int = DEFAULT_STATIONARY_HORIZON,
               exact: bool = True) -> MarkovModel:
    return MarkovModel("stationary", num.as_vector(initial, exact),
                       matrix=num.as_matrix(matrix, exact), horizon=horizon, exact=exact)


def bernoulli(p=Fraction(3, 4), horizon: int = DEFAULT_STATIONARY_HORIZON,
              exact: bool = True) -> MarkovModel:
    """Two-state chain with identical rows ``(p, 1 - p)``: an i.i.d. sequence."""
    p = num.parse_number(p, exact)
    q = 1 - p
    return stationary([[p, q], [p, q]], [p, q], horizon, exact)


def symmetric(p=Fraction(3, 4), horizon: int = DEFAULT_STATIONARY_HORIZON,
              exact: bool = True) -> MarkovModel:
    """Two-state chain ``[[p, q], [q, p]]`` started from its uniform stationary law."""
    p = num.parse_number(p, exact)
    q = 1 - p
    half = num.parse_number("1/2", exact)
    return stationary([[p, q], [q, p]], [half, half], horizon, exact)


def pascal_spec(horizon: int, boundary=None) -> dict:
    """Bratteli description of the Pascal graph; vertex ``k`` of level ``n`` is ``(n, k)``."""
    levels = [[[k, k + d, 1] for k in range(n + 1) for d in (0, 1)] for n in range(horizon)]
    spec = {"kind": "bratteli", "edges": levels, "measure": "central"}
    if boundary is not None:
        spec["boundary"] = [num.to_json(x) for x in boundary]
    return spec


def pascal(horizon: int = 12, p=None, exact: bool | None = None) -> MarkovModel:
    """Pascal graph with the central measure fixed by Bernoulli(p) boundary weights.

    ``p=None`` gives the symmetric weights ``C(N, k) / 2**N``.
    """
    boundary = None
    if p is not None:
        p = Fraction(p)
        boundary = [comb(horizon, k) * p**k * (1 - p) ** (horizon - k) for k in range(horizon + 1)]
    return build_model(pascal_spec(horizon, boundary), exact=exact)


# -- module-level operations ------------------------------------------------

def level_marginal(model: MarkovModel, n: int) -> LevelMeasure:
    return LevelMeasure(n, model.marginal(n))


def cotransitions(model: MarkovModel, n: int) -> CotransitionKernel:
    return CotransitionKernel(n, model.cotransition(n))


def telescope(model: MarkovModel, schedule) -> MarkovModel:
    """Subsequence ``n_0 = 0 < n_1 < ...`` of levels with composed kernels.

    A schedule not starting at 0 gets 0 prepended.
    """
    sched = [int(s) for s in schedule]
    if not sched:
        raise BadSchedule("empty schedule")
    if sched[0] != 0:
        sched = [0] + sched
    if any(b <= a for a, b in zip(sched, sched[1:])) or sched[0] < 0:
        raise BadSchedule(f"schedule must be strictly increasing from 0: {sched}")
    if sched[-1] > model.horizon:
        raise BadSchedule(f"schedule reaches {sched[-1]} beyond horizon {model.horizon}")
    kernels = []
    for a, b in zip(sched, sched[1:]):
        k = model._raw_kernel(a)
        for n in range(a + 1, b):
            k = k @ model._raw_kernel(n)
        kernels.append(k)
    meta = dict(model.meta, schedule=sched)
    return MarkovModel("explicit", model._full_marginal(0), kernels=kernels,
                       exact=model.exact, meta=meta)


def dobrushin(rows: np.ndarray):
    """Largest total-variation distance between two rows of a stochastic matrix."""
    best = num.zero(rows.dtype == object)
    for a in range(rows.shape[0]):
        for b in range(a + 1, rows.shape[0]):
            best = max(best, total_variation(rows[a], rows[b]))
    return best


def ergodicity_diagnostic(model: MarkovModel, n: int, tol: float = 1e-6) -> dict:
    """Dobrushin coefficients of the cotransition kernels at levels 1..n.

    ``tail_trivial_certified`` is set when their running product drops to
    ``tol`` or below; it is evidence at a finite horizon only.
    """
    model._check(n)
    coeffs = []
    products = []
    prod = num.one(model.exact)
    for k in range(1, n + 1):
        c = dobrushin(model.cotransition(k))
        prod = prod * c
        coeffs.append(c)
        products.append(prod)
    return {
        "coefficients": coeffs,
        "products": products,
        "product_bound": prod,
        "tail_trivial_certified": bool(n >= 1 and prod <= tol),
    }
