"""Matrix distributions of level semimetrics and their empirical distance laws.

Points are drawn i.i.d. from the level marginal and the matrix of their
pairwise distances is recorded. Randomness comes from a Philox stream keyed
by ``(seed, level)``; sample ``i`` always reads the same counter blocks, so
results do not depend on how the samples are split across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import _numeric as num
from .errors import EmptySample, InputError, LevelMissing
from .iteration import KANTOROVICH, InitialMetricSpec, iterate, resolve_semantics
from .model import MarkovModel
from .transport import Semimetric, kantorovich

__all__ = [
    "DistanceMatrixSample",
    "EmpiricalDistanceLaw",
    "level_semimetric",
    "sample_matrix_distribution",
    "two_point_law",
    "exact_two_point_law",
    "law_distance",
    "shadow_stabilization",
    "exchangeability_check",
    "secondary_entropy",
]

EXACT_LAW_MAX_STATES = 512
_CHUNK = 4096


@dataclass
class DistanceMatrixSample:
    level: int
    semantics: str
    k: int
    count: int
    seed: int
    states: np.ndarray          # (count, k) retained state indices
    semimetric: Semimetric      # d_n on level-n states

    @property
    def matrices(self) -> np.ndarray:
        d = self.semimetric.d.astype(float)
        return d[self.states[:, :, None], self.states[:, None, :]]

    def entries(self, i: int, j: int) -> list:
        """Exact values of entry ``(i, j)`` across samples."""
        d = self.semimetric.d
        return [d[a, b] for a, b in zip(self.states[:, i], self.states[:, j])]


@dataclass
class EmpiricalDistanceLaw:
    support: list
    frequencies: list
    half_widths: list = field(default_factory=list)
    count: int = 0

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.frequencies))

    def tv_to(self, law: dict) -> float:
        keys = set(self.support) | set(law)
        mine = self.as_dict()
        return 0.5 * sum(abs(float(mine.get(x, 0)) - float(law.get(x, 0))) for x in keys)


def level_semimetric(model: MarkovModel, n: int, semantics: str = KANTOROVICH,
                     init: InitialMetricSpec | None = None) -> Semimetric:
    report = iterate(model, init, n, semantics)
    return report.distance(n)


def _uniforms(seed: int, level: int, start: int, stop: int, k: int) -> np.ndarray:
    """Uniforms for samples ``start..stop-1``; ``k`` per sample."""
    blocks = -(-k // 4)
    bg = np.random.Philox(key=np.array([seed, level], dtype=np.uint64),
                          counter=np.array([start * blocks, 0, 0, 0], dtype=np.uint64))
    raw = bg.random_raw((stop - start) * blocks * 4).reshape(stop - start, blocks * 4)[:, :k]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 2**53)


def sample_matrix_distribution(model: MarkovModel, n: int, semantics: str = KANTOROVICH,
                               k: int = 2, count: int = 1000, seed: int = 0, *,
                               init: InitialMetricSpec | None = None,
                               semimetric: Semimetric | None = None,
                               workers: int | None = None) -> DistanceMatrixSample:
    """``count`` i.i.d. k-tuples of level-n states and their distance matrices."""
    if k < 2:
        raise InputError("matrix size k must be at least 2")
    if count < 1:
        raise InputError("count must be positive")
    if n < 0 or n > model.horizon:
        raise LevelMissing(f"level {n} outside 0..{model.horizon}")
    semantics = resolve_semantics(semantics)
    if semimetric is None:
        semimetric = level_semimetric(model, n, semantics, init)
    cum = np.cumsum(model.marginal(n).astype(float))
    cum[-1] = 1.0
    top = len(cum) - 1

    def chunk(bounds):
        lo, hi = bounds
        u = _uniforms(seed, n, lo, hi, k)
        return np.minimum(np.searchsorted(cum, u, side="right"), top)

    bounds = [(lo, min(lo + _CHUNK, count)) for lo in range(0, count, _CHUNK)]
    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(chunk, bounds))
    else:
        parts = [chunk(b) for b in bounds]
    states = np.concatenate(parts).astype(np.int64)
    return DistanceMatrixSample(n, semantics, k, count, seed, states, semimetric)


def _law_from_values(values: list, count: int) -> EmpiricalDistanceLaw:
    tally: dict = {}
    for v in values:
        tally[v] = tally.get(v, 0) + 1
    support = sorted(tally)
    freqs = [tally[v] / count for v in support]
    half = [1.96 * math.sqrt(f * (1 - f) / count) for f in freqs]
    return EmpiricalDistanceLaw(support, freqs, half, count)


def two_point_law(sample: DistanceMatrixSample, i: int = 0, j: int = 1) -> EmpiricalDistanceLaw:
    """Empirical law of entry ``(i, j)`` with 95% normal half-widths."""
    if sample.count == 0:
        raise EmptySample("sample is empty")
    return _law_from_values(sample.entries(i, j), sample.count)


def exact_two_point_law(model: MarkovModel, n: int, semimetric: Semimetric) -> dict:
    """Law of ``d_n(a, b)`` for independent ``a, b ~ mu_n``."""
    mu = model.marginal(n)
    d = semimetric.d
    law: dict = {}
    for a in range(len(mu)):
        for b in range(len(mu)):
            v = d[a, b]
            law[v] = law.get(v, num.zero(model.exact)) + mu[a] * mu[b]
    return dict(sorted(law.items()))


def law_distance(p: dict, q: dict):
    """Kantorovich distance between two laws on the real line."""
    pts = sorted(set(p) | set(q))
    exact = all(isinstance(x, Fraction) for x in list(pts) + list(p.values()) + list(q.values()))
    conv = (lambda x: Fraction(x)) if exact else float
    a = np.array([conv(p.get(x, 0)) for x in pts], dtype=object if exact else float)
    b = np.array([conv(q.get(x, 0)) for x in pts], dtype=object if exact else float)
    if not exact:
        a, b = a / a.sum(), b / b.sum()
    xs = np.array([conv(x) for x in pts], dtype=object if exact else float)
    ground = Semimetric(np.abs(xs[:, None] - xs[None, :]), exact=exact, validate=False)
    return kantorovich(a, b, ground, exact=exact)[0]


def shadow_stabilization(model: MarkovModel, semantics: str, k: int, count: int, levels,
                         seed: int = 0, *, tol: float = 1e-6,
                         init: InitialMetricSpec | None = None,
                         workers: int | None = None) -> dict:
    """Per-level distance laws and Kantorovich distances between consecutive ones.

    Exact laws are used for the comparison whenever the level has at most
    512 states. ``stabilized`` is evidence only.
    """
    levels = list(levels)
    if not levels:
        raise InputError("levels must be nonempty")
    semantics = resolve_semantics(semantics)
    top = max(levels)
    if top > model.horizon:
        raise LevelMissing(f"level {top} exceeds horizon {model.horizon}")
    report = iterate(model, init, top, semantics)
    per_level = []
    laws = []
    for n in levels:
        d = report.distance(n)
        sample = sample_matrix_distribution(model, n, semantics, k, count, seed,
                                            semimetric=d, workers=workers)
        empirical = two_point_law(sample)
        exact_law = None
        if model.state_count(n) <= EXACT_LAW_MAX_STATES:
            exact_law = exact_two_point_law(model, n, d)
            laws.append(exact_law)
        else:
            laws.append(empirical.as_dict())
        per_level.append({"level": n, "empirical": empirical, "exact": exact_law})
    steps = [law_distance(p, q) for p, q in zip(laws, laws[1:])]
    return {
        "semantics": semantics,
        "levels": per_level,
        "successive_distances": steps,
        "stabilized": bool(steps) and all(s < tol for s in steps),
    }


def exchangeability_check(sample: DistanceMatrixSample) -> dict:
    """Largest gap between the law of one off-diagonal entry and the pooled law.

    Also reports the 3-sigma binomial band for that gap.
    """
    if sample.k < 3:
        raise InputError("exchangeability check needs k >= 3")
    if sample.count == 0:
        raise EmptySample("sample is empty")
    pairs = list(combinations(range(sample.k), 2))
    laws = {p: _law_from_values(sample.entries(*p), sample.count).as_dict() for p in pairs}
    pooled: dict = {}
    for law in laws.values():
        for x, f in law.items():
            pooled[x] = pooled.get(x, 0.0) + f / len(pairs)
    worst = 0.0
    band = 0.0
    for law in laws.values():
        for x, f in pooled.items():
            worst = max(worst, abs(law.get(x, 0.0) - f))
            band = max(band, 3 * math.sqrt(f * (1 - f) / sample.count))
    return {"pairs": len(pairs), "max_deviation": worst, "three_sigma": band}


def secondary_entropy(law, eps: float) -> dict:
    """Covering number of the law's support by intervals of radius ``eps``.

    A diagnostic only: greedy covering, which is optimal on the line.
    """
    pts = sorted(float(x) for x, f in (law.items() if isinstance(law, dict) else law.as_dict().items())
                 if f > 0)
    count = 0
    reach = -math.inf
    for x in pts:
        if x > reach:
            count += 1
            reach = x + 2 * eps
    return {"eps": eps, "covering_number": count, "entropy_bits": math.log2(count) if count else 0.0}
