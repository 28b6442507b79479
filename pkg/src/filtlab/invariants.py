"""Finite-isomorphism invariants: per-level mass of each equipped-tree class."""
from __future__ import annotations

from dataclasses import dataclass

from . import _numeric as num
from .model import MarkovModel
from .trees import build_tree

__all__ = ["InvariantFingerprint", "fingerprint", "finitely_isomorphic"]


@dataclass(frozen=True)
class InvariantFingerprint:
    """``levels[n]`` maps a canonical tree form to the total mass of states having it."""
    levels: list[dict]
    exact: bool

    def classes(self, n: int) -> dict:
        return self.levels[n]

    def to_dict(self, short: int = 16) -> list[dict]:
        out = []
        for n, table in enumerate(self.levels):
            rows = sorted(((form[:short], num.to_json(mass)) for form, mass in table.items()),
                          key=lambda r: (str(r[1]), r[0]))
            out.append({"level": n, "classes": [{"form": f, "mass": m} for f, m in rows]})
        return out


def fingerprint(model: MarkovModel, N: int) -> InvariantFingerprint:
    """Class masses for levels ``0..N``."""
    model._check(N)
    levels = []
    for n in range(N + 1):
        mu = model.marginal(n)
        table: dict = {}
        for a in range(model.state_count(n)):
            form = build_tree(model, n, a).canonical
            table[form] = table.get(form, num.zero(model.exact)) + mu[a]
        levels.append(table)
    return InvariantFingerprint(levels, model.exact)


def _same(t1: dict, t2: dict, exact: bool) -> bool:
    if t1.keys() != t2.keys():
        return False
    return all(num.close(t1[k], t2[k], exact) for k in t1)


def finitely_isomorphic(model_a: MarkovModel, model_b: MarkovModel, N: int) -> dict:
    """Compare fingerprints level by level up to ``N``.

    Agreement is a necessary condition for finite isomorphism up to that
    level, not a certificate of it.
    """
    fa = fingerprint(model_a, N)
    fb = fingerprint(model_b, N)
    exact = model_a.exact and model_b.exact
    equal_up_to = 0
    first_mismatch = None
    for n in range(1, N + 1):
        if _same(fa.levels[n], fb.levels[n], exact):
            equal_up_to = n
        else:
            first_mismatch = n
            break
    return {
        "equal_up_to": equal_up_to,
        "first_mismatch": first_mismatch,
        "agree": first_mismatch is None,
        "fingerprints": (fa, fb),
    }
