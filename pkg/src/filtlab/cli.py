"""``filtlab`` command-line front end.

Every command writes a JSON report (and CSV where a series is natural) to
the ``--out`` directory. Reports embed the resolved configuration and
contain nothing run-dependent, so identical flags give identical bytes.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import _numeric as num
from .errors import FiltlabError, InputError, NoCoupling, OracleMismatch, TooLarge
from .invariants import finitely_isomorphic
from .iteration import (KANTOROVICH, TV_REFRESH, FunctionSpec, InitialMetricSpec,
                        concentration_check, decide_standardness, iterate,
                        resolve_semantics, write_series_csv)
from .model import load_model, telescope
from .shadow import (exact_two_point_law, sample_matrix_distribution,
                     secondary_entropy, shadow_stabilization, two_point_law)
from .trees import (ISO, ORBIT, applicable_semantics, brute_force_coupling_oracle,
                    build_tree, coupling_distance, criterion_check, FunctionValuation)
from .trees import resolve_semantics as resolve_tree_semantics

DISCREPANCY_NOTE = (
    "kantorovich iterates the transport recursion from the initial metric; "
    "tv_refresh takes total variation of the cotransition rows afresh at each "
    "level. The two series can differ by orders of magnitude on the same model."
)
ORACLE_MAX_LEAVES = 16


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return x


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out", "workers")}
    return _jsonable(cfg)


def _mode(exact: bool) -> str:
    return "exact" if exact else "float"


def _load(args, path):
    return load_model(path, exact=args.exact)


def _number(text: str, field: str):
    try:
        return num.parse_number(text, True)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"--{field}: not a number: {text!r}") from None


def _init_spec(args, model):
    if args.function:
        return InitialMetricSpec.from_function(_function_file(args.function, model.exact))
    if args.init == "discrete":
        return InitialMetricSpec.discrete()
    if args.init.startswith("cylinder:"):
        weights = [_number(w, "init") for w in args.init.split(":", 1)[1].split(",")]
        return InitialMetricSpec.cylinder(weights)
    raise InputError(f"--init: expected 'discrete' or 'cylinder:w0,w1,...', got {args.init!r}")


def _function_file(path, exact):
    try:
        spec = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"--function: file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"--function: invalid JSON in {path}: {e}") from None
    return FunctionSpec.from_dict(spec, exact)


# -- commands ---------------------------------------------------------------

def cmd_analyze(args) -> int:
    model = _load(args, args.model)
    primary = resolve_semantics(args.semantics)
    init = _init_spec(args, model)
    tol = args.tol if args.tol is not None else 1e-6
    eps = _number(args.eps, "eps")
    series = {}
    pairs = []
    for sem in (KANTOROVICH, TV_REFRESH):
        rep = iterate(model, init, args.levels, sem, workers=args.workers)
        if args.window > len(rep.levels):
            raise InputError(f"--window {args.window} exceeds the {len(rep.levels)} "
                             f"{sem} levels available up to --levels {args.levels}")
        decision = decide_standardness(rep, tol, args.window)
        conc = concentration_check(model, rep, rep.levels[-1], eps)
        series[sem] = {
            "decision": decision,
            "levels": rep.levels,
            "I_n": [num.to_json(v) for v in rep.functionals],
            "max_pair_distance": [num.to_json(rep.max_pair_distance(n)) for n in rep.levels],
            "concentration": conc,
        }
        if model.state_count(0) == 2 and all(model.state_count(n) == 2 for n in rep.levels):
            series[sem]["d_01"] = [num.to_json(rep.distance(n)[0, 1]) for n in rep.levels]
        pairs.append((rep, decision))
    report = {
        "command": "analyze",
        "config": _config(args),
        "arithmetic": _mode(model.exact),
        "semantics": primary,
        "decision": series[primary]["decision"],
        "init": init.describe(),
        "series": series,
        "discrepancy_note": DISCREPANCY_NOTE,
    }
    out = Path(args.out)
    _write(out, "analyze.csv", write_series_csv(pairs))
    _write(out, "analyze.json", _dump(report))
    print(f"decision: {report['decision']} ({primary})")
    return 0


def _families(args, model) -> list[tuple[str, FunctionSpec]]:
    if args.function:
        return [(Path(args.function).name, _function_file(args.function, model.exact))]
    if args.family == "coordinate":
        return [("x0", FunctionSpec.coordinate(model))]
    if args.family == "indicators":
        labels = model.labels(0)
        return [(f"1[x0={a}]", FunctionSpec.coordinate(model, {b: int(b == a) for b in labels}))
                for a in labels]
    raise InputError(f"--family: unknown family {args.family!r}")


def _oracle(model, f, n, semantics) -> list[dict]:
    if not model.exact:
        return []
    val = FunctionValuation.of(model, f)
    trees = [build_tree(model, n, a) for a in range(model.state_count(n))]
    checks = []
    for a in range(len(trees)):
        for b in range(a + 1, len(trees)):
            try:
                want = brute_force_coupling_oracle(trees[a], trees[b], val, val, semantics,
                                                   max_leaves=ORACLE_MAX_LEAVES)
            except TooLarge:
                continue
            except NoCoupling:
                want = None
            try:
                got = coupling_distance(trees[a], trees[b], val, val, semantics)
            except NoCoupling:
                got = None
            if got != want:
                raise OracleMismatch(f"{semantics} level {n} pair ({a},{b}): "
                                     f"dp={got} oracle={want}")
            checks.append({"pair": [a, b], "value": num.to_json(got) if got is not None else None})
    return checks


def cmd_criterion(args) -> int:
    eps = _number(args.eps, "eps")
    if not 0 < eps < 1:
        raise InputError(f"--eps must lie in (0, 1), got {args.eps}")
    model = _load(args, args.model)
    rows = []
    oracle = []
    for name, f in _families(args, model):
        for n in range(f.depth, args.levels + 1):
            sems = applicable_semantics(model, n)
            if args.semantics:
                wanted = [resolve_tree_semantics(s) for s in args.semantics.split(",")]
                sems = [s for s in wanted if s != ORBIT or s in sems]
            for sem in sems:
                res = criterion_check(model, f, eps, n, sem)
                row = {
                    "function": name,
                    "semantics": sem,
                    "level": n,
                    "satisfied": res["satisfied"],
                    "pair_mass_below_eps": num.to_json(res["pair_mass_below_eps"]),
                    "no_coupling": res["no_coupling"],
                }
                if model.state_count(n) <= 16:
                    row["distances"] = [[None if d is None else num.to_json(d) for d in r]
                                        for r in res["distances"]]
                rows.append(row)
                if args.oracle:
                    oracle.append({"function": name, "semantics": sem, "level": n,
                                   "checked": _oracle(model, f, n, sem)})
    report = {
        "command": "criterion",
        "config": _config(args),
        "arithmetic": _mode(model.exact),
        "rows": rows,
    }
    if args.oracle:
        report["oracle"] = oracle
    _write(Path(args.out), "criterion.json", _dump(report))
    for r in rows:
        print(f"{r['function']} {r['semantics']} n={r['level']} satisfied={r['satisfied']}")
    return 0


def cmd_invariants(args) -> int:
    a = _load(args, args.model_a)
    b = _load(args, args.model_b)
    res = finitely_isomorphic(a, b, args.levels)
    fa, fb = res["fingerprints"]
    report = {
        "command": "invariants",
        "config": _config(args),
        "arithmetic": _mode(a.exact and b.exact),
        "verdict": "agree" if res["agree"] else "differ",
        "equal_up_to": res["equal_up_to"],
        "first_mismatch": res["first_mismatch"],
        "fingerprints": {"a": fa.to_dict(), "b": fb.to_dict()},
    }
    _write(Path(args.out), "invariants.json", _dump(report))
    print(f"verdict: {report['verdict']}")
    return 0


def cmd_shadow(args) -> int:
    model = _load(args, args.model)
    semantics = resolve_semantics(args.semantics)
    levels = [int(x) for x in args.levels.split(",")] if args.levels else [args.level]
    stab = shadow_stabilization(model, semantics, args.matrix_size, args.samples, levels,
                                args.seed, tol=args.tol if args.tol is not None else 1e-6,
                                workers=args.workers)
    per_level = []
    lines = ["level,distance,frequency"]
    for item in stab["levels"]:
        emp = item["empirical"]
        for x, f in zip(emp.support, emp.frequencies):
            lines.append(f"{item['level']},{num.fmt(x)},{f!r}")
        entry = {
            "level": item["level"],
            "empirical": [{"distance": num.to_json(x), "frequency": f, "half_width": h}
                          for x, f, h in zip(emp.support, emp.frequencies, emp.half_widths)],
            "secondary_entropy": secondary_entropy(emp, args.entropy_eps),
        }
        if item["exact"] is not None:
            entry["exact"] = [{"distance": num.to_json(x), "probability": num.to_json(p)}
                              for x, p in item["exact"].items()]
            entry["tv_to_exact"] = emp.tv_to(item["exact"])
        per_level.append(entry)
    report = {
        "command": "shadow",
        "config": _config(args),
        "arithmetic": _mode(model.exact),
        "semantics": semantics,
        "levels": per_level,
        "successive_distances": [num.to_json(s) for s in stab["successive_distances"]],
        "stabilized": stab["stabilized"],
        "note": "stabilization is evidence for a limiting law, not a proof",
    }
    out = Path(args.out)
    _write(out, "shadow.csv", "\n".join(lines) + "\n")
    _write(out, "shadow.json", _dump(report))
    print(f"stabilized: {stab['stabilized']}")
    return 0


def cmd_telescope(args) -> int:
    model = _load(args, args.model)
    try:
        schedule = [int(x) for x in args.schedule.split(",")]
    except ValueError:
        raise InputError(f"--schedule: expected comma-separated integers, got {args.schedule!r}") from None
    tele = telescope(model, schedule)
    _write(Path(args.out), args.name, _dump(tele.to_dict()))
    print(f"wrote {args.name} with horizon {tele.horizon}")
    return 0


# -- parser -----------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="exact", action="store_const", const=True, default=None,
                      help="rational arithmetic")
    mode.add_argument("--float", dest="exact", action="store_const", const=False,
                      help="float64 arithmetic")
    common.add_argument("--tol", type=float, default=None, help="decision tolerance")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=None)

    p = argparse.ArgumentParser(prog="filtlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="iterated semimetrics and decision")
    a.add_argument("model")
    a.add_argument("--levels", type=int, default=10)
    a.add_argument("--semantics", default=KANTOROVICH)
    a.add_argument("--init", default="discrete", help="discrete or cylinder:w0,w1,...")
    a.add_argument("--function", default=None, help="JSON function spec for the initial metric")
    a.add_argument("--window", type=int, default=5)
    a.add_argument("--eps", default="1/10", help="radius for the concentration check")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("criterion", parents=[common], help="tree-coupling criterion")
    c.add_argument("model")
    c.add_argument("--levels", type=int, default=4)
    c.add_argument("--eps", default="1/10")
    c.add_argument("--function", default=None)
    c.add_argument("--family", default="coordinate", help="coordinate or indicators")
    c.add_argument("--semantics", default=None, help="comma-separated coupling classes")
    c.add_argument("--oracle", action="store_true", help="cross-check against brute force")
    c.set_defaults(func=cmd_criterion)

    i = sub.add_parser("invariants", parents=[common], help="compare fingerprints")
    i.add_argument("model_a")
    i.add_argument("model_b")
    i.add_argument("--levels", type=int, default=6)
    i.set_defaults(func=cmd_invariants)

    s = sub.add_parser("shadow", parents=[common], help="distance laws by sampling")
    s.add_argument("model")
    s.add_argument("--level", type=int, default=8)
    s.add_argument("--levels", default=None, help="comma-separated levels for stabilization")
    s.add_argument("--samples", type=int, default=10000)
    s.add_argument("--matrix-size", type=int, default=2)
    s.add_argument("--semantics", default=TV_REFRESH)
    s.add_argument("--entropy-eps", type=float, default=0.01)
    s.set_defaults(func=cmd_shadow)

    t = sub.add_parser("telescope", parents=[common], help="compose kernels along a schedule")
    t.add_argument("model")
    t.add_argument("--schedule", required=True, help="e.g. 1,2,4,8")
    t.add_argument("--name", default="telescoped.json", help="output file name")
    t.set_defaults(func=cmd_telescope)
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        return args.func(args)
    except FiltlabError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ArithmeticError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
