"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 model validation error.
"""

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from .bisim import bisim_classes
from .fixpoint import iterate
from .globallp import solve_distance_lp
from .model import ModelError, check, load, perturb, random_ctmc, serialize
from .onthefly import all_pairs, on_the_fly


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v):
    return f"{v:.12g}"


def _parse_pairs(ctmc, text):
    pairs = []
    for item in text.split(","):
        a, sep, b = item.strip().partition(":")
        if not sep:
            raise UsageError(f"pair {item!r} is not of the form a:b")
        try:
            pairs.append((ctmc.index(a), ctmc.index(b)))
        except KeyError:
            raise UsageError(f"unknown state in pair {item!r}") from None
    return pairs


def _load_known(ctmc, path):
    try:
        entries = json.loads(Path(path).read_text())
        return {(ctmc.index(str(e["a"])), ctmc.index(str(e["b"]))): float(e["d"]) for e in entries}
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise UsageError(f"cannot read known distances from {path}: {e}") from None


def _seeds(text):
    text = text.strip()
    if not text:
        return []
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_validate(args, out):
    try:
        ctmc, _ = load(args.model)
    except ModelError as e:
        for v in e.violations or [str(e)]:
            print(v, file=out)
        return 2
    print(f"ok {ctmc.n} states", file=out)
    return 0


def cmd_distance(args, out):
    ctmc, metric = load(args.model)
    if args.all:
        pairs = all_pairs(ctmc.n)
    elif args.pairs:
        pairs = _parse_pairs(ctmc, args.pairs)
    else:
        raise UsageError("give --pairs or --all")
    known = _load_known(ctmc, args.known) if args.known else None
    if known and args.method != "otf":
        raise UsageError("--known is only supported with --method otf")
    if args.method == "otf":
        values, _ = on_the_fly(ctmc, metric, args.lam, pairs, known=known)
    else:
        if args.method == "iter":
            d = iterate(ctmc, metric, args.lam, args.eps)
        else:
            d = solve_distance_lp(ctmc, metric, args.lam)
        values = {p: float(d[p]) for p in pairs}
    for s, t in pairs:
        print(ctmc.states[s], ctmc.states[t], _fmt(values[s, t]), file=out)
    return 0


def cmd_bisim(args, out):
    ctmc, metric = load(args.model)
    for block in bisim_classes(ctmc, metric):
        print(" ".join(ctmc.states[i] for i in block), file=out)
    return 0


def _write(text, path, out):
    if path:
        Path(path).write_text(text)
    else:
        out.write(text)


def cmd_gen(args, out):
    try:
        ctmc, metric = random_ctmc(args.n, args.out_degree, args.labels, args.absorbing, seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _write(serialize(ctmc, metric), args.out, out)
    return 0


def cmd_perturb(args, out):
    ctmc, metric = load(args.model)
    if args.edit:
        edits = []
        for e in args.edit:
            parts = e.split(":")
            if len(parts) != 4:
                raise UsageError(f"edit {e!r} is not of the form state:a:b:eps")
            try:
                edits.append((parts[0], parts[1], parts[2], float(parts[3])))
            except ValueError:
                raise UsageError(f"edit {e!r}: eps is not a number") from None
    elif args.eps is not None:
        edits = args.eps
    else:
        raise UsageError("give --edit or --eps")
    try:
        new = check(perturb(ctmc, edits, seed=args.seed), metric)
    except KeyError as e:
        raise UsageError(f"unknown state {e}") from None
    _write(serialize(new, metric), args.out, out)
    return 0


def cmd_bench(args, out):
    try:
        rows = bench_mod.bench(_ints(args.n), _ints(args.out_degree), _seeds(args.seeds), args.query, args.lam)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _write(bench_mod.to_csv(rows), args.out, out)
    if args.figure:
        from .plots import bench_figure

        bench_figure(rows, args.figure)
        print(f"figure written to {args.figure}", file=sys.stderr)
    return 0


def build_parser():
    p = _Parser(prog="bisimdist", description="Bisimilarity distances between CTMC states.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("--model", required=True)
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("distance", help="distances for state pairs")
    d.add_argument("--model", required=True)
    d.add_argument("--lambda", dest="lam", type=float, required=True)
    d.add_argument("--pairs", help="a:b[,c:d...] over state ids")
    d.add_argument("--all", action="store_true", help="every unordered pair")
    d.add_argument("--method", choices=("otf", "iter", "lp"), default="otf")
    d.add_argument("--eps", type=float, default=1e-7, help="accuracy for --method iter")
    d.add_argument("--known", help='JSON list of {"a", "b", "d"} over-estimates (otf only)')
    d.set_defaults(func=cmd_distance)

    b = sub.add_parser("bisim", help="bisimilarity classes")
    b.add_argument("--model", required=True)
    b.set_defaults(func=cmd_bisim)

    g = sub.add_parser("gen", help="random model")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out-degree", type=int, default=3)
    g.add_argument("--labels", type=int, default=2)
    g.add_argument("--absorbing", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    q = sub.add_parser("perturb", help="move probability mass between successors")
    q.add_argument("--model", required=True)
    q.add_argument("--edit", action="append", help="state:a:b:eps, moves eps from b to a (repeatable)")
    q.add_argument("--eps", type=float, help="random edits of this size, one per eligible state")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_perturb)

    r = sub.add_parser("bench", help="on-the-fly vs iteration at equal time (CSV)")
    r.add_argument("--n", default="10", help="comma-separated state counts")
    r.add_argument("--out-degree", default="3")
    r.add_argument("--seeds", default="1-5", help="e.g. 1-5 or 1,3,7")
    r.add_argument("--query", choices=("all", "single"), default="all")
    r.add_argument("--lambda", dest="lam", type=float, default=0.5)
    r.add_argument("--out", help="CSV path (default stdout)")
    r.add_argument("--figure", help="also render a PNG summary to this path")
    r.set_defaults(func=cmd_bench)
    return p


def run(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        lam = getattr(args, "lam", None)
        if lam is not None and not 0 < lam < 1:
            raise UsageError("--lambda must lie in (0, 1)")
        return args.func(args, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except ModelError as e:
        print(f"invalid model: {e}", file=sys.stderr)
        for v in e.violations or []:
            print(f"  {v}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
