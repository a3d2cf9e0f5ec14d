"""Command-line front end.

    python -m valdist run <scenario.ini | built-in name> [--out DIR]
    python -m valdist examples [--show NAME]
    python -m valdist analyze -f EXPR [--domain disc] [--values 0,1] [--zeros]
    python -m valdist verify <output-dir>
    python -m valdist reduce -n N [-p P]
    python -m valdist solve <scenario> [--dump-rays FILE]
    python -m valdist dominance <scenario> [--kind KIND]

Global numeric flags (``--tol``, ``--grid``, ``--trim``, ``--seed``,
``--out``) override the scenario values.  All magnitudes are in nats.
"""
import argparse
import math
import os
import sys

from .catalogue import CATALOGUE, examples_catalogue, get_scenario
from .dominance import CONDITION_KINDS, find_p
from .harness import _num, _rows_csv, run, verify
from .nevanlinna import count_zeros, deficiency, growth_series
from .parser import parse
from .reduction import build_Ck, format_monomials
from .scenario import ScenarioError, _split, load_scenario, parse_grid
from .solvers import solution_growth

__all__ = ["main"]


def _load(ref):
    if ref in CATALOGUE and not os.path.exists(ref):
        return get_scenario(ref)
    return load_scenario(ref)


def _overrides(sc, args):
    return sc.with_overrides(tol=args.tol, grid=args.grid, trim=args.trim, seed=args.seed)


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    sc = _overrides(_load(args.scenario), args)
    res = run(sc, args.out, dump_rays=args.dump_rays or None)
    sys.stdout.write(res.report)
    return res.exit_code


def cmd_examples(args):
    if args.show:
        sys.stdout.write(get_scenario(args.show).to_ini())
        return 0
    width = max(len(n) for n, _ in examples_catalogue())
    for name, desc in examples_catalogue():
        print(f"{name:<{width}}  {desc}")
    return 0


def cmd_analyze(args):
    f = parse(args.f, args.domain)
    grid = parse_grid(args.grid or ("disc:4:24:0.25" if f.domain == "disc" else "linear:1:10:10"),
                      f.domain)
    tol = args.tol or 1e-8
    if args.values:
        rows = []
        for v in _split(args.values, ","):
            a = math.inf if v == "inf" else complex(v.replace("i", "j"))
            a = a.real if isinstance(a, complex) and a.imag == 0 else a
            rep = deficiency(f, a, grid, tol, args.trim if args.trim is not None else 0.1)
            rows += [(v, r, x) for r, x in zip(rep.r, rep.ratios)]
        _emit(_rows_csv(["a", "r", "ratio"], rows), args.out)
    elif args.zeros:
        _emit(_rows_csv(["r", "n"], [(r, count_zeros(f, 0, r)) for r in grid]), args.out)
    else:
        _emit(growth_series(f, grid, tol).to_csv(), args.out)
    return 0


def cmd_verify(args):
    ok, msgs = verify(args.dir)
    for m in msgs:
        print(m)
    print("verified" if ok else "verification failed")
    return 0 if ok else 1


def cmd_reduce(args):
    ps = [args.p] if args.p is not None else range(args.n)
    lines = []
    for p in ps:
        if not 0 <= p < args.n:
            raise ScenarioError("reduce.p", f"need 0 <= p < n, got {p}")
        lines += format_monomials(build_Ck(args.n, p))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _solve_section(sc):
    for sid, opts in sc.sections:
        if sid.split(":")[0] == "solve":
            return sid, opts
    raise ScenarioError("solve", "scenario has no [solve] section")


def cmd_solve(args):
    sc = _overrides(_load(args.scenario), args)
    if sc.operator != "derivative":
        raise ScenarioError("scenario.operator", "solve writes growth series for differential equations")
    sid, opts = _solve_section(sc)
    A = [parse(t, sc.domain) for t in sc.coefficient_texts]
    ic = [_num(v) for v in _split(opts["ic"], ",")]
    grid = sc.grid((sid, opts))
    g = solution_growth(A, grid, ic, domain=sc.domain, keep_rays=bool(args.dump_rays))
    _emit(g.to_csv(), args.out)
    if args.dump_rays:
        thetas, L = g.meta["rays"]
        rows = [(t, r, v) for t, row in zip(thetas, L) for r, v in zip(grid, row)]
        _emit(_rows_csv(["theta", "r", "log_abs_f"], rows), args.dump_rays)
    return 0


def cmd_dominance(args):
    sc = _overrides(_load(args.scenario), args)
    A = [parse(t, sc.domain) for t in sc.coefficient_texts]
    if not A:
        raise ScenarioError("scenario.coefficients", "dominance needs explicit coefficients")
    grid = sc.grid(next(((s, o) for s, o in sc.sections if s.split(":")[0] == "dominance"), None))
    rep = find_p(A, args.kind, grid, sc.number("trim"), min(sc.number("tol") * 100, 1e-6))
    _emit(rep.to_csv(), args.out)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="quadrature tolerance")
    common.add_argument("--grid", help="radius grid, e.g. linear:5:30:26 or disc:14:31:0.25")
    common.add_argument("--trim", type=float, help="tail trimming fraction")
    common.add_argument("--seed", type=int, help="residual sample seed")
    common.add_argument("--out", help="output directory (run) or file (other commands)")

    ap = argparse.ArgumentParser(prog="valdist", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", parents=[common], help="run a scenario file or built-in scenario")
    p.add_argument("scenario")
    p.add_argument("--dump-rays", action="store_true", help="also write per-ray solver output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("examples", help="list built-in scenarios")
    p.add_argument("--show", metavar="NAME", help="print the normalised scenario text")
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("analyze", parents=[common], help="functionals of a single function")
    p.add_argument("-f", required=True, metavar="EXPR", help="expression in z")
    p.add_argument("--domain", choices=["plane", "disc"])
    p.add_argument("--values", help="comma-separated values a for deficiency estimates")
    p.add_argument("--zeros", action="store_true", help="zero counts n(r, 1/f) instead of growth")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="recompute verdicts of an output directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reduce", parents=[common], help="print C_k monomials as 'k; l0,...,lp; K'")
    p.add_argument("-n", type=int, required=True, help="equation order")
    p.add_argument("-p", type=int, help="index p (default: all)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("solve", parents=[common], help="growth series of a numeric solution")
    p.add_argument("scenario")
    p.add_argument("--dump-rays", metavar="FILE", help="write theta,r,log_abs_f rows")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("dominance", parents=[common], help="dominance ratios as CSV")
    p.add_argument("scenario")
    p.add_argument("--kind", default="characteristic", choices=CONDITION_KINDS)
    p.set_defaults(func=cmd_dominance)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
