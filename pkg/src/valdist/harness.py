"""Scenario execution, check bookkeeping and output verification.

Every verdict is a row of ``checks.csv`` that names a data file, a row
filter, a column expression, a statistic and a comparison.  The report is
rendered from ``checks.csv`` and the normalised ``scenario.ini`` alone, and
``verify`` recomputes each statistic from the data files, so a report can
be audited without rerunning any numerics.
"""
import ast
import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .dominance import conclusion_check, curve_dominance, find_p
from .funcexpr import FunctionExpr, constant, eval_log, evaluate, qscale
from .nevanlinna import (
    characteristic,
    count_zeros,
    deficiency,
    growth_series,
    proximity,
    tail_stat,
    tail_window,
)
from .operators import equation_residual, sample_points
from .parser import parse
from .reduction import (
    build_Ck,
    equation_from_base,
    format_monomials,
    identity_residual,
    reduce_base,
    reduced_coefficients,
)
from .scenario import Scenario, _split, load_scenario
from .solvers import delta_to_shift, iterate_lattice, ode_base, solution_growth

__all__ = ["Check", "RunResult", "run", "verify", "render_report", "evaluate_check"]

CHECK_HEADER = ["analysis", "name", "file", "where", "expr", "stat", "trim", "op",
                "threshold", "hard", "value", "verdict"]
LATTICE_TOL = 1e-6


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# column expressions

_FUNCS = {
    "log": np.log, "log1p": np.log1p, "log2": np.log2, "exp": np.exp, "sqrt": np.sqrt,
    "abs": np.abs, "isnan": lambda v: np.isnan(v).astype(float),
    "maximum": np.maximum, "minimum": np.minimum,
}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


def column_expr(text, table):
    """Evaluate an arithmetic expression over named CSV columns (``^`` is a power)."""
    tree = ast.parse(text.replace("^", "**"), mode="eval")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return math.pi
            if node.id not in table:
                raise ValueError(f"unknown column {node.id!r}")
            return table[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            return _FUNCS[node.func.id](*[ev(a) for a in node.args])
        raise ValueError(f"unsupported expression element in {text!r}")

    with np.errstate(all="ignore"):
        return np.asarray(ev(tree), dtype=float)


def read_table(path, where=""):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    for cond in _split(where, "&"):
        col, _, want = cond.partition("=")
        i = header.index(col.strip())
        body = [row for row in body if row[i] == want.strip()]
    cols = {}
    for i, name in enumerate(header):
        try:
            cols[name] = np.array([float(row[i]) for row in body])
        except ValueError:
            pass
    return cols


def _stat(stat, values, trim, table, expr_text):
    v = np.asarray(values, dtype=float)
    if stat == "count":
        return float(v.size)
    if v.size == 0:
        return math.nan
    finite = v[np.isfinite(v)]
    if stat == "max":
        return float(np.max(v)) if not np.any(np.isnan(v)) else math.nan
    if stat == "min":
        return float(np.min(v)) if not np.any(np.isnan(v)) else math.nan
    if stat in ("tail_max", "tail_min"):
        if finite.size == 0:
            return math.nan
        return tail_stat(v, stat[5:], trim)[1]
    if stat == "decile_max":
        k = max(1, int(math.ceil(0.1 * v.size)))
        return float(np.max(v[-k:]))
    if stat == "tail_increasing":
        tail = v[tail_window(v.size)]
        ok = tail.size > 1 and np.all(np.diff(tail) > -1e-9 * np.abs(tail[1:])) and tail[-1] > tail[0]
        return float(bool(ok))
    if stat == "select_p":
        p = table["p"]
        for cand in np.unique(p):
            if tail_stat(v[p == cand], "max", trim)[1] < 1.0:
                return float(cand)
        return math.nan
    raise ValueError(f"unknown statistic {stat!r}")


def _compare(op, value, threshold):
    if op == "info":
        return "INFO"
    if math.isnan(value):
        return "FAIL"
    ok = {"<": value < threshold, "<=": value <= threshold, ">": value > threshold,
          ">=": value >= threshold, "==": value == threshold}[op]
    return "PASS" if ok else "FAIL"


@dataclass
class Check:
    analysis: str
    name: str
    file: str
    where: str
    expr: str
    stat: str
    op: str
    threshold: float
    hard: bool = False
    trim: float = 0.0
    value: float = math.nan
    verdict: str = ""

    def row(self):
        return [self.analysis, self.name, self.file, self.where, self.expr, self.stat,
                fmt(self.trim), self.op, fmt(self.threshold), str(int(self.hard)),
                fmt(self.value), self.verdict]

    @classmethod
    def from_row(cls, row):
        d = dict(zip(CHECK_HEADER, row))
        return cls(d["analysis"], d["name"], d["file"], d["where"], d["expr"], d["stat"],
                   d["op"], float(d["threshold"]), d["hard"] == "1", float(d["trim"]),
                   float(d["value"]), d["verdict"])

    @property
    def failed(self):
        return self.verdict in ("FAIL", "ERROR")


def evaluate_check(check, out_dir):
    """Recompute ``(value, verdict)`` of a check from the data files."""
    if check.stat == "error":
        return math.nan, "ERROR"
    table = read_table(os.path.join(out_dir, check.file), check.where)
    values = column_expr(check.expr, table)
    value = _stat(check.stat, values, check.trim, table, check.expr)
    return value, _compare(check.op, value, check.threshold)


def checks_csv(checks):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CHECK_HEADER)
    for c in checks:
        w.writerow(c.row())
    return buf.getvalue()


def render_report(name, digest, description, checks):
    """Plain-text summary; a pure function of its arguments."""
    lines = [f"scenario: {name}", f"hash: {digest}"]
    if description:
        lines.append(f"description: {description}")
    current = None
    for c in checks:
        if c.analysis != current:
            current = c.analysis
            lines += ["", f"[{current}]"]
        tag = "hard" if c.hard else "soft"
        if c.stat == "error":
            lines.append(f"  ERROR {tag}  {c.name}")
            continue
        what = f"{c.stat}({c.expr}{' | ' + c.where if c.where else ''})"
        cmp = "" if c.op == "info" else f" {c.op} {format(c.threshold, '.6g')}"
        lines.append(f"  {c.verdict:<5} {tag}  {c.name}: {what} = {format(c.value, '.6g')}{cmp}")
    hard = sum(c.failed and c.hard for c in checks)
    soft = sum(c.failed and not c.hard for c in checks)
    lines += ["", f"summary: {len(checks)} checks, {hard} hard failures, {soft} soft failures",
              f"exit: {int(hard > 0)}"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# running a scenario


@dataclass
class RunResult:
    out_dir: str
    checks: list
    exit_code: int
    report: str


class _Context:
    def __init__(self, sc: Scenario, out_dir):
        self.sc = sc
        self.out = out_dir
        self.domain = sc.domain
        self.tol = sc.number("tol")
        self.rtol = sc.number("residual_tol")
        self.trim = sc.number("trim")
        self.seed = int(sc.settings["seed"])
        self.sols = [parse(t, self.domain) for t in sc.solution_texts]
        if sc.from_base:
            self.A = equation_from_base(self.sols, sc.operator, sc.q)
        else:
            self.A = [parse(t, self.domain) for t in sc.coefficient_texts]
        self.funcs = {f"A{j}": a for j, a in enumerate(self.A)}
        self.funcs.update({f"f{k + 1}": f for k, f in enumerate(self.sols)})
        self.checks = []

    def fn(self, ref):
        f = self.funcs.get(ref)
        if f is None:
            f = parse(ref, self.domain)
        return f if isinstance(f, FunctionExpr) else constant(f, self.domain)

    def write(self, name, text):
        with open(os.path.join(self.out, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def add(self, analysis, name, file, expr, stat, op, threshold, where="", hard=False, trim=0.0):
        c = Check(analysis, name, file, where, expr, stat, op, float(threshold), hard, float(trim))
        c.value, c.verdict = evaluate_check(c, self.out)
        self.checks.append(c)


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _tag(sid):
    return sid.replace(":", "_")


def _num(text):
    return complex(evaluate(parse(text), np.array([0.0]))[0])


def _residual(ctx, sid, opts):
    samples = sample_points(ctx.domain, ctx.seed)
    rows = []
    labels = []
    for k, f in enumerate(ctx.sols):
        rep = equation_residual(ctx.A, ctx.sc.operator, f, samples, ctx.sc.q)
        lab = f"f{k + 1}"
        labels.append((lab, rep.trivial))
        rows += [(lab, z.real, z.imag, r) for z, r in zip(rep.samples, rep.residuals)]
    name = f"{_tag(sid)}.csv"
    ctx.write(name, _rows_csv(["solution", "x", "y", "residual"], rows))
    for lab, trivial in labels:
        if trivial:
            continue
        ctx.add(sid, f"{lab} solves the equation", name, "residual", "max", "<", ctx.rtol,
                where=f"solution={lab}", hard=True)


def _growth(ctx, sid, opts):
    grid = ctx.sc.grid((sid, opts))
    adm = opts["admissibility"] == "yes" or (opts["admissibility"] == "auto" and ctx.domain == "disc")
    for ref in _split(opts["functions"], ","):
        f = ctx.fn(ref)
        tag = ref if ref in ctx.funcs else f"expr{_split(opts['functions'], ',').index(ref)}"
        series = growth_series(f, grid, ctx.tol)
        name = f"{_tag(sid)}_{tag}.csv"
        ctx.write(name, series.to_csv())
        ctx.add(sid, f"T(r, {ref}) at the largest radius", name, "T", "max", "info", 0)
        if adm:
            ctx.add(sid, f"{ref} admissible: tail size", name, "T/(-log1p(-r))", "tail_max", ">", 1.0)
            ctx.add(sid, f"{ref} admissible: tail trend", name, "T/(-log1p(-r))",
                    "tail_increasing", "==", 1.0)
        if opts["zero_counts"] == "yes":
            zname = f"{_tag(sid)}_{tag}_zeros.csv"
            ctx.write(zname, _rows_csv(["r", "n"], [(r, count_zeros(f, 0, r)) for r in grid]))
            ctx.add(sid, f"n(r, 1/{ref}) at the largest radius", zname, "n", "max", "info", 0)


def _dominance(ctx, sid, opts):
    grid = ctx.sc.grid((sid, opts))
    for kind in _split(opts["kinds"], ","):
        rep = find_p(ctx.A, kind, grid, ctx.trim, min(ctx.tol * 100, 1e-6))
        name = f"{_tag(sid)}_{kind}.csv"
        ctx.write(name, rep.to_csv())
        if opts["expect_p"]:
            ctx.add(sid, f"{kind}: selected p", name, "ratio", "select_p", "==",
                    int(opts["expect_p"]), trim=ctx.trim)
        else:
            ctx.add(sid, f"{kind}: selected p", name, "ratio", "select_p", "info", 0, trim=ctx.trim)
        for p in sorted(rep.ratios):
            ctx.add(sid, f"{kind}: tail limsup for p={p}", name, "ratio", "tail_max", "info", 0,
                    where=f"p={p}", trim=ctx.trim)


def _reduce(ctx, sid, opts):
    sc = ctx.sc
    n = len(ctx.A)
    base = ode_base(ctx.A, ctx.domain) if opts["base"] == "numeric" else ctx.sols[:n]
    table = reduce_base(base, sc.operator, sc.q)
    reduced_coefficients(ctx.A, table)
    ps = range(n) if opts["p"] == "all" else [int(p) for p in _split(opts["p"], ",")]
    if opts["lattice"]:
        z0 = _num(opts["lattice"])
        k = np.arange(6)
        samples = z0 + k if sc.operator == "delta" else z0 * sc.q ** k
        tol = LATTICE_TOL
    else:
        samples = sample_points(ctx.domain, ctx.seed)
        tol = ctx.rtol
    rows = []
    lines = []
    for p in ps:
        lines += format_monomials(build_Ck(n, p, table))
        res = identity_residual(ctx.A, table, p, samples=samples)
        rows += [(str(p), z.real, z.imag, r) for z, r in zip(res.samples, res.residuals)]
    ctx.write(f"{_tag(sid)}_Ck.txt", "\n".join(lines) + "\n")
    name = f"{_tag(sid)}.csv"
    ctx.write(name, _rows_csv(["p", "x", "y", "residual"], rows))
    for p in ps:
        ctx.add(sid, f"reduction identity for p={p}", name, "residual", "max", "<", tol,
                where=f"p={p}", hard=True)


def _deficiency(ctx, sid, opts):
    grid = ctx.sc.grid((sid, opts))
    f = ctx.fn(opts["function"])
    rows = []
    values = _split(opts["values"], ",")
    for v in values:
        a = math.inf if v == "inf" else _num(v)
        a = a.real if isinstance(a, complex) and a.imag == 0 else a
        rep = deficiency(f, a, grid, ctx.tol, ctx.trim)
        rows += [(v, r, x) for r, x in zip(rep.r, rep.ratios)]
    name = f"{_tag(sid)}.csv"
    ctx.write(name, _rows_csv(["a", "r", "ratio"], rows))
    for v in values:
        ctx.add(sid, f"deficiency estimate at a={v}", name, "ratio", "tail_min", "info", 0,
                where=f"a={v}", trim=ctx.trim)


def _curve(ctx, sid, opts):
    grid = ctx.sc.grid((sid, opts))
    p = int(opts["p"])
    eta = tuple(float(e) for e in _split(opts["eta"], ",")) or None
    rep = curve_dominance(ctx.A, p, eta, grid=grid, trim=ctx.trim)
    name = f"{_tag(sid)}.csv"
    rows = [(r, z.real, z.imag, x, str(int(fl)))
            for r, z, x, fl in zip(rep.r, rep.points, rep.ratios, rep.flags)]
    ctx.write(name, _rows_csv(["r", "x", "y", "ratio", "jump"], rows))
    ctx.add(sid, f"curve condition for p={p}", name, "ratio", "tail_max", "<", 1.0, trim=ctx.trim)
    ctx.add(sid, "branch jumps along the maximum curve", name, "jump", "max", "==", 0)


def _conclusion(ctx, sid, opts):
    grid = ctx.sc.grid((sid, opts))
    f = ctx.fn(opts["solution"])
    ref = ctx.fn(opts["reference"])
    s = growth_series(f, grid, ctx.tol)
    rs = growth_series(ref, grid, ctx.tol)
    window = tuple(float(v) for v in _split(opts["window"], ","))
    lower = float(opts["lower"]) if opts["lower"] else None
    tab = conclusion_check(s, rs, opts["kind"], window, lower, ctx.trim)
    name = f"{_tag(sid)}.csv"
    ctx.write(name, tab.to_csv())
    label = f"log T(r, {opts['solution']}) / {'T' if opts['kind'] == 'characteristic' else 'log M'}" \
            f"(r, {opts['reference']})"
    if lower is not None:
        ctx.add(sid, f"{label} bounded below", name, "ratio", "tail_min", ">=", lower, trim=ctx.trim)
    else:
        ctx.add(sid, f"{label} above window", name, "ratio", "tail_min", ">=", window[0], trim=ctx.trim)
        ctx.add(sid, f"{label} below window", name, "ratio", "tail_max", "<=", window[1], trim=ctx.trim)


def _solve(ctx, sid, opts, dump_rays=None):
    sc = ctx.sc
    if sc.operator == "derivative":
        grid = ctx.sc.grid((sid, opts))
        ic = [_num(v) for v in _split(opts["ic"], ",")]
        dump = dump_rays or opts["dump_rays"] == "yes"
        g = solution_growth(ctx.A, grid, ic, domain=ctx.domain, keep_rays=bool(dump))
        name = f"{_tag(sid)}.csv"
        ctx.write(name, g.to_csv())
        ctx.add(sid, "no truncated radii", name, "isnan(T)", "max", "==", 0)
        if dump:
            thetas, L = g.meta["rays"]
            rows = [(t, r, v) for t, row in zip(thetas, L) for r, v in zip(grid, row)]
            ctx.write(f"{_tag(sid)}_rays.csv", _rows_csv(["theta", "r", "log_abs_f"], rows))
        if opts["compare"]:
            ref = growth_series(ctx.fn(opts["compare"]), grid, ctx.tol)
            cname = f"{_tag(sid)}_compare.csv"
            ctx.write(cname, _rows_csv(["r", "T", "T_ref"], zip(grid, g.T, ref.T)))
            ctx.add(sid, f"agrees with T(r, {opts['compare']})", cname,
                    "abs(T - T_ref)/T_ref", "max", "<", 2e-2)
        return
    kind = "shift" if sc.operator == "delta" else "qshift"
    n = len(ctx.A)
    B = delta_to_shift(ctx.A)
    z0 = _num(opts["z0"])
    K = int(opts["steps"])
    pts = z0 + np.arange(K + n) if kind == "shift" else z0 * sc.q ** np.arange(K + n)
    ref = None
    if opts["seeds_from"]:
        lv = eval_log(ctx.fn(opts["seeds_from"]), pts)
        ref = np.asarray(lv.logmag, dtype=float)
        seeds = [(float(lv.logmag[i]), float(lv.phase[i])) for i in range(n)]
    else:
        seeds = [_num(v) for v in _split(opts["seeds"], ",")]
    sol = iterate_lattice(B, kind, z0, K, seeds, sc.q)
    name = f"{_tag(sid)}.csv"
    header = ["k", "x", "y", "logmag", "phase"] + (["ref_logmag"] if ref is not None else [])
    rows = []
    for k, (z, lm, ph) in enumerate(zip(sol.points, sol.logmag, sol.phase)):
        rows.append((str(k), z.real, z.imag, lm, ph) + ((ref[k],) if ref is not None else ()))
    ctx.write(name, _rows_csv(header, rows))
    ctx.add(sid, "log|f| at the last lattice point", name, "logmag", "max", "info", 0)
    if ref is not None:
        ctx.add(sid, f"lattice values match {opts['seeds_from']}", name,
                "abs(logmag - ref_logmag)/maximum(1, abs(ref_logmag))", "max", "<", 1e-8, hard=True)


def _qratio(ctx, sid, opts):
    grid = ctx.sc.grid((sid, opts))
    f = ctx.fn(opts["function"])
    q = _num(opts["q"])
    q = q.real if q.imag == 0 else q
    g = qscale(f, q) / f
    rows = [(r, proximity(g, r, ctx.tol), characteristic(f, r, ctx.tol)) for r in grid]
    name = f"{_tag(sid)}.csv"
    ctx.write(name, _rows_csv(["r", "m", "T"], rows))
    ctx.add(sid, f"m(r, f(qz)/f(z)) / T(r, f) on the top decile", name, "m/T", "decile_max",
            "<=", float(opts["max"]))


def _user_check(ctx, sid, opts):
    label = sid.partition(":")[2] or opts["expr"]
    ctx.add("checks", label, opts["file"], opts["expr"], opts["stat"], opts["op"],
            float(opts["threshold"]), where=opts["where"], hard=opts["hard"] == "yes",
            trim=float(opts["trim"]))


_RUNNERS = {
    "residual": _residual, "growth": _growth, "dominance": _dominance, "reduce": _reduce,
    "deficiency": _deficiency, "curve": _curve, "conclusion": _conclusion, "solve": _solve,
    "qratio": _qratio,
}


def _error(ctx, sid, exc, hard=True):
    msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    ctx.checks.append(Check(sid, msg, "", "", "", "error", "info", 0.0, hard, 0.0,
                            math.nan, "ERROR"))


def run(scenario, out_dir=None, only=None, dump_rays=None):
    """Run every analysis of a scenario and write its artifacts.

    Failures inside one analysis are recorded as hard ERROR rows and the
    remaining analyses still run.  ``only`` restricts execution to the
    named analysis types.
    """
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    out_dir = out_dir or sc.settings["out"] or os.path.join("out", sc.name)
    os.makedirs(out_dir, exist_ok=True)
    ini = sc.to_ini()
    with open(os.path.join(out_dir, "scenario.ini"), "w", encoding="utf-8") as fh:
        fh.write(ini)
    try:
        ctx = _Context(sc, out_dir)
    except Exception as exc:  # noqa: BLE001 - recorded, not raised
        ctx = _Context.__new__(_Context)
        ctx.checks, ctx.out = [], out_dir
        _error(ctx, "setup", exc)
        sections = []
    else:
        sections = sc.sections
    checks_after_analyses = []
    for sid, opts in sections:
        kind = sid.split(":")[0]
        if only and kind not in only and kind != "check":
            continue
        if kind == "check":
            checks_after_analyses.append((sid, opts))
            continue
        try:
            if kind == "solve":
                _solve(ctx, sid, opts, dump_rays)
            else:
                _RUNNERS[kind](ctx, sid, opts)
        except Exception as exc:  # noqa: BLE001 - isolate per-analysis failures
            _error(ctx, sid, exc)
    for sid, opts in checks_after_analyses:
        try:
            _user_check(ctx, sid, opts)
        except Exception as exc:  # noqa: BLE001
            _error(ctx, "checks", exc, opts["hard"] == "yes")
    ctx.write("checks.csv", checks_csv(ctx.checks))
    report = render_report(sc.name, sc.hash, sc.settings["description"], ctx.checks)
    ctx.write("report.txt", report)
    code = int(any(c.failed and c.hard for c in ctx.checks))
    return RunResult(out_dir, ctx.checks, code, report)


def verify(out_dir):
    """Recompute every verdict from the data files.

    Returns ``(ok, messages)``; ``ok`` is False when a recomputed value or
    verdict differs from ``checks.csv`` or the report differs from the one
    rendered from the checks.
    """
    msgs = []
    sc = load_scenario(os.path.join(out_dir, "scenario.ini"))
    with open(os.path.join(out_dir, "checks.csv"), encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != CHECK_HEADER:
        return False, ["checks.csv: unexpected header"]
    checks = [Check.from_row(r) for r in rows[1:]]
    for c in checks:
        value, verdict = evaluate_check(c, out_dir)
        if fmt(value) != fmt(c.value) or verdict != c.verdict:
            msgs.append(f"{c.analysis}: {c.name}: recorded {fmt(c.value)} {c.verdict}, "
                        f"recomputed {fmt(value)} {verdict}")
    with open(os.path.join(out_dir, "report.txt"), encoding="utf-8") as fh:
        report = fh.read()
    if report != render_report(sc.name, sc.hash, sc.settings["description"], checks):
        msgs.append("report.txt does not match the report rendered from checks.csv")
    return not msgs, msgs
