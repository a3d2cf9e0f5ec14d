"""Order reduction for linear differential, difference and q-difference
equations.

Given a solution base f_{0,1}, ..., f_{0,n} of

    L^n f + A_{n-1} L^{n-1} f + ... + A_0 f = 0,

the triangular family f_{q,s} = L(f_{q-1,s+1} / f_{q-1,1}) solves an
equation of order n - q with coefficients A_{q,j}.  Expanding the last
reduced equation back down to the original coefficients gives, for each
0 <= p <= n-1,

    -A_p = C_n + A_{n-1} C_{n-1} + ... + A_{p+1} C_{p+1},

where each C_k is a sum of monomials K * prod_m [L^{l_m} f_{m,1}] / f_{m,1}
with l_0 + ... + l_p = k - p and positive integer K.  For the difference
kinds the numerator of level m is evaluated at E^{s_m} z and the
denominator at E^{p-m} z (E: z -> z+1 or z -> qz); for d/dz all shifts are
irrelevant.
"""
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .funcexpr import Const, FunctionExpr, constant, eval_log_many
from .operators import (
    SKIP_LOG,
    Operator,
    equation_residual,
    sample_points,
)

__all__ = [
    "DegenerateBaseError",
    "ReductionCheckError",
    "Monomial",
    "ReductionTable",
    "IdentityResult",
    "reduce_base",
    "reduced_coefficients",
    "build_Ck",
    "identity_residual",
    "equation_from_base",
    "format_monomials",
]


class DegenerateBaseError(ValueError):
    pass


class ReductionCheckError(ArithmeticError):
    """A reduced equation failed its numeric self-check."""

    def __init__(self, message, point, residual):
        super().__init__(f"{message}: residual {residual:.3g} at z = {point}")
        self.point = point
        self.residual = residual


@dataclass(frozen=True)
class Monomial:
    """One term K * prod_m L^{l_m} f_{m,1}(E^{s_m} z) / f_{m,1}(E^{p-m} z)."""

    k: int
    ls: tuple
    shifts: tuple
    K: int

    def line(self):
        return f"{self.k}; {','.join(str(l) for l in self.ls)}; {self.K}"


@dataclass
class ReductionTable:
    kind: str
    n: int
    base: list
    f: dict
    q: complex = None
    A: dict = None
    p: int = None
    C: dict = None
    op: Operator = field(default=None, repr=False)

    @property
    def domain(self):
        return self.base[0].domain

    def leading(self, m):
        return self.f[(m, 1)]


def _probe_points(domain, count=20, seed=42):
    rng = np.random.default_rng(seed + 1)
    rmax = 0.7 if domain == "disc" else 2.0
    rad = rmax * np.sqrt(rng.random(count))
    return rad * np.exp(2j * np.pi * rng.random(count))


def _identically_zero(f):
    if isinstance(f.node, Const):
        return f.node.c == 0
    lv = eval_log_many([f], _probe_points(f.domain))[0]
    lm = np.asarray(lv.logmag, dtype=float)
    return bool(np.all(np.nan_to_num(lm, nan=-np.inf) < np.log(1e-300)))


def reduce_base(base, kind="derivative", q=None):
    """Build the triangular family f_{q,s}, 0 <= q <= n-1, 1 <= s <= n-q."""
    base = list(base)
    if not base:
        raise ValueError("empty solution base")
    domain = base[0].domain
    if any(b.domain != domain for b in base):
        raise ValueError("base mixes domains")
    if len(set(base)) != len(base):
        raise ValueError("base functions must be pairwise distinct")
    op = Operator(kind, q)
    n = len(base)
    f = {(0, s): base[s - 1] for s in range(1, n + 1)}
    for lvl in range(1, n):
        lead = f[(lvl - 1, 1)]
        if _identically_zero(lead):
            raise DegenerateBaseError("degenerate base ordering; permute base")
        for s in range(1, n - lvl + 1):
            f[(lvl, s)] = op.apply(f[(lvl - 1, s + 1)] / lead, 1)
    if _identically_zero(f[(n - 1, 1)]):
        raise DegenerateBaseError("degenerate base ordering; permute base")
    return ReductionTable(kind, n, base, f, op.q, op=op)


def _as_exprs(A, domain):
    return [a if isinstance(a, FunctionExpr) else constant(a, domain) for a in A]


def _level_factor(table, m, l, s):
    """L^l f_{m,1}(E^s z) / f_{m,1}(E^{n-m} z): the factor produced when
    reducing from level m to level m+1."""
    op = table.op
    lead = table.leading(m)
    num = op.step(op.apply(lead, l), s)
    if not op.is_difference:
        return num / lead
    return num / op.step(lead, table.n - m)


def reduced_coefficients(A, table, check=True, samples=None):
    """Coefficients A_{q,j} of the reduced equations.

    A_{q,j} = sum_{k=j+1}^{n-q+1} C(k, j+1) A_{q-1,k} * F_{q-1}(k-j-1, j+1)
    with A_{q-1, n-q+1} = 1 and F the level factor above.  With ``check``,
    every f_{q,s} is verified against its reduced equation at 50 points.
    """
    n = table.n
    domain = table.domain
    A = _as_exprs(A, domain)
    if len(A) != n:
        raise ValueError(f"expected {n} coefficients, got {len(A)}")
    one = constant(1, domain)
    coef = {(0, j): A[j] for j in range(n)}
    coef[(0, n)] = one
    for lvl in range(1, n):
        top = n - lvl + 1
        for j in range(n - lvl):
            acc = None
            for k in range(j + 1, top + 1):
                term = comb(k, j + 1) * coef[(lvl - 1, k)] * _level_factor(table, lvl - 1, k - j - 1, j + 1)
                acc = term if acc is None else acc + term
            coef[(lvl, j)] = acc
        coef[(lvl, n - lvl)] = one
    table.A = coef
    if check:
        pts = samples if samples is not None else sample_points(domain)[:50]
        for lvl in range(1, n):
            order = n - lvl
            for s in range(1, order + 1):
                rep = equation_residual([coef[(lvl, j)] for j in range(order)], table.kind,
                                        table.f[(lvl, s)], pts, table.q)
                if not rep.max_residual < 1e-8:
                    i = int(np.nanargmax(rep.residuals))
                    raise ReductionCheckError(
                        f"reduced equation of order {order} not satisfied by f_{{{lvl},{s}}}",
                        complex(pts[i]), float(rep.residuals[i]))
    return coef


def _expand(n, p):
    """Expand sum_i A_{p,i} L^i f_{p,1}/f_{p,1} into original coefficients.

    Returns {k: {((l_0, s_0), ..., (l_p, s_p)): integer}} where the term is
    A_{0,k} times the product of level factors.
    """
    # A_{q,j} as {(k0, factors): coefficient}
    level = {k: {(k, ()): 1} for k in range(n + 1)}
    for lvl in range(1, p + 1):
        top = n - lvl + 1
        nxt = {}
        for j in range(n - lvl + 1):
            acc = {}
            for k in range(j + 1, top + 1):
                c = comb(k, j + 1)
                fac = (k - j - 1, j + 1)
                for (k0, fs), v in level[k].items():
                    key = (k0, fs + (fac,))
                    acc[key] = acc.get(key, 0) + c * v
            nxt[j] = acc
        level = nxt
    out = {}
    for i in range(n - p + 1):
        for (k0, fs), v in level[i].items():
            bucket = out.setdefault(k0, {})
            key = fs + ((i, 0),)
            bucket[key] = bucket.get(key, 0) + v
    return out


def build_Ck(n, p, table=None):
    """Monomial lists of C_{p+1}, ..., C_n generated by the reduction recursion.

    Returns ``{k: [Monomial, ...]}``.  ``table`` is only used to validate
    that it covers the requested rows.
    """
    if not 0 <= p <= n - 1:
        raise ValueError(f"need 0 <= p <= n-1, got n={n}, p={p}")
    if table is not None:
        if table.n != n:
            raise ValueError("table order does not match n")
        table.p = p
    expanded = _expand(n, p)
    # the A_{0,p} term is a single all-zero monomial; dividing by it moves
    # the level-m denominators to E^{p-m} z
    lead = expanded[p]
    (lead_key, lead_val), = lead.items()
    assert lead_val == 1 and all(l == 0 for l, _ in lead_key)
    C = {}
    for k in range(p + 1, n + 1):
        mons = []
        for fs, v in sorted(expanded.get(k, {}).items()):
            ls = tuple(l for l, _ in fs)
            shifts = tuple(s for _, s in fs)
            mons.append(Monomial(k, ls, shifts, v))
        mons.sort(key=lambda m: m.ls, reverse=True)
        C[k] = mons
    if table is not None:
        table.C = C
    return C


def format_monomials(C):
    """Text lines ``k; l0,...,lp; K``, highest k first."""
    lines = []
    for k in sorted(C, reverse=True):
        lines.extend(m.line() for m in C[k])
    return lines


@dataclass
class IdentityResult:
    max_residual: float
    residuals: np.ndarray
    samples: np.ndarray
    skipped: list

    def __float__(self):
        return float(self.max_residual)


def _monomial_factor_trees(table, p, C):
    """Numerator and denominator trees for every factor used by C."""
    op = table.op
    need = {}
    for mons in C.values():
        for mon in mons:
            for m, (l, s) in enumerate(zip(mon.ls, mon.shifts)):
                lead = table.leading(m)
                den_shift = p - m
                key = (m, l, s)
                if key not in need:
                    need[key] = (op.step(op.apply(lead, l), s), op.step(lead, den_shift))
    return need


def identity_residual(A, table, p, samples=None, precheck=True):
    """max over samples of |A_p + C_n + sum_{j=p+1}^{n-1} A_j C_j| / (1 + |A_p|).

    Samples where some denominator is below 1e-120 (or an evaluation is not
    finite) are skipped and reported.
    """
    n = table.n
    domain = table.domain
    A = _as_exprs(A, domain)
    if samples is None:
        samples = sample_points(domain)
    samples = np.asarray(samples, dtype=complex)
    if precheck:
        for b in table.base:
            rep = equation_residual(A, table.kind, b, samples, table.q)
            if not rep.max_residual < 1e-8:
                raise ValueError(
                    f"base element {b.render()} does not solve the equation "
                    f"(relative residual {rep.max_residual:.3g})")
    C = table.C if table.C is not None and table.p == p else build_Ck(n, p, table)
    trees = _monomial_factor_trees(table, p, C)
    keys = list(trees)
    flat = []
    for key in keys:
        flat.extend(trees[key])
    logs = eval_log_many(flat + A, samples)
    bad = np.zeros(samples.shape, dtype=bool)
    factors = {}
    for i, key in enumerate(keys):
        num, den = logs[2 * i], logs[2 * i + 1]
        bad |= ~(np.asarray(den.logmag) >= SKIP_LOG) | ~np.isfinite(den.logmag)
        bad |= np.isnan(num.logmag) | (num.logmag == np.inf)
        with np.errstate(invalid="ignore", over="ignore"):
            factors[key] = np.exp(num.logmag - den.logmag + 1j * (num.phase - den.phase))
    Avals = []
    for lv in logs[len(flat):]:
        bad |= ~np.isfinite(lv.logmag) & (lv.logmag != -np.inf)
        with np.errstate(invalid="ignore", over="ignore"):
            Avals.append(np.exp(lv.logmag + 1j * lv.phase))

    def value_of(k):
        total = np.zeros(samples.shape, dtype=complex)
        for mon in C[k]:
            term = np.full(samples.shape, float(mon.K), dtype=complex)
            for m, (l, s) in enumerate(zip(mon.ls, mon.shifts)):
                term = term * factors[(m, l, s)]
            total = total + term
        return total

    with np.errstate(invalid="ignore", over="ignore"):
        total = Avals[p] + value_of(n)
        for j in range(p + 1, n):
            total = total + Avals[j] * value_of(j)
        res = np.abs(total) / (1.0 + np.abs(Avals[p]))
    bad |= ~np.isfinite(res)
    res = np.where(bad, np.nan, res)
    good = res[~bad]
    mx = float(np.max(good)) if good.size else float("nan")
    return IdentityResult(mx, res, samples, [complex(s) for s in samples[bad]])


def _det(M):
    """Determinant of a small square matrix of FunctionExpr by cofactors."""
    size = len(M)
    if size == 1:
        return M[0][0]
    total = None
    for c in range(size):
        minor = [row[:c] + row[c + 1:] for row in M[1:]]
        term = M[0][c] * _det(minor)
        if c % 2:
            term = -term
        total = term if total is None else total + term
    return total


def equation_from_base(base, kind="derivative", q=None):
    """Coefficients A_0..A_{n-1} of the monic equation solved by ``base``.

    Solves L^n f_i + sum_k A_k L^k f_i = 0 (i = 1..n) symbolically by
    Cramer's rule.
    """
    op = Operator(kind, q)
    n = len(base)
    M = [[op.apply(b, k) for k in range(n)] for b in base]
    rhs = [-op.apply(b, n) for b in base]
    W = _det(M)
    if isinstance(W.node, Const) and W.node.c == 0:
        raise DegenerateBaseError("base is linearly dependent")
    out = []
    for k in range(n):
        Mk = [row[:k] + [rhs[i]] + row[k + 1:] for i, row in enumerate(M)]
        out.append(_det(Mk) / W)
    return out
