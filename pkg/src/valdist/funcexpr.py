"""Immutable expression trees for analytic functions on the plane or the disc.

A :class:`FunctionExpr` wraps a tree of :class:`Node` objects together
with a domain tag (``"plane"`` or ``"disc"``).  Trees support exact
symbolic differentiation, shifts ``f(z + c)`` and q-scalings ``f(qz)``,
vectorised evaluation, and a log-domain evaluation that keeps
``log|f(z)|`` finite for functions such as ``exp(exp(z))`` whose values
overflow double precision.

Nodes are built through simplifying constructors (``make_sum``,
``make_prod`` ...) which flatten nested sums/products and fold constants,
so structurally equal inputs always produce structurally equal trees.
"""
import cmath
import math

import numpy as np

from . import special

__all__ = [
    "PLANE",
    "DISC",
    "DomainError",
    "LogValue",
    "FunctionExpr",
    "variable",
    "constant",
    "fexp",
    "fgamma",
    "fmittag_leffler",
    "product_family",
    "zero_product",
    "differentiate",
    "shift",
    "qscale",
    "delta",
    "delta_q",
    "evaluate",
    "eval_log",
    "evaluate_many",
    "eval_log_many",
]

PLANE = "plane"
DISC = "disc"
_DOMAINS = (PLANE, DISC)


class DomainError(ValueError):
    """Raised on plane/disc mismatches and evaluation outside the domain."""


class LogValue:
    """``log|f|`` and ``arg f`` of a (possibly huge or tiny) complex value.

    ``logmag`` is ``-inf`` for an exact zero and ``+inf`` when even the
    logarithm overflowed.  The phase is not reduced modulo 2 pi.
    """

    __slots__ = ("logmag", "phase")

    def __init__(self, logmag, phase):
        self.logmag = logmag
        self.phase = phase

    def value(self):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self.logmag) * np.exp(1j * np.asarray(self.phase))

    def __mul__(self, other):
        return LogValue(self.logmag + other.logmag, self.phase + other.phase)

    def __truediv__(self, other):
        return LogValue(self.logmag - other.logmag, self.phase - other.phase)

    def __repr__(self):
        return f"LogValue(logmag={self.logmag!r}, phase={self.phase!r})"


def wrap_phase(p):
    """Reduce angles to (-pi, pi]."""
    p = np.asarray(p, dtype=float)
    out = np.remainder(p + np.pi, 2.0 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


# ---------------------------------------------------------------------------
# nodes


class Node:
    """Base class for immutable expression nodes.

    Subclasses define ``_fields`` (the structural key) and implement
    ``_value``, ``_log``, ``_derivative`` and ``_render``.
    """

    __slots__ = ("_key", "_hash")
    prec = 100  # rendering precedence

    def __init__(self, *key):
        self._key = key
        self._hash = hash((type(self).__name__,) + key)

    def __eq__(self, other):
        if self is other:
            return True
        return type(self) is type(other) and self._hash == other._hash and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{type(self).__name__}{self._key!r}"

    def children(self):
        return tuple(x for x in self._key if isinstance(x, Node))

    # evaluation with memoisation on (node, argument array)
    def value(self, z, memo):
        key = ("v", id(self), id(z))
        hit = memo.get(key)
        if hit is None:
            hit = (self, z, self._value(z, memo))
            memo[key] = hit
        return hit[2]

    def logval(self, z, memo):
        key = ("l", id(self), id(z))
        hit = memo.get(key)
        if hit is None:
            hit = (self, z, self._log(z, memo))
            memo[key] = hit
        return hit[2]

    def rebuild(self, fn):
        """Rebuild with ``fn`` applied to every child node."""
        return self

    def is_const(self):
        return False


def _log_of_values(v):
    v = np.asarray(v, dtype=complex)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(v)), np.angle(v)


class Const(Node):
    __slots__ = ()

    def __init__(self, c):
        c = complex(c)
        super().__init__(c)

    @property
    def c(self):
        return self._key[0]

    def is_const(self):
        return True

    def _value(self, z, memo):
        return np.full(np.shape(z), self.c, dtype=complex)

    def _log(self, z, memo):
        c = self.c
        lm = -np.inf if c == 0 else math.log(abs(c))
        return np.full(np.shape(z), lm), np.full(np.shape(z), cmath.phase(c))

    def _derivative(self):
        return ZERO

    def _render(self, zs):
        c = self.c
        if c.imag == 0:
            return repr(c.real)
        if c.real == 0:
            return f"{c.imag!r}i"
        return f"({c.real!r}+{c.imag!r}i)" if c.imag > 0 else f"({c.real!r}-{-c.imag!r}i)"

    @property
    def prec(self):
        c = self.c
        if c.imag == 0 and c.real >= 0:
            return 100
        if c.real == 0 and c.imag > 0:
            return 100
        if c.imag != 0 and c.real != 0:
            return 100  # parenthesised
        return 0


ZERO = Const(0)
ONE = Const(1)


class Var(Node):
    __slots__ = ()

    def __init__(self):
        super().__init__()

    def _value(self, z, memo):
        return np.asarray(z, dtype=complex)

    def _log(self, z, memo):
        return _log_of_values(z)

    def _derivative(self):
        return ONE

    def _render(self, zs):
        return zs


VAR = Var()


class Index(Node):
    """Summation/product index inside a family template."""

    __slots__ = ()

    def __init__(self, name):
        super().__init__(name)

    def is_const(self):
        return True  # constant with respect to z

    def _value(self, z, memo):
        raise ValueError(f"unbound index {self._key[0]!r}")

    _log = _value

    def _derivative(self):
        return ZERO

    def _render(self, zs):
        return self._key[0]


class Sum(Node):
    __slots__ = ()
    prec = 10

    def __init__(self, terms):
        super().__init__(tuple(terms))

    @property
    def terms(self):
        return self._key[0]

    def children(self):
        return self.terms

    def rebuild(self, fn):
        return make_sum([fn(t) for t in self.terms])

    def _value(self, z, memo):
        out = self.terms[0].value(z, memo)
        for t in self.terms[1:]:
            out = out + t.value(z, memo)
        return out

    def _log(self, z, memo):
        logs = [t.logval(z, memo) for t in self.terms]
        lm, ph = _logsumexp_complex(logs)
        # where every term is representable the direct sum keeps exact
        # cancellations (z - 1 at z = 1) that the log form cannot see
        peak = np.max([np.asarray(a, dtype=float) for a, _ in logs], axis=0)
        safe = np.isfinite(peak) & (peak < 650.0)
        if np.any(safe):
            with np.errstate(over="ignore", invalid="ignore"):
                direct = self.value(z, memo)
            dl, dp = _log_of_values(direct)
            ok = safe & np.isfinite(direct)
            lm = np.where(ok, dl, lm)
            ph = np.where(ok, dp, ph)
        return lm, ph

    def _derivative(self):
        return make_sum([differentiate_node(t) for t in self.terms])

    def _render(self, zs):
        parts = [self.terms[0]._render_in(zs, self.prec)]
        for t in self.terms[1:]:
            neg = _negated(t)
            if neg is not None:
                parts.append(" - " + neg._render_in(zs, self.prec + 1))
            else:
                parts.append(" + " + t._render_in(zs, self.prec + 1))
        return "".join(parts)


def _negated(t):
    """``u`` if ``t`` is structurally ``-1 * u`` (or a negative real constant)."""
    if isinstance(t, Const) and t.c.imag == 0 and t.c.real < 0:
        return Const(-t.c.real)
    if isinstance(t, Prod) and t.factors[0] == Const(-1):
        rest = t.factors[1:]
        return rest[0] if len(rest) == 1 else Prod(rest)
    return None


def _logsumexp_complex(logs):
    lms = np.array([np.asarray(lm, dtype=float) for lm, _ in logs])
    phs = np.array([np.asarray(ph, dtype=float) for _, ph in logs])
    peak = lms.max(axis=0)
    finite = np.isfinite(peak)
    safe_peak = np.where(finite, peak, 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        s = (np.exp(lms - safe_peak) * np.exp(1j * phs)).sum(axis=0)
        with np.errstate(divide="ignore"):
            lm = safe_peak + np.log(np.abs(s))
    ph = np.angle(s)
    lm = np.where(finite, lm, peak)
    ph = np.where(finite, ph, 0.0)
    if np.any(peak == np.inf):
        # an overflowing term: the sum is dominated by it
        idx = np.argmax(lms, axis=0)
        ph = np.where(peak == np.inf, np.take_along_axis(phs, idx[None], 0)[0], ph)
    return lm, ph


class Prod(Node):
    __slots__ = ()
    prec = 20

    def __init__(self, factors):
        super().__init__(tuple(factors))

    @property
    def factors(self):
        return self._key[0]

    def children(self):
        return self.factors

    def rebuild(self, fn):
        return make_prod([fn(t) for t in self.factors])

    def _value(self, z, memo):
        out = self.factors[0].value(z, memo)
        for t in self.factors[1:]:
            out = out * t.value(z, memo)
        return out

    def _log(self, z, memo):
        lm, ph = self.factors[0].logval(z, memo)
        for t in self.factors[1:]:
            a, b = t.logval(z, memo)
            lm = lm + a
            ph = ph + b
        return lm, ph

    def _derivative(self):
        fs = self.factors
        terms = []
        for i, f in enumerate(fs):
            d = differentiate_node(f)
            if d == ZERO:
                continue
            terms.append(make_prod(fs[:i] + (d,) + fs[i + 1:]))
        return make_sum(terms)

    def _render(self, zs):
        fs = self.factors
        if fs[0] == Const(-1) and len(fs) > 1:
            rest = Prod(fs[1:]) if len(fs) > 2 else fs[1]
            return "-" + rest._render_in(zs, 30)
        out = []
        for f in fs:
            p = 21 if isinstance(f, Quot) else self.prec
            out.append(f._render_in(zs, p))
        return "*".join(out)


class Quot(Node):
    __slots__ = ()
    prec = 20

    def __init__(self, num, den):
        super().__init__(num, den)

    @property
    def num(self):
        return self._key[0]

    @property
    def den(self):
        return self._key[1]

    def rebuild(self, fn):
        return make_quot(fn(self.num), fn(self.den))

    def _value(self, z, memo):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.num.value(z, memo) / self.den.value(z, memo)

    def _log(self, z, memo):
        a, b = self.num.logval(z, memo)
        c, d = self.den.logval(z, memo)
        with np.errstate(invalid="ignore"):
            return a - c, b - d

    def _derivative(self):
        n, d = self.num, self.den
        dn, dd = differentiate_node(n), differentiate_node(d)
        top = make_sum([make_prod([dn, d]), make_prod([Const(-1), n, dd])])
        return make_quot(top, make_pow(d, 2))

    def _render(self, zs):
        return self.num._render_in(zs, self.prec) + "/" + self.den._render_in(zs, self.prec + 1)


class Pow(Node):
    """``base ** exponent`` with a constant complex exponent, principal branch."""

    __slots__ = ()
    prec = 40

    def __init__(self, base, exponent):
        super().__init__(base, complex(exponent))

    @property
    def base(self):
        return self._key[0]

    @property
    def exponent(self):
        return self._key[1]

    def rebuild(self, fn):
        return make_pow(fn(self.base), self.exponent)

    def _int_exponent(self):
        e = self.exponent
        if e.imag == 0 and e.real == int(e.real) and abs(e.real) <= 64:
            return int(e.real)
        return None

    def _value(self, z, memo):
        b = self.base.value(z, memo)
        k = self._int_exponent()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if k is not None:
                return b ** k if k >= 0 else 1.0 / b ** (-k)
            return b ** self.exponent

    def _log(self, z, memo):
        lm, ph = self.base.logval(z, memo)
        e = self.exponent
        if self._int_exponent() is None:
            ph = wrap_phase(ph)
        with np.errstate(invalid="ignore"):
            if e.imag == 0:
                return e.real * lm, e.real * ph
            return e.real * lm - e.imag * ph, e.imag * lm + e.real * ph

    def _derivative(self):
        e = self.exponent
        db = differentiate_node(self.base)
        return make_prod([Const(e), make_pow(self.base, e - 1), db])

    def _render(self, zs):
        e = Const(self.exponent)
        es = e._render(zs)
        if e.prec < 100:
            es = "(" + es + ")"
        return self.base._render_in(zs, self.prec + 1) + "^" + es


class IndexPow(Node):
    """Power whose exponent depends on a family index (templates only)."""

    __slots__ = ()
    prec = 40

    def __init__(self, base, exponent):
        super().__init__(base, exponent)

    def rebuild(self, fn):
        return make_pow(fn(self._key[0]), fn(self._key[1]))

    def _value(self, z, memo):
        raise ValueError("index-dependent power outside a family")

    _log = _value

    def _derivative(self):
        base, e = self._key
        em1 = make_sum([e, Const(-1)])
        return make_prod([e, make_pow(base, em1), differentiate_node(base)])

    def _render(self, zs):
        base, e = self._key
        return base._render_in(zs, self.prec + 1) + "^" + e._render_in(zs, 100)


class Exp(Node):
    __slots__ = ()

    def __init__(self, arg):
        super().__init__(arg)

    @property
    def arg(self):
        return self._key[0]

    def rebuild(self, fn):
        return make_exp(fn(self.arg))

    def _value(self, z, memo):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self.arg.value(z, memo))

    def _log(self, z, memo):
        lm, ph = self.arg.logval(z, memo)
        with np.errstate(over="ignore", invalid="ignore"):
            mag = np.exp(lm)
            re = mag * np.cos(ph)
            im = mag * np.sin(ph)
        re = np.where(lm == -np.inf, 0.0, re)
        im = np.where(lm == -np.inf, 0.0, im)
        return re, im

    def _derivative(self):
        return make_prod([self, differentiate_node(self.arg)])

    def _render(self, zs):
        return f"exp({self.arg._render(zs)})"


class Affine(Node):
    """``child(a*z + b)``."""

    __slots__ = ()

    def __init__(self, child, a, b):
        super().__init__(child, complex(a), complex(b))

    @property
    def child(self):
        return self._key[0]

    def rebuild(self, fn):
        a, b = self._key[1], self._key[2]
        return make_affine(fn(self.child), a, b)

    def _arg(self, z, memo):
        key = ("a", id(self), id(z))
        hit = memo.get(key)
        if hit is None:
            hit = (self, z, self._key[1] * np.asarray(z, dtype=complex) + self._key[2])
            memo[key] = hit
        return hit[2]

    def _value(self, z, memo):
        return self.child.value(self._arg(z, memo), memo)

    def _log(self, z, memo):
        return self.child.logval(self._arg(z, memo), memo)

    def _derivative(self):
        a, b = self._key[1], self._key[2]
        return make_prod([Const(a), make_affine(differentiate_node(self.child), a, b)])

    def _render(self, zs):
        a, b = self._key[1], self._key[2]
        inner = make_sum([make_prod([Const(a), VAR]), Const(b)])
        return self.child._render("(" + inner._render(zs) + ")")


class Family(Node):
    """Finite product or sum over an explicit list of factors.

    ``template`` (with ``name``, ``lo``, ``hi``) is kept only for
    rendering; the instantiated ``items`` drive evaluation.
    """

    __slots__ = ()
    op = None
    word = None

    def __init__(self, items, template=None, name=None, lo=None, hi=None):
        super().__init__(tuple(items), template, name, lo, hi)

    @property
    def items(self):
        return self._key[0]

    def children(self):
        return self.items

    def _render(self, zs):
        items, template, name, lo, hi = self._key
        if template is not None:
            return f"{self.word}({name}={lo}..{hi}; {template._render(zs)})"
        sep = "*" if self.op == "prod" else " + "
        return "(" + sep.join(i._render_in(zs, 21) for i in items) + ")"


class ProdFamily(Family):
    __slots__ = ()
    op = "prod"
    word = "prod"

    def rebuild(self, fn):
        items, template, name, lo, hi = self._key
        template = fn(template) if template is not None else None
        return ProdFamily([fn(i) for i in items], template, name, lo, hi)

    def _value(self, z, memo):
        out = np.ones(np.shape(z), dtype=complex)
        for f in self.items:
            out = out * f.value(z, memo)
        return out

    def _log(self, z, memo):
        lm = np.zeros(np.shape(z))
        ph = np.zeros(np.shape(z))
        for f in self.items:
            a, b = f.logval(z, memo)
            lm = lm + a
            ph = ph + b
        return lm, ph

    def _derivative(self):
        items, template, name, lo, hi = self._key
        terms = [make_quot(differentiate_node(f), f) for f in items]
        dtemplate = None
        if template is not None:
            dtemplate = make_quot(differentiate_node(template), template)
        return make_prod([self, SumFamily(terms, dtemplate, name, lo, hi)])


class SumFamily(Family):
    __slots__ = ()
    op = "sum"
    word = "sum"
    prec = 100

    def rebuild(self, fn):
        items, template, name, lo, hi = self._key
        template = fn(template) if template is not None else None
        return SumFamily([fn(i) for i in items], template, name, lo, hi)

    def _value(self, z, memo):
        out = np.zeros(np.shape(z), dtype=complex)
        for f in self.items:
            out = out + f.value(z, memo)
        return out

    def _log(self, z, memo):
        return _logsumexp_complex([f.logval(z, memo) for f in self.items])

    def _derivative(self):
        items, template, name, lo, hi = self._key
        dtemplate = differentiate_node(template) if template is not None else None
        return SumFamily([differentiate_node(f) for f in items], dtemplate, name, lo, hi)


class ZeroProduct(Node):
    """prod_k (1 - z/a_k) over an explicit list of nonzero zeros."""

    __slots__ = ()
    _CHUNK = 4096

    def __init__(self, zeros):
        zeros = tuple(complex(a) for a in zeros)
        if any(a == 0 for a in zeros):
            raise ValueError("zero list must not contain the origin")
        super().__init__(zeros)

    @property
    def zeros(self):
        return self._key[0]

    def _factors_log(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        inv = 1.0 / np.array(self.zeros)
        lm = np.empty(flat.shape)
        ph = np.empty(flat.shape)
        for i in range(0, flat.size, self._CHUNK):
            w = 1.0 - flat[i:i + self._CHUNK, None] * inv[None, :]
            with np.errstate(divide="ignore"):
                lm[i:i + self._CHUNK] = np.log(np.abs(w)).sum(axis=1)
            ph[i:i + self._CHUNK] = np.angle(w).sum(axis=1)
        return lm.reshape(z.shape), ph.reshape(z.shape)

    def _value(self, z, memo):
        lm, ph = self.logval(z, memo)
        with np.errstate(over="ignore"):
            return np.exp(lm) * np.exp(1j * ph)

    def _log(self, z, memo):
        return self._factors_log(z)

    def _derivative(self):
        terms = [make_quot(ONE, make_sum([VAR, Const(-a)])) for a in self.zeros]
        return make_prod([self, SumFamily(terms)])

    def _render(self, zs):
        inner = ", ".join(Const(a)._render(zs) for a in self.zeros)
        body = f"zeros({inner})"
        return body if zs == "z" else f"{body}@({zs})"


class _Unary(Node):
    """Special function applied to a child expression."""

    __slots__ = ()
    fname = None

    @property
    def arg(self):
        return self._key[-1]

    def _log(self, z, memo):
        return _log_of_values(self._value(z, memo))


class Gamma(_Unary):
    __slots__ = ()

    def __init__(self, arg):
        super().__init__(arg)

    def rebuild(self, fn):
        return Gamma(fn(self.arg))

    def _value(self, z, memo):
        return special.gamma(self.arg.value(z, memo))

    def _log(self, z, memo):
        lg = special.loggamma(self.arg.value(z, memo))
        return lg.real, lg.imag

    def _derivative(self):
        return make_prod([self, Polygamma(0, self.arg), differentiate_node(self.arg)])

    def _render(self, zs):
        return f"gamma({self.arg._render(zs)})"


class Polygamma(_Unary):
    __slots__ = ()

    def __init__(self, m, arg):
        super().__init__(int(m), arg)

    def rebuild(self, fn):
        return Polygamma(self._key[0], fn(self.arg))

    def _value(self, z, memo):
        return special.polygamma(self._key[0], self.arg.value(z, memo))

    def _derivative(self):
        return make_prod([Polygamma(self._key[0] + 1, self.arg), differentiate_node(self.arg)])

    def _render(self, zs):
        return f"psi({self._key[0]}; {self.arg._render(zs)})"


class MittagLeffler(_Unary):
    """``order``-th derivative of E_{alpha,beta} composed with ``arg``."""

    __slots__ = ()

    def __init__(self, alpha, beta, order, arg):
        super().__init__(float(alpha), float(beta), int(order), arg)

    def rebuild(self, fn):
        a, b, m, _ = self._key
        return MittagLeffler(a, b, m, fn(self.arg))

    def _value(self, z, memo):
        a, b, m, _ = self._key
        w = self.arg.value(z, memo)
        return special.mittag_leffler(a, np.ravel(w), b, m).reshape(np.shape(w))

    def _log(self, z, memo):
        a, b, m, _ = self._key
        w = self.arg.value(z, memo)
        lm, ph = special.mittag_leffler_log(a, np.ravel(w), b, m)
        return lm.reshape(np.shape(w)), ph.reshape(np.shape(w))

    def _derivative(self):
        a, b, m, arg = self._key
        return make_prod([MittagLeffler(a, b, m + 1, arg), differentiate_node(arg)])

    def _render(self, zs):
        a, b, m, arg = self._key
        if m == 0 and b == 1.0:
            return f"ml({a!r}; {arg._render(zs)})"
        if m == 0:
            return f"ml({a!r}, {b!r}; {arg._render(zs)})"
        return f"mld({a!r}, {b!r}, {m}; {arg._render(zs)})"


def _render_in(self, zs, outer_prec):
    s = self._render(zs)
    if self.prec < outer_prec:
        return "(" + s + ")"
    return s


Node._render_in = _render_in


# ---------------------------------------------------------------------------
# simplifying constructors


def _split_coef(t):
    if isinstance(t, Prod) and isinstance(t.factors[0], Const):
        rest = t.factors[1:]
        return t.factors[0].c, (rest[0] if len(rest) == 1 else Prod(rest))
    return 1 + 0j, t


def make_sum(terms):
    # like terms c*u are collected, keeping first-appearance order
    coefs = {}
    c = 0j
    for t in terms:
        items = t.terms if isinstance(t, Sum) else (t,)
        for u in items:
            if isinstance(u, Const):
                c += u.c
            else:
                k, core = _split_coef(u)
                coefs[core] = coefs.get(core, 0j) + k
    flat = [make_prod([Const(k), core]) for core, k in coefs.items() if k != 0]
    if c != 0 or not flat:
        flat.append(Const(c))
    if len(flat) == 1:
        return flat[0]
    return Sum(flat)


def make_prod(factors):
    flat = []
    c = 1 + 0j
    for f in factors:
        items = f.factors if isinstance(f, Prod) else (f,)
        for u in items:
            if isinstance(u, Const):
                c *= u.c
            else:
                flat.append(u)
    if c == 0:
        return ZERO
    if not flat:
        return Const(c)
    if c != 1:
        flat.insert(0, Const(c))
    if len(flat) == 1:
        return flat[0]
    return Prod(flat)


def make_quot(num, den):
    if isinstance(den, Const):
        if den.c == 0:
            raise ZeroDivisionError("division by the zero constant")
        if den.c == 1:
            return num
        if isinstance(num, Const):
            return Const(num.c / den.c)
    if num == ZERO:
        return ZERO
    if num == den:
        return ONE
    # cancel factors common to numerator and denominator
    nf = list(num.factors) if isinstance(num, Prod) else [num]
    df = list(den.factors) if isinstance(den, Prod) else [den]
    cancelled = False
    for d in list(df):
        if not isinstance(d, Const) and d in nf:
            nf.remove(d)
            df.remove(d)
            cancelled = True
    if cancelled:
        return make_quot(make_prod(nf), make_prod(df))
    return Quot(num, den)


def make_pow(base, exponent):
    if isinstance(exponent, Node):
        if not isinstance(exponent, Const):
            return IndexPow(base, exponent)
        exponent = exponent.c
    e = complex(exponent)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if isinstance(base, Const):
        if e.imag == 0 and e.real == int(e.real):
            return Const(base.c ** int(e.real)) if base.c != 0 or e.real > 0 else Pow(base, e)
        if base.c == 0:
            return ZERO
        return Const(base.c ** e)
    if isinstance(base, Pow) and e.imag == 0 and e.real == int(e.real):
        inner = base.exponent
        if inner.imag == 0 and inner.real == int(inner.real):
            return make_pow(base.base, inner * e)
    return Pow(base, e)


def make_exp(arg):
    if isinstance(arg, Const):
        return Const(cmath.exp(arg.c))
    return Exp(arg)


def make_affine(child, a, b):
    a, b = complex(a), complex(b)
    if a == 1 and b == 0:
        return child
    if child.is_const():
        return child
    if isinstance(child, Var):
        return make_sum([make_prod([Const(a), VAR]), Const(b)])
    if isinstance(child, Affine):
        a2, b2 = child._key[1], child._key[2]
        return make_affine(child.child, a2 * a, a2 * b + b2)
    if isinstance(child, (Sum, Prod, Quot, Pow, Exp, Gamma, Polygamma, MittagLeffler, Family)):
        # push the affine map down to the leaves
        return child.rebuild(lambda c: make_affine(c, a, b))
    return Affine(child, a, b)


def substitute_index(node, name, k):
    """Replace ``Index(name)`` by the constant ``k`` throughout ``node``."""
    if isinstance(node, Index):
        return Const(k) if node._key[0] == name else node
    if isinstance(node, (Const, Var)):
        return node
    return node.rebuild(lambda c: substitute_index(c, name, k))


_DIFF_CACHE = {}


def differentiate_node(node):
    hit = _DIFF_CACHE.get(node)
    if hit is None:
        hit = node._derivative()
        if len(_DIFF_CACHE) > 200000:
            _DIFF_CACHE.clear()
        _DIFF_CACHE[node] = hit
    return hit


def compile_node(node):
    """Closure evaluating ``node`` directly, without memo bookkeeping.

    Meant for small trees evaluated many times (ODE coefficients).  Constant
    subtrees evaluate to scalars; unsupported node types fall back to the
    memoised evaluator.
    """
    if isinstance(node, Const):
        c = node.c
        return lambda z: c
    if isinstance(node, Var):
        return lambda z: z
    if isinstance(node, Sum):
        parts = [compile_node(t) for t in node.terms]

        def f(z):
            out = parts[0](z)
            for g in parts[1:]:
                out = out + g(z)
            return out
        return f
    if isinstance(node, Prod):
        parts = [compile_node(t) for t in node.factors]

        def f(z):
            out = parts[0](z)
            for g in parts[1:]:
                out = out * g(z)
            return out
        return f
    if isinstance(node, Quot):
        a, b = compile_node(node.num), compile_node(node.den)
        return lambda z: a(z) / b(z)
    if isinstance(node, Pow):
        b = compile_node(node.base)
        k = node._int_exponent()
        if k is not None:
            return (lambda z: b(z) ** k) if k >= 0 else (lambda z: 1.0 / b(z) ** (-k))
        e = node.exponent
        return lambda z: np.asarray(b(z), dtype=complex) ** e
    if isinstance(node, Exp):
        a = compile_node(node.arg)
        return lambda z: np.exp(a(z))
    return lambda z: node.value(z, {})


# ---------------------------------------------------------------------------
# public wrapper


def _check_domain(a, b):
    if a != b:
        raise DomainError(f"cannot combine {a}-tagged and {b}-tagged expressions")
    return a


class FunctionExpr:
    """An analytic function as an immutable expression tree plus a domain tag."""

    __slots__ = ("node", "domain")

    def __init__(self, node, domain=PLANE):
        if domain not in _DOMAINS:
            raise ValueError(f"unknown domain {domain!r}")
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):
        raise AttributeError("FunctionExpr is immutable")

    def __eq__(self, other):
        return isinstance(other, FunctionExpr) and self.domain == other.domain and self.node == other.node

    def __hash__(self):
        return hash((self.domain, self.node))

    def __repr__(self):
        return f"FunctionExpr({self.render()!r}, domain={self.domain!r})"

    def render(self):
        return self.node._render("z")

    __str__ = render

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, FunctionExpr):
            _check_domain(self.domain, other.domain)
            return other.node
        if isinstance(other, (int, float, complex, np.number)):
            return Const(other)
        return NotImplemented

    def _wrap(self, node):
        return FunctionExpr(node, self.domain)

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(make_sum([self.node, o]))

    def __radd__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(make_sum([o, self.node]))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(make_sum([self.node, make_prod([Const(-1), o])]))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(make_sum([o, make_prod([Const(-1), self.node])]))

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(make_prod([self.node, o]))

    def __rmul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(make_prod([o, self.node]))

    def __truediv__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(make_quot(self.node, o))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(make_quot(o, self.node))

    def __neg__(self):
        return self._wrap(make_prod([Const(-1), self.node]))

    def __pow__(self, e):
        if isinstance(e, FunctionExpr):
            if not isinstance(e.node, Const):
                raise ValueError("exponent must be a constant")
            e = e.node.c
        return self._wrap(make_pow(self.node, e))

    # calculus and operators
    def derivative(self, k=1):
        return differentiate(self, k)

    def shift(self, c):
        return shift(self, c)

    def qscale(self, q):
        return qscale(self, q)

    def __call__(self, z):
        return evaluate(self, z)

    def eval_log(self, z):
        return eval_log(self, z)

    def is_constant(self):
        return isinstance(self.node, Const)


def variable(domain=PLANE):
    return FunctionExpr(VAR, domain)


def constant(c, domain=PLANE):
    return FunctionExpr(Const(c), domain)


def fexp(f):
    return FunctionExpr(make_exp(f.node), f.domain)


def fgamma(f):
    return FunctionExpr(Gamma(f.node), f.domain)


def fmittag_leffler(alpha, f, beta=1.0):
    return FunctionExpr(MittagLeffler(alpha, beta, 0, f.node), f.domain)


def product_family(factors, domain=PLANE):
    nodes = [f.node if isinstance(f, FunctionExpr) else f for f in factors]
    return FunctionExpr(ProdFamily(nodes), domain)


def zero_product(zeros, domain=PLANE):
    """Finite canonical product prod_k (1 - z/z_k) over an explicit zero list."""
    return FunctionExpr(ZeroProduct(zeros), domain)


def differentiate(f, k=1):
    """k-th derivative of ``f`` as a new tree."""
    node = f.node
    for _ in range(k):
        node = differentiate_node(node)
    return FunctionExpr(node, f.domain)


def _require_plane(f, what):
    if f.domain != PLANE:
        raise DomainError(f"{what} is only defined for plane-tagged trees")


def shift(f, c):
    """``z -> f(z + c)``."""
    _require_plane(f, "shift")
    return FunctionExpr(make_affine(f.node, 1, c), f.domain)


def qscale(f, q):
    """``z -> f(q z)``."""
    _require_plane(f, "qscale")
    return FunctionExpr(make_affine(f.node, q, 0), f.domain)


def delta(f, k=1):
    """Forward difference ``f(z+1) - f(z)`` applied k times."""
    for _ in range(k):
        f = shift(f, 1) - f
    return f


def delta_q(f, q, k=1):
    """q-difference ``f(qz) - f(z)`` applied k times."""
    for _ in range(k):
        f = qscale(f, q) - f
    return f


def _prepare(f, z):
    arr = np.asarray(z, dtype=complex)
    if f.domain == DISC and np.any(np.abs(arr) >= 1):
        raise DomainError("disc-tagged expression evaluated at |z| >= 1")
    return arr


def evaluate(f, z):
    """Direct complex evaluation (scalar in, scalar out)."""
    arr = _prepare(f, z)
    with np.errstate(invalid="ignore", over="ignore"):
        out = f.node.value(np.atleast_1d(arr), {})
    if np.ndim(z) == 0:
        return complex(out[0])
    return np.asarray(out).reshape(arr.shape)


def eval_log(f, z):
    """Log-domain evaluation; returns a :class:`LogValue`."""
    arr = _prepare(f, z)
    with np.errstate(invalid="ignore", over="ignore"):
        lm, ph = f.node.logval(np.atleast_1d(arr), {})
    lm = np.broadcast_to(lm, np.shape(np.atleast_1d(arr)))
    ph = np.broadcast_to(ph, np.shape(np.atleast_1d(arr)))
    if np.ndim(z) == 0:
        return LogValue(float(lm[0]), float(ph[0]))
    return LogValue(np.array(lm).reshape(arr.shape), np.array(ph).reshape(arr.shape))


def evaluate_many(exprs, z):
    """Evaluate several trees at the same points sharing one memo table."""
    memo = {}
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = []
    for f in exprs:
        _prepare(f, arr)
        with np.errstate(invalid="ignore", over="ignore"):
            out.append(np.broadcast_to(f.node.value(arr, memo), arr.shape))
    return out


def eval_log_many(exprs, z):
    memo = {}
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = []
    for f in exprs:
        _prepare(f, arr)
        with np.errstate(invalid="ignore", over="ignore"):
            lm, ph = f.node.logval(arr, memo)
        out.append(LogValue(np.broadcast_to(lm, arr.shape), np.broadcast_to(ph, arr.shape)))
    return out
