"""Text form of expression trees.

Grammar (whitespace is ignored)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?
    atom   := number ["i"] | "i" | "z" | name | "(" expr ")"
            | "exp(" expr ")" | "gamma(" expr ")" | "psi(" int ";" expr ")"
            | "ml(" alpha [ "," beta ] ";" expr ")"
            | "mld(" alpha "," beta "," int ";" expr ")"
            | "prod(" name "=" int ".." int ";" expr ")"
            | "sum(" name "=" int ".." int ";" expr ")"
            | "zeros(" const ("," const)* ")"

An optional leading ``[plane]`` or ``[disc]`` tag fixes the domain; it
must agree with the ``domain`` argument when both are given.  Exponents
must reduce to constants.
"""
import re

from .funcexpr import (
    DISC,
    PLANE,
    VAR,
    Var,
    Const,
    DomainError,
    FunctionExpr,
    Gamma,
    Index,
    MittagLeffler,
    Polygamma,
    ProdFamily,
    SumFamily,
    ZeroProduct,
    make_exp,
    make_pow,
    make_prod,
    make_quot,
    make_sum,
    substitute_index,
)

__all__ = ["ExprSyntaxError", "parse", "render"]


class ExprSyntaxError(ValueError):
    """Syntax error; ``offset`` is the 0-based character position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.(?!\.)\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<range>\.\.)
  | (?P<op>[-+*/^(),;=\[\]])
""", re.VERBOSE)


def _tokenize(text):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _z_free(node):
    if isinstance(node, Var):
        return False
    return all(_z_free(c) for c in node.children())


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0
        self.bound = []

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            what = "end of input" if t[0] == "end" else repr(t[1])
            raise ExprSyntaxError(f"expected {value!r}, found {what}", t[2])
        return t

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            if op == "-":
                rhs = make_prod([Const(-1), rhs])
            node = make_sum([node, rhs])
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                node = make_prod([node, rhs])
            else:
                if rhs == Const(0):
                    raise ExprSyntaxError("division by literal zero", self.toks[self.i - 1][2])
                node = make_quot(node, rhs)
        return node

    def unary(self):
        t = self.peek()
        if t[1] == "-":
            self.take()
            return make_prod([Const(-1), self.unary()])
        if t[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            t = self.take()
            e = self.unary()
            if not _z_free(e):
                raise ExprSyntaxError("exponent must be a constant", t[2] + 1)
            return make_pow(base, e)
        return base

    def integer(self):
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        t = self.take()
        if t[0] != "num" or not t[1].isdigit():
            raise ExprSyntaxError("expected an integer", t[2])
        return sign * int(t[1])

    def constant(self):
        t = self.peek()
        node = self.expr()
        if not isinstance(node, Const):
            raise ExprSyntaxError("expected a constant", t[2])
        return node.c

    def real(self):
        node = self.unary()
        if not isinstance(node, Const) or node.c.imag != 0:
            raise ExprSyntaxError("expected a real constant", self.peek()[2])
        return node.c.real

    def atom(self):
        t = self.take()
        kind, text, pos = t
        if kind == "num":
            value = float(text)
            nxt = self.peek()
            if nxt[0] == "name" and nxt[1] == "i" and nxt[2] == pos + len(text):
                self.take()
                return Const(1j * value)
            return Const(value)
        if kind == "name":
            if text == "z":
                return VAR
            if text == "i":
                return Const(1j)
            if text in self.bound:
                return Index(text)
            if self.peek()[1] != "(":
                raise ExprSyntaxError(f"unknown name {text!r}", pos)
            self.take()
            node = self.call(text, pos)
            self.expect(")")
            return node
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", pos)

    def call(self, fname, pos):
        if fname == "exp":
            return make_exp(self.expr())
        if fname == "gamma":
            return Gamma(self.expr())
        if fname == "psi":
            m = self.integer()
            self.expect(";")
            return Polygamma(m, self.expr())
        if fname in ("ml", "mld"):
            alpha = self.real()
            beta, order = 1.0, 0
            if self.peek()[1] == ",":
                self.take()
                beta = self.real()
                if fname == "mld":
                    self.expect(",")
                    order = self.integer()
            self.expect(";")
            if alpha <= 0:
                raise ExprSyntaxError("Mittag-Leffler alpha must be positive", pos)
            return MittagLeffler(alpha, beta, order, self.expr())
        if fname in ("prod", "sum"):
            t = self.take()
            if t[0] != "name":
                raise ExprSyntaxError("expected an index name", t[2])
            name = t[1]
            self.expect("=")
            lo = self.integer()
            self.expect("..")
            hi = self.integer()
            self.expect(";")
            if hi < lo:
                raise ExprSyntaxError("empty index range", t[2])
            self.bound.append(name)
            template = self.expr()
            self.bound.pop()
            items = [substitute_index(template, name, k) for k in range(lo, hi + 1)]
            cls = ProdFamily if fname == "prod" else SumFamily
            return cls(items, template, name, lo, hi)
        if fname == "zeros":
            vals = [self.constant()]
            while self.peek()[1] == ",":
                self.take()
                vals.append(self.constant())
            if any(v == 0 for v in vals):
                raise ExprSyntaxError("zero list must not contain 0", pos)
            return ZeroProduct(vals)
        raise ExprSyntaxError(f"unknown function {fname!r}", pos)


def parse(text, domain=None):
    """Parse ``text`` into a :class:`FunctionExpr`.

    ``domain`` defaults to the inline tag, or the plane if there is none.
    """
    p = _Parser(text)
    tag = None
    if p.peek()[1] == "[":
        p.take()
        t = p.take()
        if t[1] not in (PLANE, DISC):
            raise ExprSyntaxError("domain tag must be [plane] or [disc]", t[2])
        tag = t[1]
        p.expect("]")
    if tag is not None and domain is not None and tag != domain:
        raise DomainError(f"expression tagged {tag!r} but {domain!r} was requested")
    node = p.expr()
    t = p.peek()
    if t[0] != "end":
        raise ExprSyntaxError(f"unexpected {t[1]!r}", t[2])
    return FunctionExpr(node, tag or domain or PLANE)


def render(f, tag=False):
    """Text form of ``f``; with ``tag=True`` the domain tag is prefixed."""
    s = f.render()
    return f"[{f.domain}] {s}" if tag else s
