"""Numerical value-distribution tools for linear differential, difference
and q-difference equations: Nevanlinna functionals, order reduction of
equations with a known solution base, and dominance checks on coefficient
growth."""
from .funcexpr import (  # noqa: F401
    DISC,
    PLANE,
    DomainError,
    FunctionExpr,
    LogValue,
    constant,
    delta,
    delta_q,
    differentiate,
    eval_log,
    evaluate,
    fexp,
    fgamma,
    fmittag_leffler,
    qscale,
    shift,
    variable,
    zero_product,
)
from .parser import ExprSyntaxError, parse, render  # noqa: F401

__version__ = "0.1.0"
