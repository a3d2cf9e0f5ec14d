"""Dominance of one coefficient over the higher-index ones.

For coefficients A_0, ..., A_{n-1} the smallest index p is sought for which
a ratio sum over j = p+1, ..., n-1 has limsup below 1:

* ``characteristic``: sum T(r, A_j) / T(r, A_p)
* ``max_modulus``:    sum log+ M(r, A_j) / log+ M(r, A_p)
* ``circle``:         sum (n-j)/(n-p) * int |A_j|^{1/(n-j)} dt / int |A_p|^{1/(n-p)} dt
                      over the circle |z| = r
* ``area``:           the same with integrals over the disc |z| < r
* ``curve``:          sum (1/eta_j) |A_j(z)|^{eta_j} / |A_p(z)| along a
                      maximum curve of A_p

Limsups are estimated from the tail third of a finite radius grid (with
optional trimming), so every verdict is only numerically consistent with
the asymptotic statement.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .funcexpr import Const, FunctionExpr, constant, eval_log_many
from .nevanlinna import (
    GrowthSeries,
    characteristic,
    log_area_p_integral,
    log_circle_p_integral,
    max_modulus,
    tail_stat,
    trace_max_curve,
)

__all__ = [
    "CONDITION_KINDS",
    "DominanceReport",
    "CurveReport",
    "ConclusionTable",
    "find_p",
    "curve_dominance",
    "conclusion_check",
]

CONDITION_KINDS = ("characteristic", "max_modulus", "circle", "area", "curve")


def _as_exprs(A):
    A = list(A)
    domain = next((a.domain for a in A if isinstance(a, FunctionExpr)), "plane")
    return [a if isinstance(a, FunctionExpr) else constant(a, domain) for a in A]


def _is_zero(f):
    return isinstance(f.node, Const) and f.node.c == 0


@dataclass
class DominanceReport:
    """Ratio sums per candidate p and the selected smallest p.

    ``limsup[p]`` is ``(untrimmed, trimmed)`` over the tail third.
    """

    kind: str
    domain: str
    r: np.ndarray
    ratios: dict
    limsup: dict
    selected: int = None
    trim: float = 0.1
    eta: tuple = None
    low_confidence: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def margin(self):
        """|trimmed estimate - 1| for the selected index (None if unselected)."""
        if self.selected is None:
            return None
        return abs(self.limsup[self.selected][1] - 1.0)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "r", "ratio", "trimmed", "selected"])
        for p in sorted(self.ratios):
            trimmed = self.limsup[p][1]
            for r, v in zip(self.r, self.ratios[p]):
                w.writerow([p, format(float(r), ".17g"), format(float(v), ".17g"),
                            format(float(trimmed), ".17g"), int(p == self.selected)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, kind="unknown", domain="plane"):
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["p", "r", "ratio", "trimmed", "selected"]:
            raise ValueError(f"unexpected header {rows[0]!r}")
        ratios, limsup, r_by_p = {}, {}, {}
        selected = None
        for p, r, v, t, s in rows[1:]:
            p = int(p)
            ratios.setdefault(p, []).append(float(v))
            r_by_p.setdefault(p, []).append(float(r))
            limsup[p] = (math.nan, float(t))
            if s == "1":
                selected = p
        first = min(r_by_p) if r_by_p else None
        r = np.array(r_by_p[first]) if first is not None else np.array([])
        return cls(kind, domain, r, {p: np.array(v) for p, v in ratios.items()}, limsup, selected)


def _per_coefficient(A, kind, grid, tol):
    """Per-radius growth quantity of each coefficient.

    Returns an array (n, len(grid)); for the integral kinds these are logs
    of the integrals with exponent 1/(n-j).
    """
    n = len(A)
    out = np.zeros((n, len(grid)))
    for j, a in enumerate(A):
        for k, r in enumerate(grid):
            if kind == "characteristic":
                out[j, k] = characteristic(a, r, tol)
            elif kind == "max_modulus":
                out[j, k] = max(0.0, max_modulus(a, r)[0]) if not _is_zero(a) else 0.0
            elif kind == "circle":
                out[j, k] = -np.inf if _is_zero(a) else log_circle_p_integral(a, r, 1.0 / (n - j))
            elif kind == "area":
                out[j, k] = -np.inf if _is_zero(a) else log_area_p_integral(a, r, 1.0 / (n - j))
    return out


def _ratio_sum(Q, kind, n, p):
    if p == n - 1:
        return np.zeros(Q.shape[1])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind in ("characteristic", "max_modulus"):
            den = Q[p]
            num = Q[p + 1:].sum(axis=0)
            out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
            return np.where((num == 0) & (den > 0), 0.0, out)
        total = np.zeros(Q.shape[1])
        for j in range(p + 1, n):
            w = (n - j) / (n - p)
            total = total + w * np.exp(Q[j] - Q[p])
        return np.where(np.isfinite(Q[p]), total, np.inf)


def find_p(A, kind="characteristic", grid=None, trim=0.1, tol=1e-6, eta=None):
    """Smallest p whose trimmed tail limsup of the ratio sum is below 1.

    Candidates are scanned from 0 upward and every one is reported.  The
    ratio for p = n-1 is identically 0, so a selection always exists for
    n >= 1; ``selected`` is None only for an empty coefficient list.
    """
    if kind not in CONDITION_KINDS:
        raise ValueError(f"unknown condition kind {kind!r}")
    A = _as_exprs(A)
    n = len(A)
    grid = np.asarray(grid, dtype=float)
    domain = A[0].domain if A else "plane"
    if n == 0:
        return DominanceReport(kind, domain, grid, {}, {}, None, trim)
    ratios, limsup = {}, {}
    low = False
    if kind == "curve":
        etas = None
        for p in range(n):
            rep = curve_dominance(A, p, eta, grid=grid, trim=trim)
            ratios[p] = rep.ratios
            limsup[p] = rep.limsup
            low = low or (rep.low_confidence and p == 0)
            etas = rep.eta if p == 0 else etas
    else:
        Q = _per_coefficient(A, kind, grid, tol)
        for p in range(n):
            ratios[p] = _ratio_sum(Q, kind, n, p)
            limsup[p] = tail_stat(ratios[p], "max", trim)
        etas = None
    selected = next((p for p in range(n) if limsup[p][1] < 1.0), None)
    return DominanceReport(kind, domain, grid, ratios, limsup, selected, trim, etas, low)


@dataclass
class CurveReport:
    p: int
    eta: tuple
    r: np.ndarray
    points: np.ndarray
    ratios: np.ndarray
    limsup: tuple
    low_confidence: bool
    flags: np.ndarray


def curve_dominance(A, p, eta=None, curve=None, grid=None, trim=0.1, jump=0.5):
    """Sum of (1/eta_j)|A_j|^{eta_j}/|A_p| along a maximum curve of A_p.

    ``curve`` is the output of ``trace_max_curve`` for A_p; it is traced on
    ``grid`` when omitted.  eta_j defaults to 2.  A branch jump of the
    curve marks the report as low confidence.
    """
    A = _as_exprs(A)
    n = len(A)
    m = n - p - 1
    if eta is None:
        eta = (2.0,) * m
    eta = tuple(float(e) for e in eta)
    if len(eta) != m:
        raise ValueError(f"need {m} exponents for p={p}, n={n}")
    if any(e <= 1 for e in eta):
        raise ValueError("exponents eta_j must exceed 1")
    if curve is None:
        curve = trace_max_curve(A[p], grid, jump)
    points, thetas, flags = curve
    points = np.asarray(points, dtype=complex)
    r = np.abs(points)
    if m == 0:
        ratios = np.zeros(len(points))
    else:
        logs = eval_log_many(A[p:], points)
        den = np.asarray(logs[0].logmag, dtype=float)
        total = np.zeros(len(points))
        with np.errstate(over="ignore", invalid="ignore"):
            for e, lv in zip(eta, logs[1:]):
                term = np.exp(e * np.asarray(lv.logmag, dtype=float) - den - math.log(e))
                total = total + np.where(np.asarray(lv.logmag) == -np.inf, 0.0, term)
        ratios = total
    lim = tail_stat(ratios, "max", trim)
    return CurveReport(p, eta, r, points, ratios, lim, bool(np.any(flags)), np.asarray(flags))


@dataclass
class ConclusionTable:
    """Per-radius growth-conclusion ratios and the window verdict."""

    kind: str
    r: np.ndarray
    ratio: np.ndarray
    window: tuple
    tail_min: float
    tail_max: float
    passed: bool
    resampled: bool = False

    def to_csv(self):
        lines = ["r,ratio"]
        lines += [f"{format(float(a), '.17g')},{format(float(b), '.17g')}" for a, b in zip(self.r, self.ratio)]
        return "\n".join(lines) + "\n"


def _reference_values(reference, kind):
    if isinstance(reference, GrowthSeries):
        if kind == "characteristic":
            return reference.r, reference.T
        if kind == "max_modulus":
            return reference.r, reference.logM
        raise ValueError("area conclusions need (r, log-integral) pairs as reference")
    r, v = reference
    return np.asarray(r, dtype=float), np.asarray(v, dtype=float)


def conclusion_check(series, reference, kind="characteristic", window=(0.2, 5.0), lower=None,
                     trim=0.0):
    """Ratios log T(r, f) / X(r) for a solution's growth series.

    X is T(r, A_p) (``characteristic``), log M(r, A_p) (``max_modulus``)
    or the log of the area integral of |A_p|^{1/(n-p)} (``area``, passed
    as an ``(r, values)`` pair).  With ``lower`` set the claim is one-sided
    (tail values >= lower); otherwise tail values must lie in ``window``.
    When the grids differ the reference is interpolated linearly in log r
    (and ``resampled`` is set).
    """
    if kind not in ("characteristic", "max_modulus", "area"):
        raise ValueError(f"unknown conclusion kind {kind!r}")
    rr, vv = _reference_values(reference, kind)
    r = np.asarray(series.r, dtype=float)
    resampled = not (len(rr) == len(r) and np.allclose(rr, r, rtol=0, atol=0))
    if resampled:
        if series.domain == "disc":
            x, xs = -np.log1p(-rr), -np.log1p(-r)
        else:
            x, xs = np.log(rr), np.log(r)
        vv = np.interp(xs, x, vv, left=np.nan, right=np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(np.asarray(series.T, dtype=float)) / vv
    lo, lo_t = tail_stat(ratio, "min", trim)
    hi, hi_t = tail_stat(ratio, "max", trim)
    if lower is not None:
        passed = bool(lo_t >= lower)
        win = (lower, math.inf)
    else:
        passed = bool(window[0] <= lo_t and hi_t <= window[1])
        win = tuple(window)
    return ConclusionTable(kind, r, ratio, win, lo_t, hi_t, passed, resampled)
