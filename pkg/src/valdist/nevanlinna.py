"""Nevanlinna functionals of expression trees, computed numerically.

Everything is carried in nats.  Circle averages of ``log+|f|`` are done
on the log-magnitude returned by :func:`valdist.funcexpr.eval_log`, so
functions like ``exp(exp(z))`` are handled far beyond the range where
``|f|`` itself is representable.

Conventions
-----------
* ``m(r, f)`` is the mean of ``log+|f(r e^{it})|``; ``m(r, a, f)`` means
  ``m(r, 1/(f - a))``.
* ``N(r, a, f) = n(0, a) log r + int_0^r (n(t, a) - n(0, a)) / t dt``.
  The jump radii of ``n(t)`` are located by bisection in ``log t``, after
  which the integral is a finite sum.
* ``T = m(r, f) + N(r, inf, f)``.

Limsup/liminf statistics use the final third of the radius grid, with an
optional trim that drops the worst radii.  This is a heuristic stand-in
for discarding an exceptional set of finite measure; every report keeps
the untrimmed value next to the trimmed one.
"""
from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .funcexpr import (
    DISC,
    ONE,
    PLANE,
    Affine,
    Const,
    Exp,
    FunctionExpr,
    Gamma,
    MittagLeffler,
    Polygamma,
    Pow,
    Prod,
    ProdFamily,
    Quot,
    Sum,
    SumFamily,
    eval_log,
    make_affine,
    make_quot,
    wrap_phase,
)

__all__ = [
    "ConvergenceError",
    "ZeroCountError",
    "GrowthSeries",
    "GridSet",
    "DeficiencyReport",
    "proximity",
    "count_zeros",
    "counting_N",
    "zero_moduli",
    "characteristic",
    "max_modulus",
    "trace_max_curve",
    "circle_p_integral",
    "log_circle_p_integral",
    "area_p_integral",
    "log_area_p_integral",
    "deficiency",
    "admissibility_index",
    "korenblum_probe",
    "density_upper",
    "log_density_upper",
    "hyper_order",
    "growth_series",
    "plane_grid",
    "disc_grid",
    "tail_window",
    "tail_stat",
]

TWO_PI = 2.0 * math.pi
GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


class ConvergenceError(RuntimeError):
    """Quadrature did not settle; ``estimates`` holds the last two values."""

    def __init__(self, message, estimates):
        super().__init__(f"{message}; last two estimates {estimates[0]!r}, {estimates[1]!r}")
        self.estimates = estimates


class ZeroCountError(RuntimeError):
    """Phase tracking could not stabilise on the contour."""


# ---------------------------------------------------------------------------
# grids and tail statistics


def plane_grid(r0=1.0, count=30, ratio=1.15):
    """Geometric radii ``r0 * ratio**k``."""
    return r0 * ratio ** np.arange(count)


def disc_grid(k0=4, k1=40, step=0.25):
    """Radii ``1 - 2**(-step*k)`` accumulating at 1."""
    k = np.arange(k0, k1 + 1)
    return 1.0 - 2.0 ** (-step * k)


def tail_window(n):
    """Index slice of the final third of a length-n grid (at least one point)."""
    start = min(n - 1, (2 * n) // 3)
    return slice(start, n)


def tail_stat(values, kind="min", trim=0.1):
    """(untrimmed, trimmed) min or max over the tail third.

    Trimming drops the ``trim`` fraction of tail radii that are most
    extreme in the direction of the statistic.
    """
    v = np.asarray(values, dtype=float)
    tail = v[tail_window(len(v))]
    tail = tail[np.isfinite(tail)] if np.any(np.isfinite(tail)) else tail
    ordered = np.sort(tail)
    drop = int(math.floor(trim * len(ordered)))
    if kind == "min":
        return float(ordered[0]), float(ordered[drop])
    return float(ordered[-1]), float(ordered[len(ordered) - 1 - drop])


def _initial_nodes(domain, r, minimum=64):
    if domain == DISC:
        need = 4.0 * math.pi / (1.0 - r)
    else:
        need = 4.0 * r
    n = minimum
    while n < need:
        n *= 2
    return n


def _check_radius(f, r):
    if r <= 0:
        raise ValueError("radius must be positive")
    if f.domain == DISC and r >= 1:
        raise ValueError("disc radius must be < 1")


def _logabs_on_circle(g, r, theta):
    return np.asarray(eval_log(g, r * np.exp(1j * theta)).logmag, dtype=float)


# ---------------------------------------------------------------------------
# proximity function


def _refine_crossings(fun, lo, hi, flo):
    """Vectorised bisection for sign changes of ``fun`` (positive vs not)."""
    lo = lo.copy()
    hi = hi.copy()
    plo = flo > 0
    for _ in range(200):
        if np.all(hi - lo <= 4e-16 * TWO_PI):
            break
        mid = 0.5 * (lo + hi)
        pm = fun(mid) > 0
        same = pm == plo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _gl_nodes(a, b, panels):
    """Composite Gauss-Legendre nodes/weights for arcs [a_i, b_i]."""
    xs, ws = [], []
    for lo, hi, k in zip(a, b, panels):
        edges = np.linspace(lo, hi, int(k) + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs.append((mid[:, None] + half[:, None] * _GL_X[None, :]).ravel())
        ws.append((half[:, None] * _GL_W[None, :]).ravel())
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def positive_part_mean(fun, n0, tol=1e-8, max_nodes=2 ** 20):
    """Mean over [0, 2 pi) of max(fun, 0) for a 2 pi-periodic ``fun``.

    Sign changes are located by bisection; the positive arcs are then
    integrated by composite Gauss-Legendre, so the kink of ``max(., 0)``
    never sits inside a quadrature panel.  Without sign changes the
    periodic trapezoid rule is used.  Node counts double until successive
    estimates agree to ``tol * max(1, |estimate|)``.
    """
    prev = None
    prev_cross = None
    history = [math.nan, math.nan]
    n = n0
    while n <= max_nodes:
        h = TWO_PI / n
        th = h * np.arange(n)
        L = fun(th)
        L = np.where(np.isnan(L), -np.inf, L)
        pos = L > 0
        if np.all(pos):
            est = float(np.mean(L))
            ncross = 0
        elif not np.any(pos):
            est = 0.0
            ncross = 0
        else:
            nxt = np.roll(pos, -1)
            idx = np.nonzero(pos != nxt)[0]
            lo = th[idx]
            roots = _refine_crossings(fun, lo, lo + h, L[idx])
            ups = ~pos[idx]  # crossing from non-positive to positive
            ncross = len(idx)
            # pair each up-crossing with the following down-crossing
            order = np.argsort(roots)
            roots, ups = roots[order], ups[order]
            if not ups[0]:
                roots = np.roll(roots, -1)
                ups = np.roll(ups, -1)
                roots[-1] += TWO_PI
            a = roots[0::2]
            b = roots[1::2]
            b = np.where(b < a, b + TWO_PI, b)
            panels = np.maximum(1, np.ceil((b - a) / h))
            x, w = _gl_nodes(a, b, panels)
            vals = fun(np.mod(x, TWO_PI))
            vals = np.where(np.isfinite(vals), vals, 0.0)
            est = float(np.sum(w * np.maximum(vals, 0.0)) / TWO_PI)
        history = [history[1], est]
        if prev is not None and ncross == prev_cross and abs(est - prev) <= tol * max(1.0, abs(est)):
            return est
        prev, prev_cross = est, ncross
        n *= 2
    raise ConvergenceError("circle quadrature did not converge", tuple(history))


def _target(f, a):
    """(tree, sign) so that sign*log|tree| is the integrand for m(r, a, f)."""
    if a is None or (isinstance(a, float) and math.isinf(a)):
        return f, 1.0
    if a == 0:
        return f, -1.0
    return f - a, -1.0


def proximity(f, r, tol=1e-8, a=None):
    """m(r, f), or m(r, 1/(f - a)) when ``a`` is finite."""
    _check_radius(f, r)
    g, sign = _target(f, a)
    return positive_part_mean(lambda th: sign * _logabs_on_circle(g, r, th),
                              _initial_nodes(f.domain, r), tol)


# ---------------------------------------------------------------------------
# zeros and poles


class _ContourHit(Exception):
    pass


def _phase_on_circle(g, r, theta):
    lv = eval_log(g, r * np.exp(1j * theta))
    lm = np.asarray(lv.logmag)
    if np.any(lm == -np.inf) or np.any(np.isnan(lm)):
        raise _ContourHit()
    return np.asarray(lv.phase, dtype=float)


def _winding(g, r, domain):
    n = max(256, _initial_nodes(domain, r))
    h = TWO_PI / n
    ta = h * np.arange(n)
    tb = ta + h
    ph = _phase_on_circle(g, r, ta)
    pa = ph
    pb = np.roll(ph, -1)
    total = 0.0
    for _ in range(60):
        if ta.size == 0:
            break
        if np.any(tb - ta < 1e-13):
            raise _ContourHit()
        tm = 0.5 * (ta + tb)
        pm = _phase_on_circle(g, r, tm)
        d1 = wrap_phase(pm - pa)
        d2 = wrap_phase(pb - pm)
        d = wrap_phase(pb - pa)
        ok = (np.abs(d1) < 0.5 * np.pi) & (np.abs(d2) < 0.5 * np.pi) & (np.abs(d1 + d2 - d) < 1e-9)
        total += float(np.sum((d1 + d2)[ok]))
        bad = ~ok
        ta, tb, pa, pb, pm, tm = ta[bad], tb[bad], pa[bad], pb[bad], pm[bad], tm[bad]
        ta = np.concatenate([ta, tm])
        tb = np.concatenate([tm, tb])
        pa, pb = np.concatenate([pa, pm]), np.concatenate([pm, pb])
    if ta.size:
        raise _ContourHit()
    w = total / TWO_PI
    k = round(w)
    if abs(w - k) > 1e-6:
        raise _ContourHit()
    return int(k)


def _winding_nudged(g, r, domain, retries=3):
    rr = r
    for attempt in range(retries + 1):
        try:
            return _winding(g, rr, domain)
        except _ContourHit:
            rr = r * (1.0 + 1e-9 * 10 ** attempt)
            if domain == DISC and rr >= 1:
                break
    raise ZeroCountError(f"phase tracking failed near radius {r!r}; try nudging the radius")


def _zero_free(node):
    if isinstance(node, Const):
        return node.c != 0
    if isinstance(node, (Exp, Gamma)):
        return True
    if isinstance(node, (Prod, ProdFamily)):
        return all(_zero_free(c) for c in node.children())
    if isinstance(node, Quot):
        return _zero_free(node.num)
    if isinstance(node, Pow):
        return node.exponent.real < 0 or _zero_free(node.base)
    if isinstance(node, Affine):
        return _zero_free(node.child)
    return False


def _merge(a, b, how):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v if how == "add" else max(out.get(k, 0), v)
    return out


def _zero_atoms(node):
    """Factors whose zeros are the zeros of ``node``, with multiplicities."""
    if isinstance(node, Const) or _zero_free(node):
        return {}
    if isinstance(node, (Prod, ProdFamily)):
        out = {}
        for c in node.children():
            out = _merge(out, _zero_atoms(c), "add")
        return out
    if isinstance(node, Pow):
        e = node.exponent
        if e.imag == 0 and e.real > 0:
            k = math.ceil(e.real)
            return {a: m * k for a, m in _zero_atoms(node.base).items()}
    return {node: 1}


def pole_atoms(node):
    """Analytic factors whose zeros carry the poles of ``node``.

    Returns ``{factor: multiplicity}``; sums take the larger multiplicity
    per factor, products add them.  Singularities inside ``exp`` (or
    other builtins' arguments) are not tracked.
    """
    if isinstance(node, (Sum, SumFamily)):
        out = {}
        for c in node.children():
            out = _merge(out, pole_atoms(c), "max")
        return out
    if isinstance(node, (Prod, ProdFamily)):
        out = {}
        for c in node.children():
            out = _merge(out, pole_atoms(c), "add")
        return out
    if isinstance(node, Quot):
        return _merge(pole_atoms(node.num), _zero_atoms(node.den), "add")
    if isinstance(node, Pow):
        e = node.exponent
        if e.real < 0:
            k = math.ceil(-e.real)
            return {a: m * k for a, m in _zero_atoms(node.base).items()}
        k = math.ceil(e.real)
        return {a: m * k for a, m in pole_atoms(node.base).items()}
    if isinstance(node, Gamma):
        return {make_quot(ONE, node): 1}
    if isinstance(node, Polygamma):
        return {make_quot(ONE, Gamma(node.arg)): node._key[0] + 1}
    if isinstance(node, Affine):
        a, b = node._key[1], node._key[2]
        return {make_affine(k, a, b): v for k, v in pole_atoms(node.child).items()}
    return {}


def _pole_count(f, r):
    total = 0
    for atom, mult in pole_atoms(f.node).items():
        total += mult * _winding_nudged(FunctionExpr(atom, f.domain), r, f.domain)
    return total


def count_zeros(f, a=0, r=1.0):
    """Number of a-points of ``f`` in |z| < r (``a = inf`` counts poles).

    Uses the argument principle: the winding number of ``f - a`` along
    |z| = r plus the number of poles inside.  Phase increments are
    tracked with local interval halving until every accepted step is
    below pi/2 and agrees with its two halves.
    """
    _check_radius(f, r)
    if a is None or (isinstance(a, float) and math.isinf(a)):
        return _pole_count(f, r)
    if a == 0 and _zero_free(f.node):
        return 0
    g = f if a == 0 else f - a
    return _winding_nudged(g, r, f.domain) + _pole_count(f, r)


def zero_moduli(f, a, rmax, rmin_ratio=1e-9):
    """(n0, [(t, dn), ...]) with the radii where n(t, a) jumps, t <= rmax.

    ``n0`` is the multiplicity at the origin, taken as the count on the
    tiny circle |z| = rmin_ratio * rmax.
    """
    count = lambda t: count_zeros(f, a, t)
    t0 = rmin_ratio * rmax
    n0 = count(t0)
    ts = np.geomspace(t0, rmax, 31)
    ns = [n0] + [count(t) for t in ts[1:]]
    jumps = []

    def split(ta, tb, na, nb):
        if nb == na:
            return
        if tb / ta - 1.0 < 1e-12:
            jumps.append((math.sqrt(ta * tb), nb - na))
            return
        tm = math.sqrt(ta * tb)
        nm = count(tm)
        split(ta, tm, na, nm)
        split(tm, tb, nm, nb)

    for i in range(len(ts) - 1):
        split(ts[i], ts[i + 1], ns[i], ns[i + 1])
    return n0, jumps


def _N_from_jumps(n0, jumps, r):
    total = n0 * math.log(r)
    for t, dn in jumps:
        if t < r:
            total += dn * math.log(r / t)
    return total


def counting_N(f, a, r):
    """N(r, a, f); ``a = inf`` gives the pole counting function."""
    if a is not None and not (isinstance(a, float) and math.isinf(a)):
        if a == 0 and _zero_free(f.node):
            return 0.0
    elif not pole_atoms(f.node):
        return 0.0
    n0, jumps = zero_moduli(f, a, r)
    return _N_from_jumps(n0, jumps, r)


def characteristic(f, r, tol=1e-8):
    """T(r, f) = m(r, f) + N(r, inf, f)."""
    return proximity(f, r, tol) + counting_N(f, math.inf, r)


# ---------------------------------------------------------------------------
# maximum modulus


def _wrap_angle(t):
    return float(wrap_phase(t))


def _max_candidates(f, r, n=None):
    n = n or max(512, 2 * _initial_nodes(f.domain, r))
    th = TWO_PI * np.arange(n) / n
    L = _logabs_on_circle(f, r, th)
    return th, L


def _polish(f, r, theta0, h):
    res = minimize_scalar(lambda t: -float(_logabs_on_circle(f, r, np.array([t]))[0]),
                          bounds=(theta0 - h, theta0 + h), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x), -float(res.fun)


def _tie_set(L, rel=1e-9):
    top = np.max(L)
    scale = max(1.0, abs(top))
    return np.nonzero(L >= top - rel * scale)[0]


def max_modulus(f, r, n=None):
    """(logM, theta) with logM = max log|f| on |z| = r.

    The maximiser is found on a uniform grid, ties broken towards the
    smallest angle in [0, 2 pi), and polished by bounded scalar
    minimisation.  The angle is returned in (-pi, pi]; a constant modulus
    gives theta = 0.
    """
    _check_radius(f, r)
    th, L = _max_candidates(f, r, n)
    if np.all(np.isneginf(L)):
        return -math.inf, 0.0
    if np.max(L) - np.min(L) <= 1e-12 * max(1.0, abs(np.max(L))):
        return float(np.max(L)), 0.0
    best = _tie_set(L)
    h = th[1] - th[0]
    out = []
    for i in best:
        t, v = _polish(f, r, th[i], h)
        if v <= L[i] + 1e-14 * max(1.0, abs(L[i])):
            t, v = th[i], float(L[i])
        out.append((t, v))
    top = max(v for _, v in out)
    scale = max(1.0, abs(top))
    for t, v in out:
        if v >= top - 1e-9 * scale:
            return top, _wrap_angle(t)
    return top, _wrap_angle(out[0][0])


def trace_max_curve(f, grid, jump=0.5):
    """Follow one branch of the maximum curve through the grid.

    Returns ``(points, thetas, flags)``; among tied maxima the one nearest
    the previous angle is chosen, and ``flags[k]`` is True when the angle
    jumped by more than ``jump`` radians from the previous radius.
    """
    thetas, flags = [], []
    prev = None
    for r in grid:
        th, L = _max_candidates(f, r)
        if np.max(L) - np.min(L) <= 1e-12 * max(1.0, abs(np.max(L))):
            cands = [0.0]
        else:
            h = th[1] - th[0]
            cands = []
            for i in _tie_set(L):
                t, v = _polish(f, r, th[i], h)
                if v <= L[i] + 1e-14 * max(1.0, abs(L[i])):
                    t, v = th[i], float(L[i])
                cands.append((_wrap_angle(t), v))
            top = max(v for _, v in cands)
            cands = [t for t, v in cands if v >= top - 1e-9 * max(1.0, abs(top))]
        if prev is None:
            pick = min(cands, key=lambda t: (np.mod(t, TWO_PI), 0))
        else:
            pick = min(cands, key=lambda t: abs(_wrap_angle(t - prev)))
        flags.append(prev is not None and abs(_wrap_angle(pick - prev)) > jump)
        thetas.append(pick)
        prev = pick
    thetas = np.array(thetas)
    return np.asarray(grid) * np.exp(1j * thetas), thetas, np.array(flags, dtype=bool)


# ---------------------------------------------------------------------------
# L^p-type integrals


def _logsumexp(x, w=None):
    x = np.asarray(x, dtype=float)
    top = np.max(x)
    if not np.isfinite(top):
        return float(top)
    s = np.exp(x - top)
    if w is not None:
        s = s * w
    return float(top + math.log(np.sum(s)))


def _peak_arcs(v, h, drop=60.0):
    """Arcs [a, b] around the nodes where v is within ``drop`` of its maximum.

    Returns the arcs and a mask of the uniform nodes they cover, or None
    when the significant nodes wrap the whole circle.
    """
    n = len(v)
    sig = v >= np.max(v) - drop
    mask = sig | np.roll(sig, 1) | np.roll(sig, -1)
    if np.all(mask):
        return None
    shift = int(np.argmin(mask))  # a node outside every arc
    m = np.concatenate([np.roll(mask, -shift), [False]]).astype(int)
    edges = np.diff(m)
    starts = np.nonzero(edges == 1)[0] + 1
    stops = np.nonzero(edges == -1)[0]
    a = (starts + shift) * h
    b = (stops + shift) * h
    return np.array(a), np.array(b), mask, n


def log_circle_p_integral(f, r, kappa, tol=1e-10, max_nodes=2 ** 20, switch=2 ** 14):
    """log of int_0^{2 pi} |f(r e^{it})|^kappa dt.

    The periodic trapezoid rule is applied in log-sum-exp form.  If it has
    not settled at ``switch`` nodes the integrand is sharply peaked, and
    the arcs carrying the mass are refined with composite Gauss-Legendre
    panels while the rest of the circle keeps its trapezoid weights.
    """
    _check_radius(f, r)
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    n = _initial_nodes(f.domain, r)
    prev = None
    history = [math.nan, math.nan]
    while n <= max_nodes:
        h = TWO_PI / n
        th = h * np.arange(n)
        v = kappa * _logabs_on_circle(f, r, th)
        est = _logsumexp(v) + math.log(h)
        history = [history[1], est]
        if prev is not None and (est == prev or abs(est - prev) <= tol * max(1.0, abs(est))):
            return est
        prev = est
        if n >= switch and np.isfinite(np.max(v)):
            arcs = _peak_arcs(v, h)
            if arcs is not None:
                return _log_peak_integral(f, r, kappa, v, h, arcs, tol, max_nodes, history)
        n *= 2
    raise ConvergenceError("circle integral did not converge", tuple(history))


def _log_peak_integral(f, r, kappa, v, h, arcs, tol, max_nodes, history):
    a, b, mask, n = arcs
    rest = v[~mask]
    log_rest = _logsumexp(rest) + math.log(h) if rest.size else -math.inf
    panels = np.maximum(1, np.round((b - a) / h))
    prev = None
    while np.sum(panels) * GL_ORDER <= 8 * max_nodes:
        x, w = _gl_nodes(a, b, panels)
        vals = kappa * _logabs_on_circle(f, r, np.mod(x, TWO_PI))
        est = _logsumexp(np.array([_logsumexp(vals, w), log_rest]))
        history = [history[1], est]
        if prev is not None and (est == prev or abs(est - prev) <= tol * max(1.0, abs(est))):
            return est
        prev = est
        panels = panels * 2
    raise ConvergenceError("circle integral did not converge", tuple(history))


def circle_p_integral(f, r, kappa, tol=1e-10):
    """int_0^{2 pi} |f(r e^{it})|^kappa dt (may be inf when it overflows)."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_circle_p_integral(f, r, kappa, tol)))


def log_area_p_integral(f, r, kappa, tol=1e-8, max_levels=8):
    """log of int_0^r int_0^{2 pi} |f(s e^{it})|^kappa dt s ds.

    Radial Gauss-Legendre panels shrink geometrically towards ``r``; the
    panel depth and order are doubled until the estimate settles.
    """
    _check_radius(f, r)
    prev = None
    history = [math.nan, math.nan]
    depth, order = 6, 8
    for _ in range(max_levels):
        edges = r * (1.0 - 2.0 ** -np.arange(depth + 1, dtype=float))
        edges = np.append(edges, r)
        x, w = np.polynomial.legendre.leggauss(order)
        logs, logw = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi <= lo:
                continue
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            for xi, wi in zip(x, w):
                s = mid + half * xi
                logs.append(log_circle_p_integral(f, s, kappa, tol=tol * 1e-2) + math.log(s))
                logw.append(math.log(half * wi))
        est = _logsumexp(np.array(logs) + np.array(logw))
        history = [history[1], est]
        if prev is not None and abs(est - prev) <= tol * max(1.0, abs(est)):
            return est
        prev = est
        depth += 4
        order *= 2
    raise ConvergenceError("area integral did not converge", tuple(history))


def area_p_integral(f, r, kappa, tol=1e-8):
    with np.errstate(over="ignore"):
        return float(np.exp(log_area_p_integral(f, r, kappa, tol)))


# ---------------------------------------------------------------------------
# growth series and derived statistics


@dataclass
class GrowthSeries:
    """Per-radius m, N, T, log M and argmax angle (all in nats/radians)."""

    domain: str
    r: np.ndarray
    m: np.ndarray
    N: np.ndarray
    T: np.ndarray
    logM: np.ndarray
    argmax_theta: np.ndarray
    meta: dict = field(default_factory=dict)

    HEADER = ("r", "m", "N", "T", "logM", "argmax_theta")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for row in zip(self.r, self.m, self.N, self.T, self.logM, self.argmax_theta):
            w.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, domain=PLANE, meta=None):
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != cls.HEADER:
            raise ValueError(f"unexpected header {rows[0]!r}")
        cols = np.array([[float(v) for v in row] for row in rows[1:]]).T
        return cls(domain, *cols, meta=dict(meta or {}))


@dataclass
class GridSet:
    """Boolean mask over a radius grid; flagged point k stands for
    [r_k, r_{k+1}) (the last one for [r_k, 1) on the disc)."""

    r: np.ndarray
    mask: np.ndarray
    domain: str = DISC

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.r.shape != self.mask.shape:
            raise ValueError("mask length must equal grid length")

    def to_csv(self):
        lines = ["r,flag"]
        lines += [f"{format(float(r), '.17g')},{int(b)}" for r, b in zip(self.r, self.mask)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text, domain=DISC):
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["r", "flag"]:
            raise ValueError(f"unexpected header {rows[0]!r}")
        return cls([float(a) for a, _ in rows[1:]], [b == "1" for _, b in rows[1:]], domain)


@dataclass
class DeficiencyReport:
    a: complex
    r: np.ndarray
    ratios: np.ndarray
    liminf: float
    liminf_trimmed: float
    trim: float
    note: str = ("tail-third statistic; trimming approximates removal of an exceptional "
                 "set and is not a proof of the true liminf")


def growth_series(f, grid, tol=1e-8, with_poles=True):
    """Evaluate m, N(inf), T and log M of ``f`` on a radius grid."""
    grid = np.asarray(grid, dtype=float)
    m = np.array([proximity(f, r, tol) for r in grid])
    if with_poles and pole_atoms(f.node):
        n0, jumps = zero_moduli(f, math.inf, float(grid[-1]))
        N = np.array([_N_from_jumps(n0, jumps, r) for r in grid])
    else:
        N = np.zeros_like(m)
    mm = [max_modulus(f, r) for r in grid]
    return GrowthSeries(f.domain, grid, m, N, m + N,
                        np.array([v for v, _ in mm]), np.array([t for _, t in mm]),
                        meta={"tol": tol, "expr": f.render()})


def deficiency(f, a, grid, tol=1e-8, trim=0.1, series=None):
    """Deficiency estimate of the value ``a`` (``math.inf`` for poles)."""
    grid = np.asarray(grid, dtype=float)
    if series is None:
        T = np.array([characteristic(f, r, tol) for r in grid])
    else:
        T = np.asarray(series.T)
    if not T[-1] > T[0] * (1 + 1e-6) + 1e-9:
        raise ValueError("characteristic is bounded on this grid; deficiency is undefined")
    if a is None or (isinstance(a, float) and math.isinf(a)):
        mvals = np.array([proximity(f, r, tol) for r in grid])
    else:
        mvals = np.array([proximity(f, r, tol, a=a) for r in grid])
    ratios = mvals / T
    lo, lo_trim = tail_stat(ratios, "min", trim)
    return DeficiencyReport(a, grid, ratios, lo, lo_trim, trim)


@dataclass
class AdmissibilityResult:
    index: float
    increasing: bool
    admissible: bool
    ratios: np.ndarray


def admissibility_index(f, grid, threshold=1.0, tol=1e-8, series=None):
    """Tail maximum of T(r)/(-log(1-r)) on a disc grid, with a trend flag."""
    if f.domain != DISC:
        raise ValueError("admissibility is defined for disc-tagged functions")
    grid = np.asarray(grid, dtype=float)
    T = np.asarray(series.T) if series is not None else np.array([characteristic(f, r, tol) for r in grid])
    ratios = T / -np.log1p(-grid)
    tail = ratios[tail_window(len(ratios))]
    increasing = bool(len(tail) > 1 and np.all(np.diff(tail) > -1e-9 * np.abs(tail[1:])) and tail[-1] > tail[0])
    index = float(np.max(tail))
    return AdmissibilityResult(index, increasing, increasing and index > threshold, ratios)


def korenblum_probe(f, q, grid, n_theta=256):
    """max over sample points of (1 - |z|^2)^q |f(z)| (log-domain internally)."""
    if f.domain != DISC:
        raise ValueError("the Korenblum probe is defined on the disc")
    best = -math.inf
    th = TWO_PI * np.arange(n_theta) / n_theta
    for r in np.asarray(grid, dtype=float):
        L = _logabs_on_circle(f, r, th)
        best = max(best, float(np.max(L)) + q * math.log1p(-r * r))
    with np.errstate(over="ignore"):
        return float(np.exp(best))


def density_upper(gridset):
    """Tail limsup of |E cap [r, 1)| / (1 - r) for a disc grid set."""
    r = gridset.r
    right = np.append(r[1:], 1.0)
    seg = np.where(gridset.mask, right - r, 0.0)
    # measure of E in [r_k, 1)
    after = np.cumsum(seg[::-1])[::-1]
    ratios = after / (1.0 - r)
    return tail_stat(ratios, "max", 0.0)[0]


def log_density_upper(gridset):
    """Tail limsup of (int_{E cap [1, r]} dt/t) / log r for a plane grid set."""
    r = gridset.r
    right = np.append(r[1:], r[-1])
    seg = np.where(gridset.mask, np.log(right) - np.log(r), 0.0)
    seg = np.where(r >= 1, seg, 0.0)
    before = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(r > 1, before / np.log(r), 0.0)
    return tail_stat(ratios, "max", 0.0)[0]


@dataclass
class HyperOrderEstimate:
    value: float
    definitional: float
    low_confidence: bool


def hyper_order(series):
    """Hyper-order estimate limsup log log T / log r over the tail third.

    ``value`` uses the local order s(r) = dlog T/dlog r, since
    log log T = log log r + log s + o(1); the estimate log+ s(r) / log r
    drops the slowly decaying log log r / log r term that makes the plain
    quotient (reported as ``definitional``) creep towards 0 for functions
    of finite order.  Growth slower than r^(1/2) is treated as
    insufficient: value 0 with ``low_confidence`` set.
    """
    r = np.asarray(series.r, dtype=float)
    T = np.asarray(series.T, dtype=float)
    tail = tail_window(len(r))
    with np.errstate(divide="ignore", invalid="ignore"):
        loglogT = np.where(T > math.e, np.log(np.log(np.maximum(T, math.e))), np.nan)
        definitional = loglogT / np.log(r)
        local = np.gradient(np.log(np.maximum(T, 1e-300)), np.log(r))
    tail_def = definitional[tail]
    defn = float(np.nanmax(tail_def)) if np.any(np.isfinite(tail_def)) else 0.0
    s = local[tail]
    if np.any(T[tail] <= math.e) or np.max(s) < 0.5:
        return HyperOrderEstimate(0.0, defn, True)
    est = np.maximum(np.log(np.maximum(s, 1e-300)), 0.0) / np.log(r[tail])
    return HyperOrderEstimate(float(np.max(est)), defn, False)
