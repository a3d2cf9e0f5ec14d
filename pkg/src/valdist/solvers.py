"""Numerical solutions of linear equations.

* ODEs along rays: the companion system Y = (f, f', ..., f^{(n-1)}) is
  propagated with an embedded Dormand-Prince 5(4) pair.  After every
  accepted step each state row whose norm has left [0.5, 2] is divided by
  its norm and the logarithm is added to an accumulated scale, so
  exp-of-exp growth never overflows.
* Numeric solution bases as expression nodes (:func:`ode_base`): the
  derivative of the top component is -sum A_j f^{(j)}, so order-reduction
  identities hold exactly in terms of the computed values.
* Difference and q-difference recurrences iterated on lattices in log form.
"""
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .funcexpr import (
    DISC,
    PLANE,
    Const,
    DomainError,
    FunctionExpr,
    Node,
    constant,
    eval_log_many,
    compile_node,
    make_prod,
    make_sum,
    wrap_phase,
)
from .nevanlinna import GrowthSeries
from .operators import ResidualReport, equation_residual

__all__ = [
    "RaySolution",
    "LatticeSolution",
    "integrate_ray",
    "integrate_rays",
    "solution_growth",
    "ode_base",
    "iterate_lattice",
    "delta_to_shift",
    "shift_to_delta",
    "equation_residual",
    "ResidualReport",
]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array(_A[6] + [0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
_A_ROWS = [np.array(row + [0.0] * (7 - len(row))) for row in _A]


def _as_exprs(A, domain):
    return [a if isinstance(a, FunctionExpr) else constant(a, domain) for a in A]


class _Companion:
    """Right-hand side of dY/dt = d * M(t d) Y for rows with directions d."""

    def __init__(self, A, direction):
        self.A = A
        self.n = len(A)
        self.d = np.asarray(direction, dtype=complex)
        self.fns = [compile_node(a.node) for a in A]

    def __call__(self, t, Y, rows):
        d = self.d[rows]
        z = t * d
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            coef = [fn(z) for fn in self.fns]
        deriv = np.empty_like(Y)
        deriv[:, :-1] = Y[:, 1:]
        top = np.zeros(len(z), dtype=complex)
        for j, a in enumerate(coef):
            top -= a * Y[:, j]
        deriv[:, -1] = top
        return d[:, None] * deriv


def _propagate(rhs, Y0, t0, t_out, tol, length, h_min_rel=1e-10, max_steps=20_000):
    """Integrate the rows of Y from t0 through the increasing output times.

    Every row carries its own step size.  The local error estimate of a
    row (in its renormalised state) must stay below ``tol`` per unit step.
    Returns (states at outputs, log-scales at outputs, truncation time per
    row, accepted steps per row).  Rows whose right-hand side stops being
    finite, whose step would fall below ``h_min_rel * length``, or which
    exhaust ``max_steps`` accepted steps (stiffness near a coefficient
    blow-up) are frozen; their later outputs are NaN and their truncation
    time finite.
    """
    Y = np.array(Y0, dtype=complex)
    P, n = Y.shape
    t_out = np.asarray(t_out, dtype=float)
    nout = len(t_out)
    norms = np.linalg.norm(Y, axis=1)
    scale = np.log(norms)
    Y /= norms[:, None]
    t = np.full(P, float(t0))
    out_Y = np.full((nout, P, n), np.nan + 0j)
    out_s = np.full((nout, P), np.nan)
    idx = np.zeros(P, dtype=int)
    first = int(np.searchsorted(t_out, t0, side="right"))
    out_Y[:first] = Y
    out_s[:first] = scale
    idx[:] = first
    alive = np.ones(P, dtype=bool)
    t_trunc = np.full(P, np.inf)
    steps = np.zeros(P, dtype=int)
    hmin = h_min_rel * length
    span = (t_out[-1] - t0) if nout else 0.0
    h = np.full(P, min(0.01 * length, span) if span > 0 else 0.0)
    rows = np.nonzero(alive & (idx < nout))[0]
    k1 = np.zeros_like(Y)
    if rows.size:
        k1[rows] = rhs(t[rows], Y[rows], rows)
    while True:
        over = alive & (steps >= max_steps)
        if np.any(over):
            alive &= ~over
            t_trunc[over] = t[over]
        rows = np.nonzero(alive & (idx < nout))[0]
        if rows.size == 0:
            break
        tr = t[rows]
        target = t_out[idx[rows]]
        hr = np.minimum(h[rows], target - tr)
        hit = hr >= target - tr
        Yr = Y[rows]
        hcol = hr[:, None]
        ks = np.empty((7,) + Yr.shape, dtype=complex)
        ks[0] = k1[rows]
        for st in range(1, 7):
            inc = np.tensordot(_A_ROWS[st][:st], ks[:st], axes=1)
            ks[st] = rhs(tr + _C[st] * hr, Yr + hcol * inc, rows)
        y5 = Yr + hcol * np.tensordot(_B5[:6], ks[:6], axes=1)
        ev = hcol * np.tensordot(_E, ks, axes=1)
        finite = np.all(np.isfinite(y5), axis=1) & np.all(np.isfinite(ev), axis=1)
        err = np.where(finite, np.max(np.abs(np.where(np.isfinite(ev), ev, 0)), axis=1), np.inf)
        allowed = tol * hr
        acc = finite & (err <= allowed)
        # non-finite trial: shrink, or give up on the row at the minimum step
        nf = ~finite
        if np.any(nf):
            dead = rows[nf & (hr <= hmin)]
            alive[dead] = False
            t_trunc[dead] = t[dead]
            shrink = rows[nf & (hr > hmin)]
            h[shrink] = np.maximum(hr[nf & (hr > hmin)] * 0.25, hmin)
        a_rows = rows[acc]
        if a_rows.size:
            ya = y5[acc]
            ka = ks[6][acc]
            t[a_rows] = np.where(hit[acc], target[acc], tr[acc] + hr[acc])
            nrm = np.linalg.norm(ya, axis=1)
            ren = ((nrm < 0.5) | (nrm > 2.0)) & (nrm > 0)
            if np.any(ren):
                ya[ren] /= nrm[ren, None]
                ka[ren] /= nrm[ren, None]
                scale[a_rows[ren]] += np.log(nrm[ren])
            Y[a_rows] = ya
            k1[a_rows] = ka
            steps[a_rows] += 1
            done = a_rows[hit[acc]]
            out_Y[idx[done], done] = Y[done]
            out_s[idx[done], done] = scale[done]
            idx[done] += 1
        # step size update for finite trials
        fin_rows = rows[finite]
        e = err[finite]
        al = allowed[finite]
        with np.errstate(divide="ignore"):
            fac = np.where(e == 0, 5.0, np.clip(0.9 * (al / np.where(e == 0, 1, e)) ** 0.2, 0.2, 5.0))
        # a step cut short by an output time keeps its previous size
        h_new = hr[finite] * fac
        clipped = acc[finite] & hit[finite]
        h_new = np.where(clipped, np.maximum(h[fin_rows], h_new), h_new)
        under = h_new < hmin
        if np.any(under):
            dead = fin_rows[under]
            alive[dead] = False
            t_trunc[dead] = t[dead]
        h[fin_rows] = np.maximum(h_new, hmin)
    return out_Y, out_s, t_trunc, steps


@dataclass
class RaySolution:
    """A solution propagated along the ray z = r e^{i theta}.

    ``state`` rows are the renormalised (f, f', ..., f^{(n-1)}) at the
    radii ``r``; ``logscale`` holds the accumulated log-scale, so
    log|f(r e^{i theta})| = log|state[:, 0]| + logscale.
    """

    theta: float
    r: np.ndarray
    state: np.ndarray
    logscale: np.ndarray
    truncated: bool = False
    r_trunc: float = np.inf
    steps: int = 0
    richardson_delta: float = None

    def log_abs(self, k=0):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.state[:, k])) + self.logscale

    def log_abs_f(self):
        return self.log_abs(0)


def _check_ic(ic, n):
    ic = np.asarray(ic, dtype=complex)
    if ic.shape[-1] != n:
        raise ValueError(f"initial state must have {n} entries")
    if np.any(np.all(ic == 0, axis=-1)):
        raise ValueError("zero initial condition gives the identically zero solution")
    return ic


def integrate_rays(A, thetas, r_out, ic, r0=0.0, tol=1e-10, domain=PLANE):
    """Propagate one initial state along several rays at once.

    ``ic`` is the state (f, ..., f^{(n-1)}) at r0 (shape (n,) when shared
    by every ray, or (len(thetas), n)).  Local error per unit step is kept
    below ``tol`` in the renormalised state.
    """
    A = _as_exprs(A, domain)
    n = len(A)
    if n < 1:
        raise ValueError("need at least one coefficient")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    r_out = np.atleast_1d(np.asarray(r_out, dtype=float))
    if np.any(np.diff(r_out) <= 0) or r_out[0] < r0:
        raise ValueError("output radii must increase from r0")
    if domain == DISC and r_out[-1] >= 1:
        raise DomainError("disc rays must end before |z| = 1")
    ic = _check_ic(ic, n)
    Y0 = np.broadcast_to(ic, (len(thetas), n))
    rhs = _Companion(A, np.exp(1j * thetas))
    length = max(r_out[-1], 1e-3)
    Ys, ss, tt, steps = _propagate(rhs, Y0, r0, r_out, tol, length)
    out = []
    for i, th in enumerate(thetas):
        trunc = bool(np.isfinite(tt[i]))
        out.append(RaySolution(float(th), r_out.copy(), Ys[:, i, :].copy(), ss[:, i].copy(),
                               trunc, float(tt[i]), int(steps[i])))
    return out


def integrate_ray(A, theta, r_max, ic, r0=0.0, tol=1e-10, r_out=None, domain=PLANE,
                  richardson=False):
    """Propagate along a single ray; see :func:`integrate_rays`.

    With ``richardson=True`` the ray is recomputed at ``tol/2`` and the
    change in the final log|f| is stored in ``richardson_delta``.
    """
    if r_out is None:
        r_out = np.linspace(r0, r_max, 101)
    sol = integrate_rays(A, [theta], r_out, ic, r0, tol, domain)[0]
    if richardson:
        fine = integrate_rays(A, [theta], r_out, ic, r0, tol / 2, domain)[0]
        sol.richardson_delta = float(abs(fine.log_abs_f()[-1] - sol.log_abs_f()[-1]))
    return sol


def solution_growth(A, grid, ic, n_theta=64, tol=5e-3, ode_tol=1e-7, max_theta=1024,
                    domain=PLANE, keep_rays=False):
    """Growth series of the solution with initial state ``ic`` at 0.

    m(r, f) is the trapezoid mean over ``n_theta`` rays of max(0, log|f|);
    the ray count doubles (reusing old rays) until m changes by less than
    ``tol`` relative.  The solution is entire (or analytic in the disc), so
    N = 0 and T = m.  Radii beyond any ray's truncation are NaN.  With
    ``keep_rays`` the final angles and log|f| table go to ``meta["rays"]``.
    """
    grid = np.asarray(grid, dtype=float)
    logs = {}

    def run(thetas):
        for sol in integrate_rays(A, thetas, grid, ic, 0.0, ode_tol, domain):
            logs[sol.theta] = sol

    count = int(n_theta)
    run(2 * np.pi * np.arange(count) / count)
    prev = None
    while True:
        thetas = 2 * np.pi * np.arange(count) / count
        L = np.array([logs[float(t)].log_abs_f() for t in thetas])
        m = np.mean(np.maximum(L, 0.0), axis=0)
        if prev is not None:
            ok = np.isfinite(m) & np.isfinite(prev)
            change = np.abs(m[ok] - prev[ok]) / np.maximum(1.0, np.abs(m[ok]))
            if change.size == 0 or np.max(change) < tol or count >= max_theta:
                break
        elif count >= max_theta:
            break
        prev = m
        count *= 2
        run(2 * np.pi * (np.arange(count // 2) * 2 + 1) / count)
    j = np.nanargmax(np.where(np.isnan(L), -np.inf, L), axis=0)
    logM = L[j, np.arange(len(grid))]
    theta_max = np.array(wrap_phase(thetas[j]), dtype=float)
    missing = np.any(np.isnan(L), axis=0)
    m = np.where(missing, np.nan, m)
    logM = np.where(missing, np.nan, logM)
    meta = {"n_theta": count, "truncated_rays": int(sum(s.truncated for s in logs.values()))}
    if keep_rays:
        meta["rays"] = (thetas, L)
    return GrowthSeries(domain, grid, m, np.zeros_like(m), m.copy(), logM, theta_max, meta)


# ---------------------------------------------------------------------------
# numeric solution bases as expression nodes


class _OdeSystem:
    """Fundamental system of f^{(n)} + sum A_j f^{(j)} = 0 normalised at 0."""

    def __init__(self, A, domain, tol):
        self.A = A
        self.n = len(A)
        self.domain = domain
        self.tol = tol
        self._cache = {}

    def logs(self, z):
        """(logmag, phase) arrays of shape (n_base, n, len(z))."""
        z = np.asarray(z, dtype=complex)
        key = z.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        n = self.n
        P = z.size
        dirs = np.repeat(z.ravel(), n)
        Y0 = np.tile(np.eye(n, dtype=complex), (P, 1))
        nz = dirs != 0
        lm = np.full((P * n, n), -np.inf)
        ph = np.zeros((P * n, n))
        # at z = 0 the state is the initial condition itself
        with np.errstate(divide="ignore"):
            lm[~nz] = np.log(np.abs(Y0[~nz]))
        if np.any(nz):
            rhs = _Companion(self.A, dirs[nz])
            length = max(1.0, float(np.max(np.abs(dirs))))
            Ys, ss, _, _ = _propagate(rhs, Y0[nz], 0.0, [1.0], self.tol, length)
            with np.errstate(divide="ignore"):
                lm[nz] = np.log(np.abs(Ys[0])) + ss[0][:, None]
            ph[nz] = np.angle(Ys[0])
        lm = lm.reshape(P, n, n).transpose(1, 2, 0)
        ph = ph.reshape(P, n, n).transpose(1, 2, 0)
        out = (lm.reshape(n, n, *z.shape), ph.reshape(n, n, *z.shape))
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = out
        return out


class OdeSolution(Node):
    """k-th derivative of the i-th normalised solution of a linear ODE.

    Base function i has f^{(j)}(0) = [i == j].  Values come from
    integrating the companion system along the segment [0, z].
    """

    __slots__ = ()

    def __init__(self, system, i, k):
        super().__init__(system, int(i), int(k))

    def _value(self, z, memo):
        lm, ph = self.logval(z, memo)
        with np.errstate(over="ignore"):
            return np.exp(lm) * np.exp(1j * ph)

    def _log(self, z, memo):
        system, i, k = self._key
        lm, ph = system.logs(z)
        return lm[i, k], ph[i, k]

    def _derivative(self):
        system, i, k = self._key
        if k + 1 < system.n:
            return OdeSolution(system, i, k + 1)
        terms = [make_prod([Const(-1), a.node, OdeSolution(system, i, j)])
                 for j, a in enumerate(system.A)]
        return make_sum(terms)

    def _render(self, zs):
        system, i, k = self._key
        tick = "'" * k if k <= 3 else f"^({k})"
        return f"ode{i}{tick}({zs})"


def ode_base(A, domain=PLANE, tol=1e-12):
    """Numeric solution base of f^{(n)} + sum_j A_j f^{(j)} = 0.

    Returns n FunctionExpr objects; base function i is normalised by
    f^{(j)}(0) = [i == j].  The coefficients must be analytic on every
    segment [0, z] where the base is evaluated.
    """
    A = _as_exprs(A, domain)
    system = _OdeSystem(A, domain, tol)
    return [FunctionExpr(OdeSolution(system, i, 0), domain) for i in range(len(A))]


# ---------------------------------------------------------------------------
# difference and q-difference recurrences


def delta_to_shift(A):
    """Shift-form coefficients of L^n f + sum_k A_k L^k f = 0 (L = Delta or Delta_q).

    With E the step operator, L = E - 1 gives
    B_j = sum_{k >= j} A_k (-1)^{k-j} C(k, j) with A_n = 1, for the monic
    recurrence f(E^n z) + sum_j B_j f(E^j z) = 0.
    """
    n = len(A)
    full = list(A) + [1]
    out = []
    for j in range(n):
        acc = 0
        for k in range(j, n + 1):
            c = (-1) ** (k - j) * comb(k, j)
            acc = full[k] * c + acc if k < n else acc + c
        out.append(acc)
    return out


def shift_to_delta(B):
    """Inverse of :func:`delta_to_shift`: E = 1 + L gives A_k = sum_{j >= k} B_j C(j, k)."""
    n = len(B)
    full = list(B) + [1]
    out = []
    for k in range(n):
        acc = 0
        for j in range(k, n + 1):
            c = comb(j, k)
            acc = full[j] * c + acc if j < n else acc + c
        out.append(acc)
    return out


@dataclass
class LatticeSolution:
    """Values f(z0 + k) (shift kind) or f(q^k z0) (q kind) in log form."""

    z0: complex
    step: complex
    kind: str
    points: np.ndarray
    logmag: np.ndarray
    phase: np.ndarray
    max_residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def values(self):
        with np.errstate(over="ignore"):
            return np.exp(self.logmag) * np.exp(1j * self.phase)


def _coef_logs(B, pts):
    exprs = [b if isinstance(b, FunctionExpr) else constant(b) for b in B]
    logs = eval_log_many(exprs, pts)
    return np.array([lv.logmag for lv in logs]), np.array([lv.phase for lv in logs])


def iterate_lattice(B, kind, z0, K, seeds, q=None, check_tol=1e-10):
    """Forward iteration of f(E^n z) + sum_{j<n} B_j(z) f(E^j z) = 0.

    ``B`` has n entries (monic) or n+1 entries (last one leading).
    ``kind`` is "shift" (E z = z + 1) or "qshift" (E z = q z).  ``seeds``
    are the n starting values f(z0), ..., f(E^{n-1} z0) as complex numbers
    or (logmag, phase) pairs.  Returns K + n lattice values.
    """
    if kind not in ("shift", "qshift"):
        raise ValueError("kind must be 'shift' or 'qshift'")
    if kind == "qshift" and q is None:
        raise ValueError("q-lattice needs q")
    B = list(B)
    seeds = list(seeds)
    n = len(seeds)
    if len(B) == n:
        B = B + [1]
    if len(B) != n + 1:
        raise ValueError("need n or n+1 coefficients for n seeds")
    total = K + n
    idx = np.arange(total)
    if kind == "shift":
        pts = complex(z0) + idx
        step = 1
    else:
        pts = complex(z0) * complex(q) ** idx
        step = complex(q)
    lm = np.full(total, -np.inf)
    ph = np.zeros(total)
    for i, s in enumerate(seeds):
        if isinstance(s, tuple):
            lm[i], ph[i] = s
        else:
            s = complex(s)
            lm[i] = np.log(abs(s)) if s != 0 else -np.inf
            ph[i] = np.angle(s)
    if np.all(lm[:n] == -np.inf):
        raise ValueError("zero seeds give the identically zero solution")
    base = pts[:K] if K > 0 else pts[:0]
    clm, cph = _coef_logs(B, base)
    lead_small = ~(clm[n] > np.log(1e-300))
    if np.any(lead_small):
        bad = base[np.argmax(lead_small)]
        raise ValueError(f"leading coefficient vanishes at lattice point z = {bad}")
    worst = 0.0
    for k in range(K):
        tl = clm[:n, k] + lm[k:k + n]
        tp = cph[:n, k] + ph[k:k + n]
        peak = np.max(tl)
        if peak == -np.inf:
            lm[k + n] = -np.inf
            continue
        s = -np.sum(np.exp(tl - peak) * np.exp(1j * tp))
        new_l = peak + np.log(abs(s)) - clm[n, k] if s != 0 else -np.inf
        new_p = np.angle(s) - cph[n, k]
        lm[k + n] = new_l
        ph[k + n] = float(wrap_phase(new_p))
    # recheck every interior relation in log form
    for k in range(K):
        tl = np.concatenate([clm[:, k] + lm[k:k + n + 1]])
        tp = np.concatenate([cph[:, k] + ph[k:k + n + 1]])
        peak = np.max(tl)
        if peak == -np.inf:
            continue
        w = np.exp(tl - peak)
        rel = abs(np.sum(w * np.exp(1j * tp))) / np.sum(w)
        worst = max(worst, rel)
    if worst > check_tol:
        raise ArithmeticError(f"lattice recurrence residual {worst:.3g} exceeds {check_tol:g}")
    return LatticeSolution(complex(z0), step, kind, pts, lm, ph, worst)
