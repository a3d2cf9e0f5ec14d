"""Linear operators (d/dz, forward difference, q-difference) on expression
trees, and relative residuals of linear equations built from them."""
from dataclasses import dataclass, field

import numpy as np

from .funcexpr import (
    DISC,
    FunctionExpr,
    constant,
    delta,
    delta_q,
    differentiate,
    eval_log_many,
    qscale,
    shift,
)

__all__ = [
    "KINDS",
    "Operator",
    "ResidualReport",
    "sample_points",
    "equation_residual",
    "relative_sum",
]

KINDS = ("derivative", "delta", "qdelta")

SKIP_LOG = np.log(1e-120)


class Operator:
    """``L`` (one of d/dz, the forward difference, the q-difference) and its
    companion step ``E`` (identity, z -> z+1, z -> qz)."""

    def __init__(self, kind="derivative", q=None):
        if kind not in KINDS:
            raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")
        if kind == "qdelta":
            if q is None:
                raise ValueError("q-difference operator needs a ratio q")
            q = complex(q)
            if q == 0 or q == 1:
                raise ValueError("q must differ from 0 and 1")
            if q.imag == 0:
                q = q.real
        self.kind = kind
        self.q = q if kind == "qdelta" else None
        self._cache = {}

    @property
    def is_difference(self):
        return self.kind != "derivative"

    def __repr__(self):
        return f"Operator({self.kind!r}, q={self.q!r})"

    def apply(self, f, l=1):
        """``L^l f`` (cached per tree)."""
        key = (f, l)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if l == 0:
            out = f
        else:
            prev = self.apply(f, l - 1)
            if self.kind == "derivative":
                out = differentiate(prev)
            elif self.kind == "delta":
                out = delta(prev)
            else:
                out = delta_q(prev, self.q)
        self._cache[key] = out
        return out

    def step(self, f, s):
        """``E^s f``; the identity for the derivative kind."""
        if self.kind == "derivative" or s == 0:
            return f
        if self.kind == "delta":
            return shift(f, s)
        return qscale(f, self.q ** s)


def sample_points(domain, seed=42, n_circle=100, n_random=20):
    """Fixed residual sample set: points on a circle plus random interior points.

    Plane: 100 points on |z| = 1.5 and 20 uniform in |z| <= 2.  Disc: the
    same layout scaled to radius 0.7.
    """
    rmax = 0.7 if domain == DISC else 2.0
    rng = np.random.default_rng(seed)
    theta = 2 * np.pi * (np.arange(n_circle) + 0.5) / n_circle
    circ = 0.75 * rmax * np.exp(1j * theta)
    rad = rmax * np.sqrt(rng.random(n_random))
    ang = 2 * np.pi * rng.random(n_random)
    return np.concatenate([circ, rad * np.exp(1j * ang)])


def relative_sum(logs):
    """``|sum t_j| / sum |t_j|`` from log forms of the terms t_j.

    ``logs`` is a list of LogValue arrays of equal shape.  Returns the
    relative size and the log of the largest term (``-inf`` when every term
    vanishes, in which case the relative size is 0).
    """
    lm = np.array([np.asarray(lv.logmag, dtype=float) for lv in logs])
    ph = np.array([np.asarray(lv.phase, dtype=float) for lv in logs])
    peak = np.max(lm, axis=0)
    finite_peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        w = np.exp(lm - finite_peak)
        total = np.abs(np.sum(w * np.exp(1j * ph), axis=0))
        scale = np.sum(w, axis=0)
        rel = np.where(scale > 0, total / np.where(scale > 0, scale, 1.0), 0.0)
    rel = np.where(peak == -np.inf, 0.0, rel)
    return rel, peak


@dataclass
class ResidualReport:
    """Per-sample relative residuals of a linear equation."""

    max_residual: float
    residuals: np.ndarray
    samples: np.ndarray
    skipped: list = field(default_factory=list)
    trivial: bool = False

    def __float__(self):
        return float(self.max_residual)


def _as_expr(a, domain):
    if isinstance(a, FunctionExpr):
        return a
    return constant(a, domain)


def equation_residual(A, kind, candidate, samples=None, q=None):
    """Relative residual of ``L^n f + sum_k A_k L^k f = 0`` for a candidate f.

    At each sample the residual is ``|sum of terms| / sum |terms|``
    (evaluated in log form, so huge solutions are fine).  Samples where a
    term is not finite are skipped and listed.  The zero candidate gives
    residual 0 with ``trivial=True``.
    """
    op = Operator(kind, q)
    domain = candidate.domain
    A = [_as_expr(a, domain) for a in A]
    n = len(A)
    if samples is None:
        samples = sample_points(domain)
    samples = np.asarray(samples, dtype=complex)
    trivial = candidate.is_constant() and candidate.node.c == 0
    if trivial:
        z = np.zeros(samples.shape)
        return ResidualReport(0.0, z, samples, [], True)
    terms = [op.apply(candidate, n)]
    terms += [A[k] * op.apply(candidate, k) for k in range(n)]
    logs = eval_log_many(terms, samples)
    rel, peak = relative_sum(logs)
    bad = ~np.isfinite(peak) & (peak != -np.inf)
    for lv in logs:
        bad |= np.isnan(lv.logmag) | (lv.logmag == np.inf)
    rel = np.where(bad, np.nan, rel)
    skipped = [complex(s) for s in samples[bad]]
    good = rel[~bad]
    mx = float(np.max(good)) if good.size else float("nan")
    return ResidualReport(mx, rel, samples, skipped, False)
