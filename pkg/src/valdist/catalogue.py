"""Built-in scenarios covering the standard example equations."""
import math

from .scenario import load_scenario

__all__ = ["CATALOGUE", "canonical_zeros", "examples_catalogue", "get_scenario"]

DISC_H = "(1-z)^(-2)"


def canonical_zeros(count=57):
    """Zeros 2^k and 2^k + eps_k with eps_k = exp(-exp(2^k)) / 2, k = 1..count.

    With count = 57 every omitted factor differs from 1 by less than 1e-15
    on |z| <= 128.  For k >= 2 the perturbation is below double resolution,
    so those zeros are stored as double zeros.
    """
    zeros = []
    for k in range(1, count + 1):
        eps = math.exp(-math.exp(2.0 ** k)) / 2 if 2.0 ** k < 700 else 0.0
        zeros += [2.0 ** k, 2.0 ** k + eps]
    return zeros


def _zeros_expr():
    return "zeros(" + ", ".join(format(z, ".17g") for z in canonical_zeros()) + ")"


_FREI = """
[scenario]
name = frei-ex12
description = f'' - (2e^z+1) f' + e^{2z} f = 0 with base e^{e^z}, e^z e^{e^z}
coefficients = exp(2*z); -(2*exp(z)+1)
solutions = exp(exp(z)); exp(z)*exp(exp(z))
grid = linear:5:30:26

[residual]

[reduce]

[dominance]
kinds = characteristic, max_modulus
expect_p = 0

[growth]
functions = f1
grid = linear:3:5:5

[conclusion]
solution = f1
reference = A0
grid = linear:2:5:7

[solve]
ic = exp(1), exp(1)
grid = linear:1:3:5
compare = f1

[check:T(r, e^{e^z}) sqrt(r) e^{-r} above 0.05]
file = growth_f1.csv
expr = T*sqrt(r)*exp(-r)
stat = min
op = >=
threshold = 0.05

[check:T(r, e^{e^z}) sqrt(r) e^{-r} below 1]
file = growth_f1.csv
expr = T*sqrt(r)*exp(-r)
stat = max
op = <=
threshold = 1.0
"""

_CANONICAL = f"""
[scenario]
name = canonical-product
description = zero-order canonical product with zeros 2^k and 2^k + eps_k
solutions = {_zeros_expr()}
grid = linear:9:63:19

[growth]
functions = f1
zero_counts = yes

[qratio]
function = f1
q = 2
grid = linear:9:127:60

[check:n(r, 1/f) / log2 r at least 1.5]
file = growth_f1_zeros.csv
expr = n/log2(r)
stat = min
op = >=
threshold = 1.5

[check:n(r, 1/f) / log2 r at most 2.5]
file = growth_f1_zeros.csv
expr = n/log2(r)
stat = max
op = <=
threshold = 2.5

[check:T(r, f) / log(r)^2 at most 10]
file = growth_f1.csv
expr = T/log(r)^2
stat = max
op = <=
threshold = 10
"""

_CURVE_22 = """
[scenario]
name = curve-ex22
description = f'' + e^{-z^2} f' + e^z f = 0; curve condition along the positive axis
coefficients = exp(z); exp(-z^2)
grid = linear:1:10:19

[curve]
p = 0
eta = 2

[dominance]
kinds = characteristic, max_modulus
grid = linear:2:10:9
"""

_CURVE_EXP = """
[scenario]
name = curve-exp-minus
description = f'' + e^{-z} f' + e^z f = 0; curve ratio equals exp(-3r)/2
coefficients = exp(z); exp(-z)
grid = linear:1:10:10

[curve]
p = 0
eta = 2

[check:curve ratio matches exp(-3r)/2]
file = curve.csv
expr = abs(ratio/(0.5*exp(-3*r)) - 1)
stat = max
op = <
threshold = 1e-9
"""

_DISC_B2 = f"""
[scenario]
name = disc-beta2
description = disc equation with h = (1-z)^(-2) and base e^h, e^h e^(e^h)
domain = disc
tol = 1e-06
coefficients = 4*exp(2*{DISC_H})/(1-z)^6; -4*exp({DISC_H})/(1-z)^3 - 2/(1-z)^3 - 3/(1-z)
solutions = exp(exp({DISC_H})); exp({DISC_H})*exp(exp({DISC_H}))
grid = disc:14:31:0.25

[residual]

[reduce]

[growth]
functions = A0, A1, exp({DISC_H})
grid = disc:8:27:0.25

[dominance]
kinds = characteristic

[conclusion]
solution = f1
reference = A0
lower = 0.2
grid = 0.9, 0.92, 0.94, 0.95, 0.96

[check:T(r, e^h)(1-r) above 0.1]
file = growth_expr2.csv
where =
expr = T*(1-r)
stat = tail_min
op = >=
threshold = 0.1

[check:T(r, e^h)(1-r) below 0.3]
file = growth_expr2.csv
expr = T*(1-r)
stat = tail_max
op = <=
threshold = 0.3
"""

_DISC_CURVE = """
[scenario]
name = disc-curve
description = disc equation with A_1 = exp(-(1-z)^(-4)), A_0 = exp((1-z)^(-2)); curve along (0, 1)
domain = disc
coefficients = exp((1-z)^(-2)); exp(-(1-z)^(-4))
grid = disc:4:24:0.25

[curve]
p = 0
eta = 2

[growth]
functions = A0
"""

_GAMMA = """
[scenario]
name = gamma-difference
description = difference equation solved by Gamma(z) and 2^z (Casoratian vanishes at z = 2, so the lattice starts at 3)
operator = delta
coefficients = from_base
solutions = gamma(z); exp(0.6931471805599453*z)

[residual]

[reduce]

[reduce:lattice]
lattice = 0.3+0.1i

[solve]
z0 = 3
steps = 40
seeds_from = f1
"""

_QPOLY = """
[scenario]
name = qdiff-poly
description = q-difference equation (q = 2) with polynomial base z^2, z^3 + 1
operator = qdelta
q = 2
coefficients = from_base
solutions = z^2; z^3+1

[residual]

[reduce]

[solve]
z0 = 0.5+0.25i
steps = 30
seeds_from = f2
"""

_EXP_DEF = """
[scenario]
name = exp-deficiency
description = deficiency of 0 and 1 for e^z and its characteristic r/pi
solutions = exp(z)
grid = linear:10:60:11

[growth]
functions = f1

[deficiency]
function = f1
values = 0, 1

[check:T(r, e^z) pi / r within 1%]
file = growth_f1.csv
expr = abs(T*pi/r - 1)
stat = max
op = <=
threshold = 0.01

[check:delta(0) at least 0.95]
file = deficiency.csv
where = a=0
expr = ratio
stat = tail_min
op = >=
threshold = 0.95

[check:delta(1) at most 0.05]
file = deficiency.csv
where = a=1
expr = ratio
stat = tail_max
op = <=
threshold = 0.05
"""

_INF_ORDER = """
[scenario]
name = rapid-base
description = f'' + (e^{z^2} - e^z) f' - (e^{z^2+z} + e^z) f = 0 with solution e^{e^z}; the p = 0 ratios tend to 1 from below
coefficients = -(exp(z^2+z)+exp(z)); exp(z^2)-exp(z)
solutions = exp(exp(z))
grid = linear:2:8:13

[residual]

[dominance]
kinds = characteristic, max_modulus

[reduce]
base = numeric
"""

_ML = """
[scenario]
name = mittag-leffler
description = A_0 = E_{1/2}(z) of order 2 with T(r) ~ r^2/(2 pi)
solutions = ml(0.5; z)
grid = linear:4:20:9

[growth]
functions = f1

[check:T(r, E_1/2) 2 pi / r^2 near 1]
file = growth_f1.csv
expr = T*2*pi/r^2
stat = tail_max
op = <=
threshold = 1.1
"""

CATALOGUE = {
    "frei-ex12": ("f'' - (2e^z+1) f' + e^{2z} f = 0: residuals, reduction, dominance p = 0",
                  _FREI),
    "canonical-product": ("zero-order canonical product: zero counts, T growth, q-ratio", _CANONICAL),
    "curve-ex22": ("f'' + e^{-z^2} f' + e^z f = 0: curve condition for p = 0", _CURVE_22),
    "curve-exp-minus": ("f'' + e^{-z} f' + e^z f = 0: curve condition for p = 0", _CURVE_EXP),
    "disc-beta2": ("disc equation with admissible coefficients and closed-form base", _DISC_B2),
    "disc-curve": ("disc curve condition with A_1 = exp(-(1-z)^(-4))", _DISC_CURVE),
    "gamma-difference": ("difference equation with the Gamma function in its base", _GAMMA),
    "qdiff-poly": ("q-difference equation with a polynomial base", _QPOLY),
    "exp-deficiency": ("deficiencies of 0 and 1 for e^z", _EXP_DEF),
    "rapid-base": ("equation with solution e^{e^z} and borderline coefficient ratios", _INF_ORDER),
    "mittag-leffler": ("growth of the order-2 Mittag-Leffler function", _ML),
}


def examples_catalogue():
    """(name, one-line description) pairs of the built-in scenarios."""
    return [(name, desc) for name, (desc, _) in CATALOGUE.items()]


def get_scenario(name):
    if name not in CATALOGUE:
        raise KeyError(f"no built-in scenario {name!r}")
    return load_scenario(CATALOGUE[name][1])
