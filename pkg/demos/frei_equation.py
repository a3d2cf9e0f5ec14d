"""Walk through f'' - (2e^z+1) f' + e^{2z} f = 0 by hand.

Prints residuals of the base, the reduction monomials, the dominance
ratios for p = 0 and the characteristic of e^{e^z} against e^r/sqrt(r).
"""
import math

import numpy as np

from valdist import parse
from valdist.dominance import find_p
from valdist.nevanlinna import characteristic
from valdist.operators import equation_residual
from valdist.reduction import build_Ck, format_monomials, identity_residual, reduce_base, reduced_coefficients

A = [parse("exp(2*z)"), parse("-(2*exp(z)+1)")]
base = [parse("exp(exp(z))"), parse("exp(z)*exp(exp(z))")]

for f in base + [parse("z*exp(exp(z))")]:
    print(f"residual of {f.render():>24}: {equation_residual(A, 'derivative', f).max_residual:.2e}")

table = reduce_base(base)
reduced_coefficients(A, table)
for p in range(2):
    print(f"p={p} monomials:", "  ".join(format_monomials(build_Ck(2, p, table))),
          f" identity residual {identity_residual(A, table, p).max_residual:.2e}")

rep = find_p(A, "characteristic", np.linspace(5, 30, 26))
print("selected p:", rep.selected, " trimmed tail ratio for p=0:", round(rep.limsup[0][1], 4))

f = base[0]
for r in (3.0, 4.0, 5.0):
    T = characteristic(f, r)
    print(f"r={r}: T={T:.4f}  T sqrt(r) e^-r = {T * math.sqrt(r) * math.exp(-r):.4f}")
