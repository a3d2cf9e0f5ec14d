"""Growth of exp((1-z)^(-2)) in the unit disc against 1/(1-r)."""
import numpy as np

from valdist import parse
from valdist.nevanlinna import growth_series
from valdist.scenario import parse_grid

g = parse("exp((1-z)^(-2))", "disc")
series = growth_series(g, parse_grid("disc:8:27:0.25", "disc"), tol=1e-6)
for r, T, logM in zip(series.r, series.T, series.logM):
    print(f"r={r:.5f}  T={T:11.4f}  T(1-r)={T * (1 - r):.4f}  log M (1-r)^2={logM * (1 - r) ** 2:.4f}")
print("T(1-r) range:", np.round([np.min(series.T * (1 - series.r)), np.max(series.T * (1 - series.r))], 4))
