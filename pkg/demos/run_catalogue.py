"""Run every built-in scenario into out/<name> and print one summary line each."""
import sys
import time

from valdist.catalogue import CATALOGUE, get_scenario
from valdist.harness import run

worst = 0
for name in CATALOGUE:
    t0 = time.perf_counter()
    res = run(get_scenario(name), f"out/{name}")
    counts = {}
    for c in res.checks:
        counts[c.verdict] = counts.get(c.verdict, 0) + 1
    summary = ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
    print(f"{name:<18} exit {res.exit_code}  {summary}  ({time.perf_counter() - t0:.1f} s)")
    worst = max(worst, res.exit_code)
sys.exit(worst)
