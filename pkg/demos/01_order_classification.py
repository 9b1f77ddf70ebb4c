"""Growth-order classification of eps-parametrized amplitude curves.

Four canonical shapes: a pole eps^-3 (moderate of order 3), a square
eps^2 (negligible of order 2, and provably not of order 3), a flat tail
exp(-1/eps) (negligible at every tested order), and exp(1/eps), which
grows faster than any power and lands outside the moderate class.
"""

import numpy as np

from colombeau.asymptotics import EpsGrid, dump_fit_csv, estimate_growth_order

grid = EpsGrid.default()

curves = {
    "eps^-3": lambda e: e**-3,
    "eps^2": lambda e: e**2,
    "exp(-1/eps)": lambda e: np.exp(-1.0 / e),
    "exp(1/eps)": lambda e: np.exp(1.0 / e),
}

print(f"grid: {len(grid)} dyadic eps values, "
      f"{grid.values[0]:.3g} down to {grid.values[-1]:.3g}\n")

for name, amp in curves.items():
    with np.errstate(over="ignore"):
        samples = [float(amp(e)) for e in grid]
    verdict = estimate_growth_order(samples, grid)
    print(f"{name:>12}: {verdict}")

print("\nfit table for the pole (eps, value, fitted value):")
samples = [float(e**-3) for e in grid]
verdict = estimate_growth_order(samples, grid)
for line in dump_fit_csv(samples, grid, verdict).splitlines()[:6]:
    print("   ", line)
print("    ...")
