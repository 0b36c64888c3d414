"""
The explicit cell construction for a small field
================================================

For a handful of jets the upper extremal extension is piecewise quadratic on
a finite cell complex indexed by subsets of the data.  Enumerating the cells
gives a solver-free way to evaluate it, and a check on the conic solver.
"""

import numpy as np

from lipext import ExtremalSolver, OneField, gamma1
from lipext.wells import WellsExtension

rng = np.random.default_rng(3)
field = OneField(rng.normal(size=(4, 2)), rng.normal(size=4), rng.normal(size=(4, 2)))
kappa = gamma1(field)
w = WellsExtension(field, kappa, "plus")

print(f"field constant {kappa:.6f}; {len(w.cells)} cells")
for cell in w.cells:
    print(f"  members {cell.members}: hull dim {len(cell.hull_basis)}, center {np.round(cell.s_c, 4)}")

###############################################################################
# Compare with the solver at random points.
solver = ExtremalSolver(field, kappa)
pts = rng.uniform(-3, 3, size=(300, 2))
diff = max(abs(w(x)[0] - solver.solve(x).value) for x in pts)
print(f"max difference from the solver over {len(pts)} points: {diff:.2e}")

counts = {}
for x in pts:
    counts[w(x)[2]] = counts.get(w(x)[2], 0) + 1
print("points per cell:", dict(sorted(counts.items(), key=lambda kv: (len(kv[0]), kv[0]))))
