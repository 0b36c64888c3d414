"""
Extending a Lipschitz map of the plane
======================================

A map R^2 -> R^2 known at five points is lifted to a 1-field on R^4 whose
field constant equals the map's Lipschitz constant.  The gradient of the
upper extremal extension on the zero section is a Lipschitz extension with
the same constant.
"""

import numpy as np

from lipext import gamma1
from lipext.kirszbraun import LipschitzMapData, MapExtender, lift_map, lipschitz_constant, one_point_oracle

rng = np.random.default_rng(1)
data = LipschitzMapData(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
l = lipschitz_constant(data)
print(f"Lipschitz constant {l:.10f}, field constant of the lift {gamma1(lift_map(data)):.10f}")

ext = MapExtender(data)
queries = rng.uniform(-2, 2, size=(200, 2))
values = np.array([ext(x) for x in queries])

###############################################################################
# Audit every pair among data and queries.
X = np.vstack([data.x, queries])
U = np.vstack([data.u, values])
dx = np.linalg.norm(X[:, None] - X[None], axis=2)
np.fill_diagonal(dx, np.inf)
ratio = np.linalg.norm(U[:, None] - U[None], axis=2) / dx
print(f"largest ratio over {len(X)} points: {ratio.max():.10f}")

###############################################################################
# The one-point minimax problem gives the best possible value at a single new
# point; the extension is feasible there but need not be the minimizer.
x = queries[0]
best = one_point_oracle(data, x)
mine = np.max(np.linalg.norm(data.u - ext(x), axis=1) / np.linalg.norm(data.x - x, axis=1))
print(f"at {x}: optimal one-point ratio {best['ratio']:.6f}, extension's ratio {mine:.6f}")
