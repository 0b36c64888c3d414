"""
A two-point field and its pinch point
=====================================

Two jets at a = (-1, 0) and b = (1, 0) with opposite unit gradients already
force the field constant up to sqrt(3).  Every minimal extension has to pass
through one point c with a fixed jet; this script locates it and compares
the two extremal extensions with an explicit piecewise-quadratic one.
"""

import numpy as np

from lipext import ExtremalSolver, gamma1, lip_df
from lipext.verification import BiponctualModel, e1_fixture

field = e1_fixture()
kappa = gamma1(field)
print(f"field constant {kappa:.12f} (sqrt 3 = {np.sqrt(3):.12f}), gradient Lipschitz ratio {lip_df(field)}")

# The explicit model knows where the pinch is.
model = BiponctualModel.from_field(field)
print("pinch point c =", model.c, " value", model.u_c, " gradient", model.d_c)

###############################################################################
# Upper and lower extensions.  Lower values come from the upper solver applied
# to the negated field.
up = ExtremalSolver(field, kappa)
down = ExtremalSolver(field.negated(), kappa)

print("\n      x        y       u-        model       u+")
for s in np.linspace(-1.5, 1.5, 7):
    x = np.array([s, 0.6])
    lo = -down.solve(x).value
    hi = up.solve(x).value
    print(f"{x[0]:8.3f} {x[1]:8.3f} {lo:10.5f} {model(x)[0]:10.5f} {hi:10.5f}")

###############################################################################
# At c the three coincide, gradient included.
r = up.solve(model.c)
print("\nat c: u+ =", r.value, "gradient", r.gradient, "pinned:", r.pinned)
