"""
Lower bounds and the average distance functional
================================================

Two simple lower bounds hold for any network covering M at distance r.  The
tube of radius r around S must contain M, which bounds the length through
the volume of M.  For convex planar M the perimeter gives a second bound.
The average distance functional is a related problem.  It integrates the
distance to a curve over the neighbourhood of a fixed curve.
"""

import math

import numpy as np

from mdmkit.geometry import polyline
from mdmkit.mdm import lower_bound_perimeter, lower_bound_volume
from mdmkit.tube import avg_distance_functional

# %%
# A set of area pi covered at r = 0.1 needs length at least about 15.55.
print(f"volume bound {lower_bound_volume(math.pi, 0.1, 2):.5f}")

# %%
# The boundary of the square of side 2.
square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
print(f"perimeter bound {lower_bound_perimeter(square, 0.1):.5f}")

# %%
# The functional of the unit segment against itself with R = 0.5 is
# 0.25 + pi / 12.  A tilted segment of the same length scores higher.
gamma = polyline([[0, 0], [1, 0]])
val, ci = avg_distance_functional(gamma, gamma, 0.5, samples=200_000)
print(f"F(gamma) = {val:.4f} +- {ci:.4f}, closed form {0.25 + math.pi / 12:.4f}")
tilted = polyline([[0.0, -0.1], [math.sqrt(1 - 0.04), 0.1]])
val, ci = avg_distance_functional(tilted, gamma, 0.5, samples=200_000)
print(f"tilted segment {val:.4f} +- {ci:.4f}")
