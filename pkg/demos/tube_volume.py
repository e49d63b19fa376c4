"""
Tube volume around a curve
==========================

The volume of the R-neighbourhood of a curve of length L is at most
``L * |B^{d-1}| * R^(d-1) + |B^d| * R^d``.  The bound is attained exactly
when every point of the tube has a single nearest point on the curve.  This
script checks a smooth arc, which attains it, and a right-angle corner,
which does not.
"""

import math

from mdmkit.geometry import circle_arc, polyline
from mdmkit.tube import check_theorem_c11, tube_area_2d

# %%
# A quarter circle of radius 1 with R = 0.5.  Its radius of curvature is 1,
# so nearest points are unique and the Monte Carlo estimate should agree
# with the bound within its confidence interval.
arc = circle_arc(1.0, 0.0, math.pi / 2, 1e-3)
rep = check_theorem_c11(arc, 0.5, samples=200_000)
print(f"arc:    estimate {rep.volume_estimate:.4f} +- {rep.volume_ci_halfwidth:.4f}, bound {rep.upper_bound:.4f}")
print(f"        equality {rep.equality}, curvature radius {rep.curvature_radius:.4f}")

# %%
# The L-shaped polyline (1,0) -> (0,0) -> (0,1) with R = 0.3.  Inside the
# corner the two sides compete for the nearest point, the tube overlaps
# itself and the volume falls short of the bound.  A witness is a point with
# two nearest points far apart along the curve.
corner = polyline([[1, 0], [0, 0], [0, 1]])
rep = check_theorem_c11(corner, 0.3, samples=200_000)
w = rep.witness
print(f"corner: estimate {rep.volume_estimate:.4f} +- {rep.volume_ci_halfwidth:.4f}, bound {rep.upper_bound:.4f}")
print(f"        exact area {tube_area_2d(corner, 0.3):.6f}")
print(f"        witness at {w.p.round(3)} with feet at arc length {w.t1:.3f} and {w.t2:.3f}")
