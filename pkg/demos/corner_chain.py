"""
A minimizer with infinitely many corners
========================================

Points ``v_i`` on a circle of radius R, placed with geometrically shrinking
gaps, produce a minimizer that is a polyline with corners ``a_i``
accumulating at one point.  The truncation at depth k is a finite problem.
Its solution reproduces the corners, and the length increments shrink by a
factor of about 1/4 per extra corner.
"""

import numpy as np

from mdmkit.mdm import build_corner_instance, chain_solve, validate_minimizer_structure

# %%
# Solve the depth-8 truncation and compare the corners with the
# construction.
ci = build_corner_instance(1.0, 0.01, 100, 8)
chain = chain_solve(ci.v_points, ci.r)
print("converged", chain.converged)
print("largest corner error", float(np.abs(chain.coords - ci.a_points).max()))
print("structure violations", validate_minimizer_structure(chain.network(), ci.instance()).violations)

# %%
# Lengths of successive truncations.  Deep increments approach the rounding
# level of the total length, so the last ratios are noisier.
lengths = [chain_solve(build_corner_instance(1.0, 0.01, 100, k).v_points, 0.01).total_length for k in range(4, 11)]
inc = np.diff(lengths)
print("increments", [f"{x:.3e}" for x in inc])
print("ratios", np.round(inc[1:] / inc[:-1], 4).tolist())
