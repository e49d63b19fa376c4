"""
Maximal distance minimizers for finite sets
===========================================

Given points M and a radius r, find the shortest connected network S with
every point of M within distance r of S.  For finite M the answer is a
Steiner tree whose terminals may move inside the disks of radius r.
"""

import math

import numpy as np

from mdmkit.mdm import Instance, coverage_radius, solve_finite_M, truncate_full_steiner, validate_minimizer_structure

# %%
# The equilateral triangle with side 1 and r = 0.05.  The Steiner tree
# through the vertices has length sqrt(3), and the minimizer cuts r off each
# of its three legs.
P = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
inst = Instance(0.05, points=P)
best = solve_finite_M(inst)[0]
print(f"solver length {best.total_length:.12f}, sqrt(3) - 3r = {math.sqrt(3) - 0.15:.12f}")
print("coverage radius", coverage_radius(best, P))

trunc = truncate_full_steiner(P, 0.05)
print(f"truncated Steiner tree length {trunc.length:.12f}")

# %%
# The structure check confirms what a minimizer must look like: every point
# of S is within r of M, leaves end exactly on the circles around M, and
# branching points have three edges meeting at 120 degrees.
report = validate_minimizer_structure(best.network(), inst)
print("violations:", report.violations)

# %%
# Five random points with a larger radius.  Several legs may shrink to
# nothing, so the optimum can have fewer than five leaves.
rng = np.random.default_rng(11)
inst = Instance(0.15, points=rng.random((5, 2)))
for sol in solve_finite_M(inst):
    print(f"length {sol.total_length:.6f}, coverage {coverage_radius(sol, inst.points):.6f}")
