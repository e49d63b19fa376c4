"""
Euclidean Steiner trees
=======================

A full Steiner tree on n terminals has n - 2 branching points of degree
three.  There are (2n - 5)!! such topologies.  Each one is realized by
convex minimization, and the shortest realizations are the Steiner minimal
trees.
"""

import math

import numpy as np

from mdmkit.steiner import enumerate_full_topologies, melzak_realize_2d, realize_convex, steiner_tree, validate_locally_minimal

# %%
# Topology counts grow as double factorials.
for n in range(3, 8):
    print(n, "terminals:", len(enumerate_full_topologies(n)), "full topologies")

# %%
# The unit square has two optimal trees, mirror images of each other, of
# length 1 + sqrt(3).
square = [[0, 0], [1, 0], [1, 1], [0, 1]]
for opt in steiner_tree(square):
    print(f"length {opt.total_length:.12f} (1 + sqrt 3 = {1 + math.sqrt(3):.12f})")
    print("  Steiner points", opt.coords[4:].round(6).tolist(), "violations", validate_locally_minimal(opt))

# %%
# In the plane each topology can also be built by the classical
# equilateral-triangle construction.  Most topologies have no full
# realization, and the construction then fails while the convex solver
# returns a degenerate tree.  Where the construction succeeds the two agree.
P = np.random.default_rng(4).random((5, 2))
for T in enumerate_full_topologies(5):
    mel = melzak_realize_2d(T, P)
    cvx = realize_convex(T, P)
    if mel is not None:
        print(f"{T.edges}: construction {mel.total_length:.12f}, convex {cvx.total_length:.12f}")
print("shortest over all topologies", min(realize_convex(T, P).total_length for T in enumerate_full_topologies(5)))
