"""Maximal distance minimizers: the shortest connected sets within distance r of M.

Includes the covering functional, length lower bounds for convex regions,
the exact solver for finite M through disk-constrained Steiner trees, the
truncated Steiner tree construction, structural validation, and the corner
example whose minimizer has infinitely many corner points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    EmbeddedNetwork,
    as_points,
    convex_hull_2d,
    distances_to_network,
    hausdorff_distance,
    network_of,
    polygon_area,
    polygon_perimeter,
)
from .steiner import (
    TWO_PI_3,
    Disk,
    Realization,
    Topology,
    _angle,
    _minimize_network,
    enumerate_full_topologies,
    realize_all,
    select_optima,
    steiner_tree,
)
from .tube import unit_ball_volume

ENERGETIC_REL = 1e-6


@dataclass(frozen=True, eq=False)
class Instance:
    """A finite set ``points`` or a convex ``polygon``, with covering radius ``r``."""

    r: float
    points: Optional[np.ndarray] = None
    polygon: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if (self.points is None) == (self.polygon is None):
            raise ValueError("an instance has either points or a polygon")
        for name in ("points", "polygon"):
            val = getattr(self, name)
            if val is not None:
                arr = as_points(val).copy()
                if len(arr) == 0:
                    raise ValueError("M must be non-empty")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        object.__setattr__(self, "r", float(self.r))

    @property
    def dim(self) -> int:
        return (self.points if self.points is not None else self.polygon).shape[1]

    @property
    def M(self) -> np.ndarray:
        return self.points if self.points is not None else self.polygon

    def to_json(self) -> dict:
        out: dict = {"dim": self.dim, "r": self.r}
        if self.points is not None:
            out["points"] = self.points.tolist()
        else:
            out["polygon"] = self.polygon.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        if not isinstance(obj, dict) or "r" not in obj:
            raise ValueError("instance JSON needs 'r' and 'points' or 'polygon'")
        inst = cls(float(obj["r"]), obj.get("points"), obj.get("polygon"))
        if "dim" in obj and int(obj["dim"]) != inst.dim:
            raise ValueError("'dim' does not match the coordinates")
        return inst


# ---------------------------------------------------------------------------
# Functional and bounds
# ---------------------------------------------------------------------------


def coverage_radius(S, M) -> float:
    """``max over y in M of dist(y, S)``."""
    return float(distances_to_network(as_points(M), network_of(S)).max())


def lower_bound_volume(M_measure: float, r: float, d: int) -> float:
    """Length lower bound ``(|M| - w_d r^d) / (w_{d-1} r^{d-1})`` clamped at 0."""
    if not r > 0:
        raise ValueError("r must be positive")
    if M_measure < 0:
        raise ValueError("measure must be non-negative")
    return max(0.0, (M_measure - unit_ball_volume(d) * r**d) / (unit_ball_volume(d - 1) * r ** (d - 1)))


def is_convex_polygon(poly) -> bool:
    """True when the polygon's perimeter matches its convex hull's (collinear vertices allowed)."""
    P = as_points(poly)
    if P.shape[1] != 2 or len(P) < 3:
        return False
    hull = convex_hull_2d(P)
    if len(hull) < 3:
        return False
    per, hper = polygon_perimeter(P), polygon_perimeter(hull)
    return per <= hper * (1 + 1e-12) and abs(polygon_area(P) - polygon_area(hull)) <= 1e-12 * polygon_area(hull)


def lower_bound_perimeter(polygon, r: float) -> float:
    """Length lower bound ``(perimeter - 2 pi r) / 2`` for a convex planar region."""
    if not r > 0:
        raise ValueError("r must be positive")
    if not is_convex_polygon(polygon):
        raise ValueError("polygon is not convex")
    return max(0.0, (polygon_perimeter(polygon) - 2 * math.pi * r) / 2)


# ---------------------------------------------------------------------------
# Finite M
# ---------------------------------------------------------------------------


def min_enclosing_ball(P) -> tuple[np.ndarray, float]:
    """Smallest ball containing the points (exhaustive over supporting subsets)."""
    P = as_points(P)
    d = P.shape[1]
    best_c, best_r = P[0], math.inf
    for k in range(1, min(len(P), d + 1) + 1):
        for idx in itertools.combinations(range(len(P)), k):
            Q = P[list(idx)]
            c = _circumcenter_affine(Q)
            if c is None:
                continue
            rad = float(np.linalg.norm(Q[0] - c))
            if rad < best_r and np.all(np.linalg.norm(P - c, axis=1) <= rad * (1 + 1e-12) + 1e-15):
                best_c, best_r = c, rad
    return best_c, best_r


def _circumcenter_affine(Q: np.ndarray) -> Optional[np.ndarray]:
    """Center of the smallest sphere through all of ``Q`` within their affine hull."""
    if len(Q) == 1:
        return Q[0].copy()
    A = Q[1:] - Q[0]
    G = A @ A.T
    rhs = 0.5 * np.einsum("ij,ij->i", A, A)
    try:
        lam = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        return None
    return Q[0] + lam @ A


def _point_realization(p) -> Realization:
    return Realization.from_coords(Topology(1, ()), np.array([p], dtype=float))


def solve_finite_M(inst: Instance) -> list[Realization]:
    """All shortest connected sets within distance ``r`` of the finite set ``M``.

    Each point of ``M`` becomes a terminal confined to its closed r-disk and
    every full topology is realized; collapsed edges give the non-full
    trees.  Overlapping disks are handled only when all disks share a point
    (the answer is a point) or when there are two of them.
    """
    if inst.points is None:
        raise ValueError("solve_finite_M needs a finite point set")
    P, r = inst.points, inst.r
    n = len(P)
    if not 1 <= n <= 8:
        raise ValueError("n must be between 1 and 8")
    c, rad = min_enclosing_ball(P)
    if rad <= r * (1 + 1e-12):
        return [_point_realization(c)]
    if n == 2:
        u = (P[1] - P[0]) / np.linalg.norm(P[1] - P[0])
        T = Topology(2, ((0, 1),))
        X = np.array([P[0] + r * u, P[1] - r * u])
        return [Realization.from_coords(T, X, True, (Disk(P[0], r), Disk(P[1], r)))]
    for i, j in itertools.combinations(range(n), 2):
        if np.linalg.norm(P[i] - P[j]) <= 2 * r:
            raise ValueError("overlapping constraint disks are only supported for n <= 2")
    disks = [Disk(p, r) for p in P]
    return select_optima(realize_all(enumerate_full_topologies(n), disks))


def truncate_full_steiner(points, r: float) -> EmbeddedNetwork:
    """The Steiner tree of ``points`` with every terminal leg shortened by ``r``.

    Requires a unique full Steiner tree and ``r`` below the shortest leg.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    opts = steiner_tree(points)
    if len(opts) > 1:
        raise ValueError("tied Steiner trees")
    St = opts[0]
    if St.collapsed or not St.topology.is_full:
        raise ValueError("Steiner tree is not full")
    T, X = St.topology, np.array(St.coords)
    n = T.n_terminals
    if n == 2:
        q = 0.5 * float(np.linalg.norm(X[1] - X[0]))
    else:
        adj = T.adjacency()
        q = min(float(np.linalg.norm(X[i] - X[adj[i][0]])) for i in range(n))
    if not r < q:
        raise ValueError(f"r = {r} is not below the shortest leg q = {q}")
    Y = X.copy()
    if n == 2:
        u = (X[1] - X[0]) / np.linalg.norm(X[1] - X[0])
        Y[0], Y[1] = X[0] + r * u, X[1] - r * u
    else:
        for i in range(n):
            s = T.adjacency()[i][0]
            u = (X[s] - X[i]) / np.linalg.norm(X[s] - X[i])
            Y[i] = X[i] + r * u
    return EmbeddedNetwork(Y, T.edges)


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------


@dataclass
class StructureReport:
    coverage_radius: float
    energetic: list
    corresponding_points: list
    angle_violations: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "coverage_radius": self.coverage_radius,
            "energetic": list(self.energetic),
            "corresponding_points": [
                {"x": [float(v) for v in x], "y": [float(v) for v in y]} for x, y in self.corresponding_points
            ],
            "angle_violations": list(self.angle_violations),
            "violations": list(self.violations),
        }


def validate_minimizer_structure(S, inst: Instance, tol: float = 1e-6) -> StructureReport:
    """Check the necessary structure of a maximal distance minimizer for a finite ``M``.

    No cycles, degree at most 3, branching angles of 120 degrees, no angle
    below 120 degrees, coverage within ``r``, and every endpoint and corner
    energetic: some ``y`` in ``M`` at distance ``r`` whose open r-ball misses
    the network.  Angles use ``tol`` in radians; the energetic band is
    ``1e-6`` relative to ``r``.
    """
    net = network_of(S)
    if not net.is_connected:
        raise ValueError("network is disconnected")
    if inst.points is None:
        raise ValueError("structure validation needs a finite point set")
    M, r = inst.points, inst.r
    band = ENERGETIC_REL * r
    violations, angle_viol = [], []
    cov = coverage_radius(net, M)
    if cov > r + band:
        violations.append(f"coverage radius {cov:.12g} exceeds r = {r:.12g}")
    if len(net.edges) >= len(net.nodes):
        violations.append("cycle")
    dM = distances_to_network(M, net)
    free = dM >= r - band  # open r-ball of y misses the network
    energetic, pairs = [], []
    adj = net.adjacency()
    for v, x in enumerate(net.nodes):
        dist = np.linalg.norm(M - x, axis=1)
        hits = np.flatnonzero((np.abs(dist - r) <= band) & free)
        energetic.append(bool(len(hits)))
        for j in hits:
            pairs.append((x.copy(), M[j].copy()))
        deg = len(adj[v])
        U = [net.nodes[w] - x for w in adj[v]]
        if deg > 3:
            violations.append(f"degree {deg} at node {v}")
        elif deg == 3:
            for i, j in ((0, 1), (0, 2), (1, 2)):
                a = _angle(U[i], U[j])
                if abs(a - TWO_PI_3) > tol:
                    angle_viol.append(f"branching angle {a:.9g} != 2π/3 at node {v}")
        elif deg == 2:
            a = _angle(U[0], U[1])
            if a < TWO_PI_3 - tol:
                angle_viol.append(f"angle {a:.9g} < 2π/3 at node {v}")
            if a < math.pi - tol and not energetic[-1]:
                violations.append(f"non-energetic corner at node {v}")
        elif deg == 1 and not energetic[-1]:
            violations.append(f"non-energetic endpoint at node {v}")
    return StructureReport(cov, energetic, pairs, angle_viol, violations + angle_viol)


# ---------------------------------------------------------------------------
# Corner example
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CornerInstance:
    """Truncation at depth ``k`` of the polyline with corners accumulating at ``a_inf``.

    ``a_points`` are ``a_1..a_k`` followed by the end point of the truncated
    minimizer; ``v_points`` are ``v_1..v_k`` followed by the truncating point.
    ``a_local`` and ``v_local`` hold the same points relative to ``a_inf``;
    ``length`` and fine angular checks should use them, since absolute
    coordinates round the deepest chords.
    """

    R: float
    r: float
    N: int
    k: int
    a_points: np.ndarray
    v_points: np.ndarray
    a_inf: np.ndarray
    v_inf: np.ndarray
    v_inf_next: np.ndarray
    a_local: np.ndarray
    v_local: np.ndarray
    length: float

    @property
    def minimizer(self) -> EmbeddedNetwork:
        m = len(self.a_points)
        return EmbeddedNetwork(self.a_points, [(i, i + 1) for i in range(m - 1)])

    def instance(self) -> Instance:
        return Instance(self.r, points=self.v_points)

    def to_json(self) -> dict:
        return {
            "R": self.R,
            "r": self.r,
            "N": self.N,
            "k": self.k,
            "a_points": self.a_points.tolist(),
            "v_points": self.v_points.tolist(),
            "a_inf": self.a_inf.tolist(),
            "v_inf": self.v_inf.tolist(),
            "v_inf_next": self.v_inf_next.tolist(),
            "length": self.length,
        }


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def build_corner_instance(R: float, r: float, N: int, k: int) -> CornerInstance:
    """Points ``a_i`` on the circle of radius ``R`` with halving chords from ``r/N``.

    ``a_1`` sits at the top of the circle and the points run clockwise.
    Central angles come from the chord lengths in closed form, and all
    construction happens relative to the accumulation point ``a_inf``.
    """
    if not (R > 0 and r > 0):
        raise ValueError("R and r must be positive")
    if k < 2:
        raise ValueError("k must be at least 2")
    c1 = r / N
    if not c1 < 2 * R:
        raise ValueError("N too small: first chord exceeds the diameter")
    # the central angles beyond 80 halvings are below rounding of the tail sums
    chords = c1 * 0.5 ** np.arange(k + 80)
    phis = 2 * np.arcsin(chords / (2 * R))
    tails = np.cumsum(phis[::-1])[::-1][: k + 2]  # theta_i - theta_inf
    theta_inf = math.pi / 2 - math.fsum(phis)
    mid = theta_inf + 0.5 * tails
    half = np.sin(0.5 * tails)
    # a_i - a_inf through the sum-to-product identities
    loc = R * np.column_stack([-2 * np.sin(mid) * half, 2 * np.cos(mid) * half])
    for i in range(k):
        if not _angle(loc[i] - loc[i + 1], loc[i + 2] - loc[i + 1]) > math.pi / 2:
            raise ValueError("N too small: chord angles must exceed π/2")
    a_inf = R * np.array([math.cos(theta_inf), math.sin(theta_inf)])
    u_inf = np.array([math.cos(theta_inf), math.sin(theta_inf)])
    v_inf_loc = r * u_inf
    v_next_loc = r * np.array([math.sin(theta_inf), -math.cos(theta_inf)])

    a = loc[: k + 1]
    v = np.empty((k, 2))
    v[0] = a[0] + r * _unit(a[0] - a[1])
    for i in range(1, k):
        # the bisector is perpendicular to the difference of the unit chords; their sum cancels
        ub, uf = _unit(a[i - 1] - a[i]), _unit(a[i + 1] - a[i])
        bis = _unit(np.array([ub[1] - uf[1], uf[0] - ub[0]]))
        if bis @ np.array([math.cos(theta_inf + tails[i]), math.sin(theta_inf + tails[i])]) > 0:
            bis = -bis  # point into the angle, towards the centre
        v[i] = a[i] - r * bis
    # reflect the incoming direction in the normal at a_k, then project v_{inf+1} on that ray
    ak = a[k - 1]
    nrm = _unit(v[k - 1] - ak)
    back = _unit(a[k - 2] - ak)
    out = 2 * float(back @ nrm) * nrm - back
    s = max(0.0, float((v_next_loc - ak) @ out))
    if not s > r:
        raise ValueError("N too small: truncating point lies within r of a_k")
    a_loc = np.vstack([a[:k], ak + (s - r) * out])
    v_loc = np.vstack([v, ak + s * out])
    length = math.fsum(np.linalg.norm(np.diff(a_loc, axis=0), axis=1))
    a_pts, v_pts = a_loc + a_inf, v_loc + a_inf
    v_inf, v_next = a_inf + v_inf_loc, a_inf + v_next_loc
    for arr in (a_pts, v_pts, a_inf, v_inf, v_next, a_loc, v_loc):
        arr.setflags(write=False)
    return CornerInstance(R, r, N, k, a_pts, v_pts, a_inf, v_inf, v_next, a_loc, v_loc, length)


def chain_solve(centers, r: float, seed: int = 42, verify: bool = True) -> Realization:
    """Shortest polyline ``u_1 ... u_m`` with every ``u_i`` in the closed disk ``B_r(c_i)``.

    The problem is convex.  With ``verify`` a second run from an independent
    random start must reach the same polyline within ``1e-6`` (Hausdorff),
    otherwise ``converged`` is false.
    """
    C = as_points(centers)
    m = len(C)
    if m < 1:
        raise ValueError("need at least one center")
    c, rad = min_enclosing_ball(C)
    if rad <= r * (1 + 1e-12):
        return _point_realization(c)
    T = Topology(m, tuple((i, i + 1) for i in range(m - 1)))
    disks = [Disk(p, r) for p in C]

    def run(s: int) -> Realization:
        rng = np.random.default_rng(s)
        v = rng.normal(size=C.shape)
        X = C + r * rng.random((m, 1)) * v / np.linalg.norm(v, axis=1)[:, None]
        sol = _minimize_network(X, T.edges, [False] * m, disks)
        return Realization.from_coords(T, sol.X, sol.converged, tuple(disks))

    first = run(seed)
    if not verify:
        return first
    second = run(seed + 1_000_003)
    agree = hausdorff_distance(first.network(), second.network()) <= 1e-6
    return Realization.from_coords(T, first.coords, first.converged and second.converged and agree, tuple(disks))
