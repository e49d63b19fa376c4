"""Steiner topologies, their realizations, and local-minimality checks.

Nodes ``0..n-1`` of a topology are terminals; nodes ``n..`` are Steiner
points.  Realizations minimize total edge length either exactly in the
plane (equilateral-point construction) or with a general convex solver that
also handles terminals confined to disks.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import EmbeddedNetwork, as_point, hausdorff_distance, network_of, worker_count

TWO_PI_3 = 2 * math.pi / 3
COLLAPSE_REL = 1e-8
TIE_REL = 1e-9
MAX_TERMINALS = 8


# ---------------------------------------------------------------------------
# Topologies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Tree over ``n_terminals`` labelled terminals plus unlabelled Steiner nodes."""

    n_terminals: int
    edges: tuple

    def __post_init__(self):
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        n_nodes = self.n_nodes
        if self.n_terminals < 1:
            raise ValueError("a topology needs at least one terminal")
        if len(edges) != n_nodes - 1:
            raise ValueError("a topology must be a tree")
        deg = self.degrees()
        if self.n_steiner > max(0, self.n_terminals - 2):
            raise ValueError("too many Steiner nodes")
        if np.any(deg[self.n_terminals:] != 3):
            raise ValueError("Steiner nodes must have degree 3")
        if self.n_terminals > 1 and np.any(deg == 0):
            raise ValueError("topology is not connected")
        adj = self.adjacency()
        seen, stack = {0}, [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != n_nodes:
            raise ValueError("topology is not connected")

    @property
    def n_nodes(self) -> int:
        top = max((max(e) for e in self.edges), default=0)
        return max(self.n_terminals, top + 1)

    @property
    def n_steiner(self) -> int:
        return self.n_nodes - self.n_terminals

    @property
    def is_full(self) -> bool:
        return self.n_terminals == 2 and len(self.edges) == 1 or (
            self.n_steiner == self.n_terminals - 2 and bool(np.all(self.degrees()[: self.n_terminals] == 1))
        )

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def label(self, i: int) -> str:
        return f"t{i + 1}" if i < self.n_terminals else f"s{i - self.n_terminals + 1}"

    def splits(self) -> frozenset:
        """Terminal bipartitions induced by the edges; equal iff same up to relabelling."""
        adj = self.adjacency()
        out = set()
        for a, b in self.edges:
            side, stack = {b}, [b]
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w != a and w not in side:
                        side.add(w)
                        stack.append(w)
            terms = frozenset(i for i in side if i < self.n_terminals)
            other = frozenset(range(self.n_terminals)) - terms
            out.add(min(terms, other, key=lambda s: sorted(s)))
        return frozenset(out)

    def to_json(self) -> dict:
        return {"n": self.n_terminals, "edges": [[self.label(a), self.label(b)] for a, b in self.edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "Topology":
        n = int(obj["n"])

        def idx(lbl: str) -> int:
            if not isinstance(lbl, str) or len(lbl) < 2 or lbl[0] not in "ts":
                raise ValueError(f"bad node label {lbl!r}")
            k = int(lbl[1:]) - 1
            if k < 0 or (lbl[0] == "t" and k >= n):
                raise ValueError(f"bad node label {lbl!r}")
            return k if lbl[0] == "t" else n + k

        return cls(n, tuple((idx(a), idx(b)) for a, b in obj["edges"]))


def enumerate_full_topologies(n: int) -> list[Topology]:
    """All ``(2n-5)!!`` full Steiner topologies on ``n`` terminals.

    Each one arises exactly once by inserting terminal ``k`` on an edge of
    a full topology for the first ``k`` terminals.
    """
    if not 2 <= n <= MAX_TERMINALS:
        raise ValueError(f"n must be between 2 and {MAX_TERMINALS}")
    if n == 2:
        return [Topology(2, ((0, 1),))]
    trees = [[(0, n), (1, n), (2, n)]]
    for k in range(3, n):
        s = n + k - 2
        trees = [
            [e for j, e in enumerate(tree) if j != i] + [(tree[i][0], s), (tree[i][1], s), (k, s)]
            for tree in trees
            for i in range(len(tree))
        ]
    return [Topology(n, tuple(t)) for t in trees]


# ---------------------------------------------------------------------------
# Realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Disk:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))


def _parse_terminal(item):
    if isinstance(item, Disk):
        return item
    if isinstance(item, dict):
        return Disk(item["center"], item["radius"])
    if isinstance(item, tuple) and len(item) == 2 and np.ndim(item[1]) == 0 and np.ndim(item[0]) == 1:
        return Disk(item[0], item[1])
    return as_point(item)


@dataclass(frozen=True, eq=False)
class Realization:
    """Node coordinates for a topology, possibly with disk-constrained terminals."""

    topology: Topology
    coords: np.ndarray
    total_length: float
    converged: bool = True
    constraints: Optional[tuple] = None
    collapsed: tuple = field(default=())

    @classmethod
    def from_coords(cls, topology: Topology, coords, converged: bool = True, constraints=None) -> "Realization":
        X = np.array(coords, dtype=float)
        X.setflags(write=False)
        L = _tree_length(X, topology.edges)
        scale = _diameter(X)
        collapsed = tuple(e for e in topology.edges if np.linalg.norm(X[e[0]] - X[e[1]]) <= COLLAPSE_REL * scale)
        return cls(topology, X, L, converged, constraints, collapsed)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def network(self, tol: Optional[float] = None) -> EmbeddedNetwork:
        """The realized point set with coincident nodes merged."""
        if not self.topology.edges:
            return EmbeddedNetwork.point(self.coords[0])
        if tol is None:
            tol = COLLAPSE_REL * max(_diameter(self.coords), 1e-300)
        segs = [(self.coords[a], self.coords[b]) for a, b in self.topology.edges]
        net = EmbeddedNetwork.from_segments(segs, tol=tol)
        if net.edges or len(net.nodes) == 1:
            return net
        return EmbeddedNetwork.point(self.coords[0])

    def to_json(self) -> dict:
        out = self.topology.to_json()
        out["coords"] = {self.topology.label(i): [float(x) for x in p] for i, p in enumerate(self.coords)}
        out["length"] = self.total_length
        out["converged"] = self.converged
        if self.constraints is not None:
            out["constraints"] = [
                None if c is None else {"center": [float(x) for x in c.center], "radius": c.radius}
                for c in self.constraints
            ]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Realization":
        T = Topology.from_json(obj)
        X = np.array([obj["coords"][T.label(i)] for i in range(T.n_nodes)], dtype=float)
        cons = obj.get("constraints")
        if cons is not None:
            cons = tuple(None if c is None else Disk(c["center"], c["radius"]) for c in cons)
        return cls.from_coords(T, X, bool(obj.get("converged", True)), cons)


def _tree_length(X: np.ndarray, edges) -> float:
    if not edges:
        return 0.0
    e = np.asarray(edges)
    return math.fsum(np.linalg.norm(X[e[:, 0]] - X[e[:, 1]], axis=1))


def _diameter(X: np.ndarray) -> float:
    X = np.asarray(X)
    return float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))


# ---------------------------------------------------------------------------
# Planar equilateral-point construction
# ---------------------------------------------------------------------------


def _equilateral_apex(a: np.ndarray, b: np.ndarray, sign: int) -> np.ndarray:
    m = 0.5 * (a + b)
    d = b - a
    return m + sign * (math.sqrt(3) / 2) * np.array([-d[1], d[0]])


def melzak_realize_2d(T: Topology, terminals) -> Optional[Realization]:
    """Exact planar realization of a full topology, or ``None`` if not realizable.

    Every Steiner node replaces its two subtrees by an equilateral point; the
    tree length is the distance from the root terminal to the last such point.
    Both apex sides are tried for every node and a reconstruction is kept
    only if all Steiner points have positive edges at 120 degrees.
    """
    P = np.array([as_point(p) for p in terminals])
    if P.shape[1] != 2:
        raise ValueError("non-planar input")
    if len(P) != T.n_terminals:
        raise ValueError("terminal count does not match the topology")
    if not T.is_full:
        raise ValueError("topology is not full")
    n = T.n_terminals
    if n == 2:
        return Realization.from_coords(T, P)
    adj = T.adjacency()
    root = 0
    top = adj[root][0]
    order: list[tuple[int, int, int, int]] = []  # (node, parent, child1, child2) in post-order

    def visit(v: int, parent: int):
        if v < n:
            return
        kids = [w for w in adj[v] if w != parent]
        for w in kids:
            visit(w, v)
        order.append((v, parent, kids[0], kids[1]))

    visit(top, root)
    best = None
    for signs in itertools.product((1, -1), repeat=len(order)):
        E = {i: P[i] for i in range(n)}
        for (v, _, c1, c2), s in zip(order, signs):
            E[v] = _equilateral_apex(E[c1], E[c2], s)
        X = np.zeros((T.n_nodes, 2))
        X[:n] = P
        pos = {root: P[root]}
        ok = True
        for v, parent, c1, c2 in reversed(order):
            # v lies on the segment parent -> E[v], on the circle through E[c1], E[c2], E[v]
            C = (E[c1] + E[c2] + E[v]) / 3.0
            d = pos[parent] - E[v]
            dd = float(d @ d)
            if dd == 0.0:
                ok = False
                break
            u = -2.0 * float((E[v] - C) @ d) / dd
            if not 0.0 < u < 1.0:
                ok = False
                break
            pos[v] = E[v] + u * d
            X[v] = pos[v]
        if not ok:
            continue
        if _steiner_angles_ok(X, T, 1e-7):
            R = Realization.from_coords(T, X)
            if not R.collapsed and (best is None or R.total_length < best.total_length):
                best = R
    return best


def _steiner_angles_ok(X: np.ndarray, T: Topology, tol: float) -> bool:
    adj = T.adjacency()
    for v in range(T.n_terminals, T.n_nodes):
        U = X[adj[v]] - X[v]
        L = np.linalg.norm(U, axis=1)
        if np.any(L <= 0.0):
            return False
        U = U / L[:, None]
        for i, j in ((0, 1), (0, 2), (1, 2)):
            if abs(math.acos(max(-1.0, min(1.0, float(U[i] @ U[j])))) - TWO_PI_3) > tol:
                return False
    return True


# ---------------------------------------------------------------------------
# Convex length minimization with fixed, free and disk-constrained nodes
# ---------------------------------------------------------------------------


@dataclass
class _Solve:
    X: np.ndarray
    converged: bool
    length: float


class _UnionFind:
    def __init__(self, n: int):
        self.p = list(range(n))

    def find(self, a: int) -> int:
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a: int, b: int):
        self.p[self.find(a)] = self.find(b)


def _project(x: np.ndarray, disk: Disk) -> np.ndarray:
    d = x - disk.center
    n = float(np.linalg.norm(d))
    if n <= disk.radius:
        return x
    return disk.center + d * (disk.radius / n)


def _warm_start(X, edges, fixed, disks, scale, sweeps=(40, 40, 40, 60), mus=(1e-1, 1e-2, 1e-3, 1e-5)):
    """Smoothed majorize-minimize sweeps (Weiszfeld-type) to reach the right basin."""
    n = len(X)
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    movable = [i for i in range(n) if not fixed[i] and adj[i]]
    for mu_rel, count in zip(mus, sweeps):
        mu2 = (mu_rel * scale) ** 2
        for _ in range(count):
            for i in movable:
                nb = X[adj[i]]
                w = 1.0 / np.sqrt(np.einsum("ij,ij->i", nb - X[i], nb - X[i]) + mu2)
                x = (w[:, None] * nb).sum(axis=0) / w.sum()
                X[i] = _project(x, disks[i]) if disks[i] is not None else x
    return X


def _minimize_network(
    X0: np.ndarray,
    edges: Sequence[tuple[int, int]],
    fixed: Sequence[bool],
    disks: Sequence[Optional[Disk]],
    max_rounds: int = 40,
) -> _Solve:
    """Minimize total edge length over non-fixed nodes, disk nodes kept in their disks.

    Edge lengths are first smoothed to ``sqrt(l^2 + mu^2)`` and ``mu`` is
    driven to zero by Newton continuation, so only the disk constraints need
    an active set.  A final exact polish works on the tree with collapsed
    edges contracted and ends with first-order checks: contracted edges are
    re-opened when separating them lowers the length, boundary nodes are
    released when their multiplier has the wrong sign, and nodes resting on
    a boundary are charted on it.  ``converged`` reports whether the checks
    passed with the length settled to rounding level.
    """
    X = np.array(X0, dtype=float)
    n, d = X.shape
    edges = [tuple(e) for e in edges]
    pts = [X[i] for i in range(n) if fixed[i]] + [dk.center for dk in disks if dk is not None]
    scale = max(_diameter(np.array(pts)) if pts else 0.0, _diameter(X), 1e-300)
    # work about the centroid so coordinate rounding matches the size of the instance
    origin = np.mean(np.array(pts), axis=0) if pts else X.mean(axis=0)
    X = X - origin
    disks = [None if dk is None else Disk(dk.center - origin, dk.radius) for dk in disks]
    for i in range(n):
        if disks[i] is not None:
            X[i] = _project(X[i], disks[i])
    if not edges:
        return _Solve(X + origin, True, 0.0)
    X = _warm_start(X, edges, fixed, disks, scale, sweeps=(30,), mus=(1e-1,))
    active = [dk is not None and np.linalg.norm(X[i] - dk.center) >= dk.radius * (1 - 1e-9) for i, dk in enumerate(disks)]
    # smoothed continuation: each stage is smooth, so only disk constraints need an active set
    singles = [[i] for i in range(n)]
    for mu_rel in 10.0 ** -np.arange(1, 11):
        for _ in range(2 * n + 2):
            X, active, _ = _newton(X, edges, fixed, disks, active, singles, scale, mu=mu_rel * scale)
            if not _kkt_repair(X, edges, fixed, disks, active, singles, scale, mu=mu_rel * scale):
                break
    # exact polish on the tree with collapsed edges contracted
    tau = 1e-7 * scale
    converged = False
    # a release is tentative: multipliers of nearly straight chains sit at the
    # rounding level, so one that does not lead to a shorter stationary point
    # is undone and the node stays on its boundary
    keep: set[int] = set()
    trial = None
    for _ in range(max_rounds):
        X, active, stationary = _newton(X, edges, fixed, disks, active, _groups(X, edges, tau), scale)
        length = _tree_length(X, edges)
        if trial is not None:
            X_prev, active_prev, length_prev, node = trial
            trial = None
            noise = 1e-14 * max(length_prev, 1e-300)
            if not (stationary and _feasible(X, disks) and length < length_prev - noise):
                X, active, length, stationary = X_prev, active_prev, length_prev, True
                keep.add(node)
        best = X.copy()  # repairs perturb X; never return a perturbed point
        snapshot = (best, list(active), length)
        fix = _kkt_repair(X, edges, fixed, disks, active, _groups(X, edges, tau), scale, keep=keep)
        if fix is not None and fix[0] == "release" and stationary:
            trial = (*snapshot, fix[1])
        if stationary and fix is None:
            converged = True
            break
    return _Solve(best + origin, converged, _tree_length(best, edges))


def _feasible(X, disks, rel=1e-12) -> bool:
    return all(dk is None or np.linalg.norm(X[i] - dk.center) <= dk.radius * (1 + rel) for i, dk in enumerate(disks))


def _groups(X, edges, tau) -> list[list[int]]:
    uf = _UnionFind(len(X))
    for a, b in edges:
        if np.linalg.norm(X[a] - X[b]) <= tau:
            uf.union(a, b)
    out: dict[int, list[int]] = {}
    for i in range(len(X)):
        out.setdefault(uf.find(i), []).append(i)
    return list(out.values())


def _tangent_basis(nrm: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning the plane orthogonal to the unit vector ``nrm``."""
    if len(nrm) == 2:
        return np.array([[-nrm[1], nrm[0]]])
    a = np.eye(3)[int(np.argmin(np.abs(nrm)))]
    t1 = np.cross(nrm, a)
    t1 /= np.linalg.norm(t1)
    return np.array([t1, np.cross(nrm, t1)])


def _group_state(groups, fixed, disks, active, X, d):
    """Kind of each contracted node: fixed, free, interior (in disks) or sphere (one active disk)."""
    kinds, sph, member_disks, Y = [], [], [], np.array([X[m[0]] for m in groups])
    for g, members in enumerate(groups):
        fx = [i for i in members if fixed[i]]
        dks = [disks[i] for i in members if disks[i] is not None]
        act = [disks[i] for i in members if disks[i] is not None and active[i]]
        member_disks.append(dks)
        sph.append(act[0] if len(act) == 1 else None)
        if fx:
            Y[g] = X[fx[0]]
            kinds.append("fixed")
        elif len(act) >= min(2, d):
            kinds.append("fixed")  # pinned where two circles cross (or on a circle in 3D)
        elif act:
            kinds.append("sphere")
        else:
            kinds.append("interior" if dks else "free")
    return kinds, sph, member_disks, Y


def _feasible(y, dks, slack=1e-12) -> bool:
    return all(np.linalg.norm(y - dk.center) <= dk.radius * (1 + slack) for dk in dks)


def _newton(X, edges, fixed, disks, active, groups, scale, mu=0.0, max_iter=200):
    """Damped Newton on the contracted tree; returns positions, active flags and stationarity.

    With ``mu > 0`` every edge length is smoothed to ``sqrt(l^2 + mu^2)``.
    """
    d = X.shape[1]
    active = list(active)
    gid = np.empty(len(X), dtype=int)
    for g, members in enumerate(groups):
        gid[members] = g
    gedges = [(gid[a], gid[b]) for a, b in edges if gid[a] != gid[b]]
    kinds, sph, mdisks, Y = _group_state(groups, fixed, disks, active, X, d)
    if not gedges:
        return X, active, True
    ga = np.array([e[0] for e in gedges])
    gb = np.array([e[1] for e in gedges])

    mu2 = mu * mu

    def length(Yv):
        E = Yv[ga] - Yv[gb]
        return math.fsum(np.sqrt(np.einsum("ij,ij->i", E, E) + mu2))

    def activate(g, y):
        """Mark member disks whose boundary ``y`` touches as active."""
        for i in groups[g]:
            dk = disks[i]
            if dk is not None and np.linalg.norm(y - dk.center) >= dk.radius * (1 - 1e-12):
                active[i] = True

    def chart_grad_norm(Yv, blocks, kinds, sph):
        E = Yv[ga] - Yv[gb]
        U = E / np.sqrt(np.einsum("ij,ij->i", E, E) + mu2)[:, None]
        gv = np.zeros_like(Yv)
        np.add.at(gv, ga, U)
        np.subtract.at(gv, gb, U)
        tot = 0.0
        for g in blocks:
            v = gv[g]
            if kinds[g] == "sphere":
                nrm = (Yv[g] - sph[g].center) / sph[g].radius
                v = sph[g].radius * (v - float(v @ nrm) * nrm)
            tot += float(v @ v)
        return math.sqrt(tot)

    gtol = 1e-15
    stall = 0
    ulp_scale = max(scale, float(np.abs(X).max()))
    f = length(Y)
    stationary = False
    for _ in range(max_iter):
        kinds, sph, _, _ = _group_state(groups, fixed, disks, active, X, d)
        blocks, pos, nvar = [], {}, 0
        for g, k in enumerate(kinds):
            if k in ("free", "interior"):
                J = np.eye(d)
            elif k == "sphere":
                J = sph[g].radius * _tangent_basis((Y[g] - sph[g].center) / sph[g].radius).T
            else:
                continue
            blocks.append(g)
            pos[g] = (nvar, J)
            nvar += J.shape[1]
        if nvar == 0:
            stationary = True
            break
        E = Y[ga] - Y[gb]
        L = np.sqrt(np.einsum("ij,ij->i", E, E) + mu2)
        if mu == 0.0 and np.any(L <= 1e-14 * scale):
            break
        U = E / L[:, None]
        gY = np.zeros_like(Y)
        np.add.at(gY, ga, U)
        np.subtract.at(gY, gb, U)
        grad = np.zeros(nvar)
        H = np.zeros((nvar, nvar))
        for g in blocks:
            o, Jg = pos[g]
            k = Jg.shape[1]
            grad[o:o + k] = Jg.T @ gY[g]
            if kinds[g] == "sphere":
                # chart curvature r*lam; a wrong-sign multiplier would make the model
                # indefinite on nearly straight chains, so its magnitude is used
                nrm = (Y[g] - sph[g].center) / sph[g].radius
                H[o:o + k, o:o + k] += sph[g].radius * abs(float(gY[g] @ nrm)) * np.eye(k)
        for e, (a, b) in enumerate(zip(ga, gb)):
            He = (np.eye(d) - np.outer(U[e], U[e])) / L[e]
            for p, sp in ((a, 1.0), (b, -1.0)):
                if p not in pos:
                    continue
                op, Jp = pos[p]
                for q, sq in ((a, 1.0), (b, -1.0)):
                    if q not in pos:
                        continue
                    oq, Jq = pos[q]
                    H[op:op + Jp.shape[1], oq:oq + Jq.shape[1]] += sp * sq * (Jp.T @ He @ Jq)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= gtol * max(1.0, len(gedges)):
            stationary = True
            break
        lam = 1e-12 * max(1.0, float(np.abs(np.diag(H)).max()))
        newton_step = True
        try:
            step = -np.linalg.solve(H + lam * np.eye(nvar), grad)
            if not float(step @ grad) < 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -grad * (scale / max(gnorm, 1e-300)) * 1e-2
            newton_step = False
        # flat objectives leave tiny gradients far from the optimum, so stop on the step size
        disp = max(float(np.linalg.norm(pos[g][1] @ step[pos[g][0]:pos[g][0] + pos[g][1].shape[1]])) for g in blocks)
        if newton_step and disp <= 1e-13 * ulp_scale:
            stationary = True
            break
        # largest step keeping every node inside all of its disks
        t = 1.0
        hits = []
        for g in blocks:
            if kinds[g] == "interior":
                o, _ = pos[g]
                for dk in mdisks[g]:
                    te = _ray_exit(Y[g], step[o:o + d], dk)
                    if te < t:
                        t, hits = te, [(g, dk)]
                    elif te == t < 1.0:
                        hits.append((g, dk))
        noise = 4e-16 * ulp_scale * len(gedges)
        if hits:
            # active-set step: go to the first boundary hit and chart that node
            Yn = _apply(Y, step * t, blocks, pos, kinds, sph)
            fn = length(Yn)
            if fn <= f + noise and all(kinds[g] != "sphere" or _feasible(Yn[g], mdisks[g]) for g in blocks):
                for g, dk in hits:
                    Yn[g] = _project(dk.center + (Yn[g] - dk.center) * (1 + 1e-12), dk)
                    for i in groups[g]:
                        if disks[i] is dk:
                            active[i] = True
                Y, f = Yn, length(Yn)
                for g in blocks:
                    for i in groups[g]:
                        if not fixed[i]:
                            X[i] = Y[g]
                continue
        Yn = _apply(Y, step * t, blocks, pos, kinds, sph)
        bad = [g for g in blocks if kinds[g] == "sphere" and not _feasible(Yn[g], mdisks[g])]
        if bad:
            lo, hi = 0.0, t
            for _bis in range(60):
                mid = 0.5 * (lo + hi)
                Ym = _apply(Y, step * mid, blocks, pos, kinds, sph)
                if all(_feasible(Ym[g], mdisks[g], 0.0) for g in bad):
                    lo = mid
                else:
                    hi = mid
            t = lo
        capped = t < 1.0
        t0 = t
        improved = False
        for _ls in range(60):
            Yn = _apply(Y, step * t, blocks, pos, kinds, sph)
            fn = length(Yn)
            if fn <= f - 1e-4 * t * abs(float(step @ grad)) or (fn < f and t < 1e-3):
                improved = True
                break
            t *= 0.5
            capped = False
        if not improved:
            Yn = _apply(Y, step, blocks, pos, kinds, sph)
            fn = length(Yn)
            if newton_step and t0 == 1.0 and fn <= f + noise and chart_grad_norm(Yn, blocks, kinds, sph) < gnorm:
                # the change is below the rounding of the length; the gradient still certifies progress
                improved = True
            else:
                # no decrease the length can still resolve
                stationary = newton_step and 0.5 * abs(float(step @ grad)) <= 1e-14 * f
                break
        stall = stall + 1 if f - fn <= 1e-15 * f else 0
        Y, f = Yn, fn
        if stall >= 5:
            stationary = True  # length settled at rounding level
            break
        for g in blocks:
            for i in groups[g]:
                if not fixed[i]:
                    X[i] = Y[g]
            if capped or kinds[g] == "interior":
                activate(g, Y[g])
        if mu == 0.0 and np.any(np.linalg.norm(Y[ga] - Y[gb], axis=1) <= 1e-9 * scale):
            break  # an edge is collapsing; regroup

    Xn = X.copy()
    for g, members in enumerate(groups):
        for i in members:
            if not fixed[i]:
                Xn[i] = Y[g]
    return Xn, active, stationary


def _ray_exit(y, v, disk: Disk) -> float:
    """Largest ``t <= 1`` with ``y + t v`` inside the disk."""
    w = y - disk.center
    a = float(v @ v)
    if a == 0.0:
        return 1.0
    b = float(w @ v)
    c = float(w @ w) - disk.radius**2
    disc = b * b - a * c
    if disc < 0:
        return 1.0
    t = (-b + math.sqrt(disc)) / a
    return max(0.0, min(1.0, t))


def _apply(Y, step, blocks, pos, kinds, sph):
    Yn = Y.copy()
    for g in blocks:
        o, Jg = pos[g]
        s = step[o:o + Jg.shape[1]]
        if kinds[g] == "sphere":
            dk = sph[g]
            v = (Y[g] - dk.center) / dk.radius + (Jg @ s) / dk.radius
            Yn[g] = dk.center + dk.radius * v / np.linalg.norm(v)
        else:
            Yn[g] = Y[g] + s
    return Yn


def _kkt_repair(X, edges, fixed, disks, active, groups, scale, mu=0.0, keep=frozenset()) -> Optional[tuple[str, int]]:
    """Apply one first-order fix and return ``(kind, node)``, or None when none was needed.

    ``kind`` is "release", "chart" or "split".  Nodes in ``keep`` are never
    released.  With ``mu > 0`` only constraint releases are checked, against
    the smoothed length.
    """
    tol = 1e-9
    adj: list[list[tuple[int, int]]] = [[] for _ in range(len(X))]
    for k, (a, b) in enumerate(edges):
        adj[a].append((b, k))
        adj[b].append((a, k))

    def unit(i, j):
        v = X[i] - X[j]
        return v / math.sqrt(float(v @ v) + mu * mu)

    def on_boundary(i, rel=1e-9):
        dk = disks[i]
        return dk is not None and np.linalg.norm(X[i] - dk.center) >= dk.radius * (1 - rel)

    for members in groups:
        mset = set(members)
        if any(fixed[i] for i in members):
            continue
        g = np.zeros(X.shape[1])
        for i in members:
            for j, _ in adj[i]:
                if j not in mset:
                    g += unit(i, j)
        # multipliers of active disks: g = -sum lam_j n_j with lam_j >= 0 at optimum
        act = [i for i in members if disks[i] is not None and active[i]]
        if act:
            N = np.array([(X[i] - disks[i].center) / disks[i].radius for i in act])
            lam, *_ = np.linalg.lstsq(N.T, -g, rcond=None)
            lam[[k for k, i in enumerate(act) if i in keep]] = np.inf
            j = int(np.argmin(lam))
            if lam[j] < -tol:
                i = act[j]
                active[i] = False
                if len(act) == 1:
                    for m in members:
                        X[m] = X[m] - 1e-7 * disks[i].radius * N[j]
                return "release", i
    if mu > 0.0:
        return None
    # nodes resting on a boundary they are not charted on
    for i, dk in enumerate(disks):
        if dk is not None and not active[i] and not fixed[i] and on_boundary(i, 1e-8):
            active[i] = True
            X[i] = _project(dk.center + (X[i] - dk.center) * 2.0, dk)
            return "chart", i
    for members in groups:
        if len(members) == 1:
            continue
        mset = set(members)
        internal = [(a, b) for a, b in edges if a in mset and b in mset]
        for a, b in internal:
            for root, other in ((b, a), (a, b)):
                side = _side(root, other, mset, adj)
                if any(fixed[i] for i in side):
                    continue
                g = np.zeros(X.shape[1])
                for i in side:
                    for j, _ in adj[i]:
                        if j not in mset:
                            g += unit(i, j)
                normals = [(X[i] - disks[i].center) / disks[i].radius for i in side if on_boundary(i)]
                cands = []
                if np.linalg.norm(g) > 0:
                    cands.append(-g / np.linalg.norm(g))
                for nrm in normals:
                    gt = g - float(g @ nrm) * nrm
                    if np.linalg.norm(gt) > 0:
                        cands.append(-gt / np.linalg.norm(gt))
                for dirn in cands:
                    if any(float(dirn @ nrm) > 1e-12 for nrm in normals):
                        continue
                    if float(g @ dirn) < -1.0 - tol:
                        eps = 1e-4 * scale
                        for i in side:
                            X[i] = X[i] + eps * dirn
                            if disks[i] is not None:
                                X[i] = _project(X[i], disks[i])
                        # active flags follow the geometry after the move
                        for i in side:
                            if disks[i] is not None:
                                active[i] = on_boundary(i)
                        return "split", root
    return None


def _side(root: int, other: int, mset: set, adj) -> list[int]:
    """Group members reachable from ``root`` inside the group without crossing ``other``."""
    side, stack = {root}, [root]
    while stack:
        u = stack.pop()
        for w, _ in adj[u]:
            if w in mset and w != other and w not in side:
                side.add(w)
                stack.append(w)
    return sorted(side)


def _harmonic_init(T: Topology, anchors: np.ndarray) -> np.ndarray:
    """Steiner nodes at the graph-harmonic average of the terminal anchors."""
    n, m = T.n_terminals, T.n_nodes
    X = np.zeros((m, anchors.shape[1]))
    X[:n] = anchors
    if m == n:
        return X
    Lap = np.zeros((m, m))
    for a, b in T.edges:
        Lap[a, a] += 1
        Lap[b, b] += 1
        Lap[a, b] -= 1
        Lap[b, a] -= 1
    X[n:] = np.linalg.solve(Lap[n:, n:], -Lap[n:, :n] @ anchors)
    return X


def realize_convex(T: Topology, terminals, seed: Optional[int] = None) -> Realization:
    """Minimum-length realization of ``T`` with fixed or disk-constrained terminals.

    ``terminals`` holds points or ``Disk``/``(center, radius)`` pairs.  Steiner
    nodes start at the graph-harmonic average of the terminals; with a
    ``seed`` every free or disk-constrained node starts at a random position
    instead.  Edges that shrink to zero are reported in ``collapsed``.
    """
    items = [_parse_terminal(t) for t in terminals]
    if len(items) != T.n_terminals:
        raise ValueError("terminal count does not match the topology")
    disks_t = [it if isinstance(it, Disk) else None for it in items]
    anchors = np.array([it.center if isinstance(it, Disk) else it for it in items])
    dks = [dk for dk in disks_t if dk is not None]
    for a, b in itertools.combinations(dks, 2):
        if np.linalg.norm(a.center - b.center) <= a.radius + b.radius:
            raise ValueError("constraint disks must be pairwise disjoint")
    X = _harmonic_init(T, anchors)
    if seed is not None:
        rng = np.random.default_rng(seed)
        lo, hi = anchors.min(axis=0), anchors.max(axis=0)
        span = np.maximum(hi - lo, 1e-3 * max(_diameter(anchors), 1e-12))
        for i in range(T.n_nodes):
            if i >= T.n_terminals:
                X[i] = lo + rng.random(X.shape[1]) * span
            elif disks_t[i] is not None:
                v = rng.normal(size=X.shape[1])
                X[i] = disks_t[i].center + disks_t[i].radius * rng.random() * v / np.linalg.norm(v)
    fixed = [i < T.n_terminals and disks_t[i] is None for i in range(T.n_nodes)]
    disks = [disks_t[i] if i < T.n_terminals else None for i in range(T.n_nodes)]
    sol = _minimize_network(X, T.edges, fixed, disks)
    cons = tuple(disks_t) if dks else None
    return Realization.from_coords(T, sol.X, sol.converged, cons)


def _realize_one(args) -> Realization:
    T, terminals = args
    return realize_convex(T, terminals)


def realize_all(topologies: Sequence[Topology], terminals) -> list[Realization]:
    """``realize_convex`` over many topologies, in input order.

    Large batches fan out to ``worker_count()`` processes; the result order
    never depends on the worker count.
    """
    jobs = [(T, terminals) for T in topologies]
    workers = min(worker_count(), len(jobs) // 32)
    if workers <= 1:
        return [_realize_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_realize_one, jobs, chunksize=16))


def select_optima(cands: list[Realization], rel: float = TIE_REL) -> list[Realization]:
    """Minimum-length candidates within ``rel`` of the best, geometric duplicates removed."""
    if not cands:
        return []
    best = min(c.total_length for c in cands)
    tied = [c for c in cands if c.total_length <= best * (1 + rel) + 1e-300]
    tied.sort(key=lambda c: c.total_length)
    out: list[Realization] = []
    for c in tied:
        scale = max(_diameter(c.coords), 1e-300)
        if all(hausdorff_distance(c.network(), o.network()) > 1e-6 * scale for o in out):
            out.append(c)
    return out


def steiner_tree(points) -> list[Realization]:
    """All minimum Steiner trees for ``points`` (a list, since ties happen from n = 4).

    Every full topology is realized; collapsed Steiner nodes give the
    non-full trees.  Realizations within the relative tie tolerance that
    describe different point sets are all returned.
    """
    P = np.array([as_point(p) for p in points])
    n = len(P)
    if not 2 <= n <= MAX_TERMINALS:
        raise ValueError(f"n must be between 2 and {MAX_TERMINALS}")
    if len({tuple(p) for p in P.tolist()}) != n:
        raise ValueError("terminals must be distinct")
    return select_optima(realize_all(enumerate_full_topologies(n), P))


# ---------------------------------------------------------------------------
# Validation and interpolation
# ---------------------------------------------------------------------------


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(max(-1.0, min(1.0, c)))


def validate_locally_minimal(S, tol: float = 1e-6) -> list[str]:
    """Degree and angle conditions of a locally minimal tree; empty list means valid."""
    net = network_of(S)
    out = []
    adj = net.adjacency()
    for v, nbrs in enumerate(adj):
        deg = len(nbrs)
        if deg > 3:
            out.append(f"degree {deg} at node {v}")
            continue
        U = [net.nodes[w] - net.nodes[v] for w in nbrs]
        if deg == 3:
            for i, j in ((0, 1), (0, 2), (1, 2)):
                a = _angle(U[i], U[j])
                if abs(a - TWO_PI_3) > tol:
                    out.append(f"branching angle {a:.9g} != 2π/3 at node {v}")
        elif deg == 2:
            a = _angle(U[0], U[1])
            if a < TWO_PI_3 - tol:
                out.append(f"angle {a:.9g} < 2π/3 at node {v}")
    return out


def length_interpolation(S0: Realization, S1: Realization, alpha: float) -> float:
    """Length of the tree with node positions ``alpha X0 + (1 - alpha) X1``."""
    if S0.topology.n_terminals != S1.topology.n_terminals or set(S0.topology.edges) != set(S1.topology.edges):
        raise ValueError("topology mismatch")
    if S0.coords.shape != S1.coords.shape:
        raise ValueError("topology mismatch")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    X = alpha * S0.coords + (1.0 - alpha) * S1.coords
    return _tree_length(X, S0.topology.edges)
