"""Dimension-generic primitives: points, polylines, embedded networks and
exact point-to-network distances.

Points are plain ``numpy`` vectors of length 2 or 3.  ``PolyCurve`` and
``EmbeddedNetwork`` are immutable containers; every function here is pure.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

TIE_TOL = 1e-9


def as_point(p) -> np.ndarray:
    """Validate and convert a coordinate sequence to a float vector."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.shape[0] not in (2, 3):
        raise ValueError(f"point must have 2 or 3 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def as_points(pts) -> np.ndarray:
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError(f"expected an (n, 2) or (n, 3) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def worker_count() -> int:
    """Worker cap from ``MDMKIT_WORKERS`` (default: all cores)."""
    env = os.environ.get("MDMKIT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Curves and networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolyCurve:
    """Polyline with an arc-length parametrization.

    A closed curve is encoded by repeating the first vertex at the end.
    """

    vertices: np.ndarray
    cumlen: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = as_points(self.vertices).copy()
        if len(v) < 2:
            raise ValueError("a PolyCurve needs at least 2 vertices")
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seg <= 0.0):
            raise ValueError("consecutive vertices must be distinct")
        v.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        cum.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cumlen", cum)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def length(self) -> float:
        return float(self.cumlen[-1])

    @property
    def closed(self) -> bool:
        return len(self.vertices) > 3 and bool(np.all(self.vertices[0] == self.vertices[-1]))

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.diff(self.cumlen)

    def point_at(self, t: float) -> np.ndarray:
        """Point at arc length ``t`` (clamped to ``[0, length]``)."""
        t = min(max(float(t), 0.0), self.length)
        i = int(np.searchsorted(self.cumlen, t, side="right") - 1)
        i = min(i, len(self.vertices) - 2)
        a, b = self.vertices[i], self.vertices[i + 1]
        s = (t - self.cumlen[i]) / (self.cumlen[i + 1] - self.cumlen[i])
        return a + s * (b - a)

    def subcurve(self, t0: float, t1: float) -> "PolyCurve":
        """The piece of the curve between arc lengths ``t0 < t1``."""
        t0 = max(0.0, float(t0))
        t1 = min(self.length, float(t1))
        if not t1 > t0:
            raise ValueError("subcurve needs t0 < t1")
        inner = (self.cumlen > t0) & (self.cumlen < t1)
        pts = [self.point_at(t0), *self.vertices[inner], self.point_at(t1)]
        keep = [pts[0]]
        for p in pts[1:]:
            if np.linalg.norm(p - keep[-1]) > 0.0:
                keep.append(p)
        if len(keep) < 2:
            raise ValueError("subcurve is degenerate")
        return PolyCurve(np.array(keep))

    def to_network(self) -> "EmbeddedNetwork":
        n = len(self.vertices)
        if self.closed:
            nodes = self.vertices[:-1]
            edges = [(i, (i + 1) % (n - 1)) for i in range(n - 1)]
        else:
            nodes = self.vertices
            edges = [(i, i + 1) for i in range(n - 1)]
        return EmbeddedNetwork(nodes, edges)

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "PolyCurve":
        if not isinstance(obj, dict) or "vertices" not in obj:
            raise ValueError("curve JSON must be an object with a 'vertices' list")
        return cls(np.asarray(obj["vertices"], dtype=float))


@dataclass(frozen=True, eq=False)
class EmbeddedNetwork:
    """Straight-line embedding of a graph.

    A network without edges must consist of exactly one node (a point).
    """

    nodes: np.ndarray
    edges: tuple

    def __post_init__(self):
        nodes = as_points(self.nodes).copy()
        nodes.setflags(write=False)
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        n = len(nodes)
        if n == 0:
            raise ValueError("network has no nodes")
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"invalid edge ({i}, {j})")
            if np.linalg.norm(nodes[i] - nodes[j]) <= 0.0:
                raise ValueError(f"zero-length edge ({i}, {j})")
        if not edges and n != 1:
            raise ValueError("a network without edges must be a single point")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def length(self) -> float:
        if not self.edges:
            return 0.0
        a, b = self.segments()
        return float(np.linalg.norm(b - a, axis=1).sum())

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            p = self.nodes[:1]
            return p.copy(), p.copy()
        idx = np.asarray(self.edges)
        return self.nodes[idx[:, 0]], self.nodes[idx[:, 1]]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.nodes), dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.nodes]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    @property
    def is_connected(self) -> bool:
        adj = self.adjacency()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.nodes)

    @property
    def is_tree(self) -> bool:
        return self.is_connected and len(self.edges) == len(self.nodes) - 1

    def to_json(self) -> dict:
        return {"nodes": self.nodes.tolist(), "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "EmbeddedNetwork":
        if not isinstance(obj, dict) or "nodes" not in obj or "edges" not in obj:
            raise ValueError("network JSON must have 'nodes' and 'edges'")
        return cls(np.asarray(obj["nodes"], dtype=float), [tuple(e) for e in obj["edges"]])

    @classmethod
    def point(cls, p) -> "EmbeddedNetwork":
        return cls(np.asarray([as_point(p)]), ())

    @classmethod
    def from_segments(cls, segments, tol: float = 1e-12) -> "EmbeddedNetwork":
        """Build a network from ``[(a, b), ...]`` merging coincident endpoints."""
        nodes: list[np.ndarray] = []
        edges = []

        def key(p):
            for k, q in enumerate(nodes):
                if np.linalg.norm(q - p) <= tol:
                    return k
            nodes.append(p)
            return len(nodes) - 1

        for a, b in segments:
            i, j = key(as_point(a)), key(as_point(b))
            if i != j:
                edges.append((i, j))
        return cls(np.array(nodes), edges)


def network_of(obj) -> EmbeddedNetwork:
    """Coerce a curve, network or anything with ``network()`` to a network."""
    if isinstance(obj, EmbeddedNetwork):
        return obj
    if isinstance(obj, PolyCurve):
        return obj.to_network()
    if hasattr(obj, "network"):
        return obj.network()
    raise TypeError(f"cannot interpret {type(obj).__name__} as a network")


def curve_from_json(obj) -> PolyCurve:
    return PolyCurve.from_json(obj)


def network_from_json(obj) -> EmbeddedNetwork:
    return EmbeddedNetwork.from_json(obj)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def dist_point_segment(p, a, b) -> tuple[float, float]:
    """Distance from ``p`` to segment ``[a, b]`` and the foot parameter in [0, 1]."""
    p, a, b = as_point(p), as_point(a), as_point(b)
    ab = b - a
    den = float(ab @ ab)
    if den == 0.0:
        raise ValueError("degenerate segment")
    t = min(1.0, max(0.0, float((p - a) @ ab) / den))
    return float(np.linalg.norm(p - (a + t * ab))), t


def _seg_dist(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Broadcast distances ``P[..., d]`` vs segments ``A, B[..., d]``."""
    ab = B - A
    den = np.einsum("...i,...i->...", ab, ab)
    safe = np.where(den > 0.0, den, 1.0)
    t = np.einsum("...i,...i->...", P - A, ab) / safe
    t = np.where(den > 0.0, np.clip(t, 0.0, 1.0), 0.0)
    foot = A + t[..., None] * ab
    return np.linalg.norm(P - foot, axis=-1), t


def segment_distances(P: np.ndarray, A: np.ndarray, B: np.ndarray, chunk: int = 2_000_000):
    """Dense ``(n, m)`` distance and foot-parameter matrices."""
    P = np.atleast_2d(P)
    rows = max(1, chunk // max(1, len(A)))
    D = np.empty((len(P), len(A)))
    T = np.empty((len(P), len(A)))
    for s in range(0, len(P), rows):
        d, t = _seg_dist(P[s:s + rows, None, :], A[None], B[None])
        D[s:s + rows] = d
        T[s:s + rows] = t
    return D, T


class NetworkIndex:
    """Exact nearest-distance queries from many points to one network.

    Edges are cut into short pieces whose midpoints go in a k-d tree.  The
    ``k`` nearest pieces give a candidate minimum; it is exact whenever the
    k-th midpoint is farther than candidate + half the longest piece.
    Points failing that certificate fall back to a brute-force scan.
    """

    def __init__(self, network: EmbeddedNetwork, max_pieces: int = 4000, k: int = 8):
        self.network = network
        A, B = network.segments()
        self.A, self.B = A, B
        lens = np.linalg.norm(B - A, axis=1)
        total = float(lens.sum())
        self.brute = len(A) <= 32 or total == 0.0
        if self.brute:
            return
        hcap = max(total / max_pieces, 1e-300)
        counts = np.maximum(1, np.ceil(lens / hcap).astype(int))
        parent = np.repeat(np.arange(len(A)), counts)
        offs = np.concatenate([np.arange(c) for c in counts])
        frac0 = offs / counts[parent]
        frac1 = (offs + 1) / counts[parent]
        d = B - A
        self.pa = A[parent] + frac0[:, None] * d[parent]
        self.pb = A[parent] + frac1[:, None] * d[parent]
        self.parent = parent
        self.half = 0.5 * float(np.max(lens / counts))
        self.k = min(k, len(parent))
        # sliding-midpoint splits handle points strung along curves far better
        self.tree = cKDTree(0.5 * (self.pa + self.pb), leafsize=32, compact_nodes=False, balanced_tree=False)

    def distances(self, P: np.ndarray, batch: int = 200_000) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if self.brute:
            D, _ = segment_distances(P, self.A, self.B)
            return D.min(axis=1)
        out = np.empty(len(P))
        for s in range(0, len(P), batch):
            out[s:s + batch] = self._batch(P[s:s + batch])
        return out

    def _batch(self, P: np.ndarray) -> np.ndarray:
        mid_d, idx = self._query(P)
        d, _ = _seg_dist(P[:, None, :], self.pa[idx], self.pb[idx])
        best = d.min(axis=1)
        bad = np.flatnonzero(mid_d[:, -1] - self.half < best)
        if len(bad):
            best[bad] = self._ball_min(P[bad], best[bad] + self.half)
        return best

    def _query(self, P: np.ndarray):
        mid_d, idx = self.tree.query(P, k=self.k, workers=worker_count())
        return mid_d.reshape(len(P), self.k), idx.reshape(len(P), self.k)

    def _ball_min(self, P: np.ndarray, radius: np.ndarray) -> np.ndarray:
        """Exact minimum over every piece whose midpoint lies within ``radius``."""
        out = np.empty(len(P))
        for s in range(0, len(P), 20_000):
            Q = P[s:s + 20_000]
            lists = self.tree.query_ball_point(Q, radius[s:s + 20_000], workers=worker_count())
            lens = np.fromiter(map(len, lists), dtype=np.intp, count=len(Q))
            idx = np.fromiter(itertools.chain.from_iterable(lists), dtype=np.intp, count=int(lens.sum()))
            owner = np.repeat(np.arange(len(Q)), lens)
            d, _ = _seg_dist(Q[owner], self.pa[idx], self.pb[idx])
            best = np.full(len(Q), np.inf)
            np.minimum.at(best, owner, d)
            out[s:s + 20_000] = best
        return out

    def within(self, P: np.ndarray, R: float, batch: int = 200_000) -> np.ndarray:
        """Boolean mask ``dist(P, network) < R``, exact but cheaper than ``distances``."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if self.brute:
            return self.distances(P) < R
        out = np.empty(len(P), dtype=bool)
        for s in range(0, len(P), batch):
            Q = P[s:s + batch]
            mid_d, idx = self.tree.query(Q, k=1, distance_upper_bound=R + self.half, workers=worker_count())
            res = np.zeros(len(Q), dtype=bool)
            hit = np.flatnonzero(np.isfinite(mid_d))
            d, _ = _seg_dist(Q[hit], self.pa[idx[hit]], self.pb[idx[hit]])
            res[hit] = d < R
            # undecided: the nearest piece is not close enough, yet another one might be
            open_ = hit[d >= R]
            if len(open_):
                res[open_] = self._ball_min(Q[open_], np.full(len(open_), R + self.half)) < R
            out[s:s + batch] = res
        return out


def distances_to_network(P, S) -> np.ndarray:
    """Exact distance from each row of ``P`` to the network ``S``."""
    return NetworkIndex(network_of(S)).distances(as_points(P))


def dist_to_network(p, S, tie_tol: float = TIE_TOL) -> tuple[float, list[tuple[int, float]]]:
    """Distance from ``p`` to ``S`` with every nearest point as ``(edge, param)``.

    Edge-local minimizers within ``tie_tol`` of the minimum are all listed;
    coincident feet (a shared vertex reached from several edges) are listed once.
    For a single-point network the entry is ``(-1, 0.0)``.
    """
    p = as_point(p)
    S = network_of(S)
    if not S.edges:
        return float(np.linalg.norm(p - S.nodes[0])), [(-1, 0.0)]
    A, B = S.segments()
    d, t = _seg_dist(p[None, :], A, B)
    dmin = float(d.min())
    feet: list[np.ndarray] = []
    out = []
    for e in np.flatnonzero(d <= dmin + tie_tol):
        f = A[e] + t[e] * (B[e] - A[e])
        if any(np.linalg.norm(f - g) <= tie_tol for g in feet):
            continue
        feet.append(f)
        out.append((int(e), float(t[e])))
    return dmin, out


def hausdorff_distance(S1, S2, h: float | None = None) -> float:
    """Hausdorff distance between two networks, sampling edges at spacing ``h``."""
    S1, S2 = network_of(S1), network_of(S2)
    if h is None:
        h = max(S1.length, S2.length, 1e-12) / 2000
    p1 = network_samples(S1, h)
    p2 = network_samples(S2, h)
    return float(max(distances_to_network(p1, S2).max(), distances_to_network(p2, S1).max()))


def network_samples(S: EmbeddedNetwork, h: float) -> np.ndarray:
    """Points along every edge at spacing at most ``h`` (nodes included)."""
    if not S.edges:
        return S.nodes.copy()
    pts = [S.nodes]
    A, B = S.segments()
    for a, b in zip(A, B):
        n = int(math.ceil(np.linalg.norm(b - a) / h))
        if n > 1:
            s = np.arange(1, n) / n
            pts.append(a + s[:, None] * (b - a))
    return np.vstack(pts)


# ---------------------------------------------------------------------------
# Planar helpers
# ---------------------------------------------------------------------------


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points) -> np.ndarray:
    """Counterclockwise convex hull (monotone chain), collinear points dropped."""
    P = as_points(points)
    if P.shape[1] != 2:
        raise ValueError("convex_hull_2d needs planar points")
    pts = sorted(set(map(tuple, P.tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=float)

    def half(seq):
        chain: list = []
        for p in seq:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=float)


def polygon_perimeter(poly) -> float:
    P = as_points(poly)
    if len(P) < 2:
        return 0.0
    if len(P) == 2:
        return 2.0 * float(np.linalg.norm(P[1] - P[0]))
    return float(np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1).sum())


def polygon_area(poly) -> float:
    P = as_points(poly)
    if len(P) < 3:
        return 0.0
    x, y = P[:, 0], P[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


# ---------------------------------------------------------------------------
# Curve construction and resampling
# ---------------------------------------------------------------------------


def resample(curve: PolyCurve, h: float) -> PolyCurve:
    """Subdivide every segment evenly so that spacing is at most ``h``.

    Original vertices are kept, so the length is unchanged.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    V = curve.vertices
    out = [V[:1]]
    for a, b in zip(V[:-1], V[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / h - 1e-12)))
        s = np.arange(1, n) / n
        out.append(a + s[:, None] * (b - a))
        out.append(b[None, :])  # keep original vertices bit-exact
    return PolyCurve(np.vstack(out))


def circle_arc(radius: float, start: float, stop: float, h: float, center=(0.0, 0.0)) -> PolyCurve:
    """Inscribed polyline of a circular arc with chord length at most ``h``."""
    sweep = abs(stop - start) * radius
    n = max(1, int(math.ceil(sweep / h)))
    th = np.linspace(start, stop, n + 1)
    pts = np.column_stack([np.cos(th), np.sin(th)]) * radius + np.asarray(center, dtype=float)
    if abs(abs(stop - start) - 2 * math.pi) < 1e-15:
        pts[-1] = pts[0]
    return PolyCurve(pts)


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> np.ndarray:
    th = phase + 2 * math.pi * np.arange(n) / n
    return np.column_stack([np.cos(th), np.sin(th)]) * radius + np.asarray(center, dtype=float)


def polyline(points: Iterable[Sequence[float]]) -> PolyCurve:
    return PolyCurve(np.asarray(list(points), dtype=float))
