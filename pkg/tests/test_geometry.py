import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from mdmkit.geometry import (
    EmbeddedNetwork,
    PolyCurve,
    circle_arc,
    convex_hull_2d,
    dist_point_segment,
    dist_to_network,
    distances_to_network,
    hausdorff_distance,
    polygon_perimeter,
    polyline,
    regular_polygon,
    resample,
)

coord = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
point2 = st.tuples(coord, coord)


def brute_segment_distance(p, a, b, n=200_001):
    s = np.linspace(0.0, 1.0, n)
    pts = np.asarray(a) + s[:, None] * (np.asarray(b) - np.asarray(a))
    d = np.linalg.norm(pts - np.asarray(p), axis=1)
    return d.min(), s[d.argmin()]


def test_perpendicular_foot():
    assert dist_point_segment((0, 1), (-1, 0), (1, 0)) == (1.0, 0.5)


def test_clamped_endpoint():
    assert dist_point_segment((2, 0), (-1, 0), (1, 0)) == (1.0, 1.0)


def test_short_segment_against_sampling():
    d, t = dist_point_segment((3, 4), (0, 0), (0, 0.0001))
    bd, bt = brute_segment_distance((3, 4), (0, 0), (0, 0.0001))
    assert d == pytest.approx(math.hypot(3, 4 - 1e-4), abs=1e-12)  # nearest point is the far endpoint
    assert d == pytest.approx(bd, abs=1e-12)
    assert t == pytest.approx(bt, abs=1e-5)


def test_degenerate_segment():
    with pytest.raises(ValueError, match="degenerate segment"):
        dist_point_segment((1, 1), (0, 0), (0, 0))


def test_center_of_64gon_has_64_ties():
    V = regular_polygon(64)
    net = PolyCurve(np.vstack([V, V[:1]])).to_network()
    d, near = dist_to_network((0, 0), net)
    assert d == pytest.approx(math.cos(math.pi / 64), abs=1e-12)
    assert len(near) == 64


def test_right_angle_bisector_point():
    net = EmbeddedNetwork(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), [(0, 1), (0, 2)])
    d, near = dist_to_network((0.2, 0.2), net)
    assert d == pytest.approx(0.2, abs=1e-12)
    feet = sorted(tuple(np.round(net.nodes[net.edges[e][0]] + t * (net.nodes[net.edges[e][1]] - net.nodes[net.edges[e][0]]), 12)) for e, t in near)
    assert feet == [(0.0, 0.2), (0.2, 0.0)]
    # dense sampling of the two legs agrees
    s = np.linspace(0, 1, 100_001)
    legs = np.vstack([np.c_[s, 0 * s], np.c_[0 * s, s]])
    assert np.linalg.norm(legs - [0.2, 0.2], axis=1).min() == pytest.approx(d, abs=1e-9)


def test_point_on_network():
    net = polyline([[0, 0], [1, 0], [1, 1]]).to_network()
    d, near = dist_to_network((1.0, 0.5), net)
    assert d == 0.0 and len(near) == 1


def test_hull_square_with_center():
    hull = convex_hull_2d([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)])
    assert sorted(map(tuple, hull.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_hull_collinear_and_single():
    assert sorted(map(tuple, convex_hull_2d([(0, 0), (1, 1), (2, 2)]).tolist())) == [(0, 0), (2, 2)]
    assert convex_hull_2d([(3, 4)]).tolist() == [[3, 4]]


def test_hull_of_disk_points_matches_scipy():
    rng = np.random.default_rng(0)
    r = np.sqrt(rng.random(1000))
    th = rng.random(1000) * 2 * math.pi
    P = np.c_[r * np.cos(th), r * np.sin(th)]
    hull = convex_hull_2d(P)
    ref = ConvexHull(P)
    assert set(map(tuple, hull.tolist())) == set(map(tuple, P[ref.vertices].tolist()))
    assert polygon_perimeter(hull) <= 2 * math.pi
    assert polygon_perimeter(hull) == pytest.approx(ref.area, rel=1e-12)  # scipy's 2D "area" is the perimeter


def test_resample_segment():
    assert len(resample(polyline([[0, 0], [1, 0]]), 0.25).vertices) == 5


def test_resample_quarter_circle_length():
    arc = circle_arc(1.0, 0.0, math.pi / 2, 0.01)
    assert abs(resample(arc, 0.01).length - math.pi / 2) < 1e-4


def test_resample_coarse_h_is_identity():
    c = polyline([[0, 0], [2, 1]])
    assert np.array_equal(resample(c, 5.0).vertices, c.vertices)


def test_json_round_trips():
    c = polyline([[0, 0], [1, 0.5], [2, -1]])
    assert PolyCurve.from_json(c.to_json()).to_json() == c.to_json()
    n = EmbeddedNetwork(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 2]]), [(0, 1), (0, 2)])
    assert EmbeddedNetwork.from_json(n.to_json()).to_json() == n.to_json()


def test_hausdorff_of_shifted_segment():
    a = polyline([[0, 0], [1, 0]])
    b = polyline([[0, 0.1], [1, 0.1]])
    assert hausdorff_distance(a, b) == pytest.approx(0.1, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(point2, min_size=2, max_size=8, unique=True), point2, point2)
def test_distance_is_1_lipschitz(nodes, p, q):
    P = np.array(nodes, dtype=float)
    try:
        net = PolyCurve(P).to_network()
    except ValueError:
        return
    dp, dq = distances_to_network(np.array([p, q], dtype=float), net)
    assert abs(dp - dq) <= np.linalg.norm(np.subtract(p, q)) + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(point2, min_size=3, max_size=30), st.lists(point2, min_size=1, max_size=30))
def test_hull_perimeter_monotone(A, B):
    pa = polygon_perimeter(convex_hull_2d(A))
    pab = polygon_perimeter(convex_hull_2d(A + B))
    assert pa <= pab * (1 + 1e-12) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(point2, min_size=2, max_size=10, unique=True), st.floats(1e-3, 5.0))
def test_resample_preserves_length(nodes, h):
    try:
        c = PolyCurve(np.array(nodes, dtype=float))
    except ValueError:
        return
    r = resample(c, h)
    # every interpolated point carries coordinate rounding, so the summed length drifts with the point count
    ulp = np.spacing(float(np.abs(c.vertices).max()) + 1.0)
    assert r.length == pytest.approx(c.length, rel=1e-12, abs=4 * len(r.vertices) * ulp)
    assert np.all(np.diff(r.cumlen) <= h + 1e-12 * (1 + c.length))  # cumlen differences carry ulp(length) rounding
    assert np.array_equal(r.vertices[0], c.vertices[0]) and np.array_equal(r.vertices[-1], c.vertices[-1])
