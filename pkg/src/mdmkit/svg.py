"""SVG rendering of planar instances, networks, tubes and witnesses.

The drawing uses a y-up frame: model coordinates ``(x, y)`` are written as
``(x, -y)`` and the viewBox is fitted to the content with a 5% margin.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import as_points, network_of
from .tube import BoundaryPiece

MARGIN = 0.05


def _fmt(x: float) -> str:
    return repr(float(x))


class _Bounds:
    def __init__(self):
        self.lo = np.array([math.inf, math.inf])
        self.hi = -self.lo

    def add(self, P, pad: float = 0.0):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if len(P):
            self.lo = np.minimum(self.lo, P.min(axis=0) - pad)
            self.hi = np.maximum(self.hi, P.max(axis=0) + pad)

    def box(self):
        if not np.all(np.isfinite(self.lo)):
            return np.zeros(2), np.ones(2)
        span = np.maximum(self.hi - self.lo, 1e-12)
        m = MARGIN * float(span.max())
        return self.lo - m, span + 2 * m


def _arc_path(piece: BoundaryPiece) -> str:
    """Counterclockwise model arc split into pieces of at most half a turn."""
    cx, cy = piece.center
    r, a, b = piece.radius, piece.start, piece.end
    k = max(1, math.ceil((b - a) / math.pi - 1e-12))
    ts = np.linspace(a, b, k + 1)
    pts = [(cx + r * math.cos(t), -(cy + r * math.sin(t))) for t in ts]
    out = f"M {_fmt(pts[0][0])} {_fmt(pts[0][1])}"
    for x, y in pts[1:]:
        # counterclockwise in the model is a decreasing screen angle
        out += f" A {_fmt(r)} {_fmt(r)} 0 0 0 {_fmt(x)} {_fmt(y)}"
    return out


def render_svg(
    path: Optional[str] = None,
    *,
    points: Optional[Sequence] = None,
    disks: Iterable = (),
    networks: Iterable = (),
    tube: Iterable[BoundaryPiece] = (),
    witnesses: Iterable = (),
    title: str = "",
) -> str:
    """Draw the given entity classes and return the SVG text; write it to ``path`` if given.

    ``points`` are crosses, ``disks`` are ``(center, radius)`` pairs drawn as
    dashed circles, ``networks`` are solid polylines, ``tube`` is a list of
    boundary pieces drawn as a thin outline and ``witnesses`` are filled dots.
    """
    nets = [network_of(n) for n in networks]
    for n in nets:
        if n.nodes.shape[1] != 2:
            raise ValueError("SVG output needs planar geometry")
    P = as_points(points) if points is not None and len(points) else np.zeros((0, 2))
    dks = [(np.asarray(c, dtype=float), float(r)) for c, r in disks]
    pieces = list(tube)
    wl = list(witnesses)
    W = as_points(wl) if wl else np.zeros((0, 2))
    if P.shape[1] != 2 or W.shape[1] != 2:
        raise ValueError("SVG output needs planar geometry")

    bounds = _Bounds()
    bounds.add(P)
    for n in nets:
        bounds.add(n.nodes)
    for c, r in dks:
        bounds.add(c, r)
    for pc in pieces:
        if pc.kind == "segment":
            bounds.add([pc.start, pc.end])
        else:
            bounds.add(pc.center, pc.radius)
    bounds.add(W)
    lo, span = bounds.box()
    size = float(span.max())
    stroke = size / 400
    # y-up: the model box [lo, lo+span] maps to screen y in [-(lo+span), -lo]
    vb = f"{_fmt(lo[0])} {_fmt(-(lo[1] + span[1]))} {_fmt(span[0])} {_fmt(span[1])}"
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", viewBox=vb, width="800",
                     height=str(max(1, round(800 * span[1] / span[0]))))
    if title:
        ET.SubElement(svg, "title").text = title

    if dks:
        g = ET.SubElement(svg, "g", {"class": "disks", "fill": "none", "stroke": "#4a7ab5",
                                     "stroke-width": _fmt(stroke), "stroke-dasharray": f"{_fmt(3 * stroke)} {_fmt(2 * stroke)}"})
        for c, r in dks:
            ET.SubElement(g, "circle", cx=_fmt(c[0]), cy=_fmt(-c[1]), r=_fmt(r))
    if pieces:
        g = ET.SubElement(svg, "g", {"class": "tube", "fill": "none", "stroke": "#888888",
                                     "stroke-width": _fmt(0.5 * stroke)})
        for pc in pieces:
            if pc.kind == "segment":
                d = f"M {_fmt(pc.start[0])} {_fmt(-pc.start[1])} L {_fmt(pc.end[0])} {_fmt(-pc.end[1])}"
            else:
                d = _arc_path(pc)
            ET.SubElement(g, "path", d=d)
    if nets:
        g = ET.SubElement(svg, "g", {"class": "network", "fill": "none", "stroke": "#000000",
                                     "stroke-width": _fmt(2 * stroke), "stroke-linecap": "round"})
        for n in nets:
            for a, b in n.edges:
                p, q = n.nodes[a], n.nodes[b]
                ET.SubElement(g, "line", x1=_fmt(p[0]), y1=_fmt(-p[1]), x2=_fmt(q[0]), y2=_fmt(-q[1]))
            if not n.edges:
                p = n.nodes[0]
                ET.SubElement(g, "circle", cx=_fmt(p[0]), cy=_fmt(-p[1]), r=_fmt(2 * stroke), fill="#000000")
    if len(P):
        g = ET.SubElement(svg, "g", {"class": "points", "stroke": "#b53a3a", "stroke-width": _fmt(stroke)})
        a = 4 * stroke
        for x, y in P:
            d = (f"M {_fmt(x - a)} {_fmt(-y - a)} L {_fmt(x + a)} {_fmt(-y + a)} "
                 f"M {_fmt(x - a)} {_fmt(-y + a)} L {_fmt(x + a)} {_fmt(-y - a)}")
            ET.SubElement(g, "path", d=d)
    if len(W):
        g = ET.SubElement(svg, "g", {"class": "witnesses", "fill": "#d08a00"})
        for x, y in W:
            ET.SubElement(g, "circle", cx=_fmt(x), cy=_fmt(-y), r=_fmt(3 * stroke))

    text = ET.tostring(svg, encoding="unicode")
    text = '<?xml version="1.0" encoding="UTF-8"?>\n' + text + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text

