"""Command-line front end.

Every subcommand reads a JSON input, writes a JSON result with a
reproducibility header, and can draw the planar geometry into an SVG file.
Exit codes: 0 success, 2 validation violations found, 1 errors (a JSON
error object goes to standard error).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Optional

import numpy as np

from . import __version__
from .geometry import EmbeddedNetwork, PolyCurve, convex_hull_2d, network_of, polygon_area
from .mdm import (
    Instance,
    build_corner_instance,
    chain_solve,
    lower_bound_perimeter,
    lower_bound_volume,
    solve_finite_M,
    validate_minimizer_structure,
)
from .steiner import Disk, _parse_terminal, steiner_tree, validate_locally_minimal
from .svg import render_svg
from .tube import avg_distance_functional, check_theorem_c11, tube_boundary_2d

SUBCOMMANDS = ("steiner", "solve", "bounds", "tube-check", "corner-example", "validate", "avg-distance")
DEFAULT_SEED = 42
DEFAULT_SAMPLES = 10**6


def _clean(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON text; floats use the shortest round-trip form."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _load(path: Optional[str]) -> Any:
    if path is None or path == "-":
        return json.load(sys.stdin)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _need(obj: Any, key: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ValueError(f"input needs '{key}'")
    return obj[key]


def _curve(obj: Any) -> PolyCurve:
    if isinstance(obj, dict) and "curve" in obj:
        obj = obj["curve"]
    return PolyCurve.from_json(obj)


def _set(obj: Any) -> EmbeddedNetwork:
    """A network from ``{"nodes", "edges"}`` or a curve from ``{"vertices"}``."""
    if isinstance(obj, dict) and "nodes" in obj:
        return EmbeddedNetwork.from_json(obj)
    return network_of(PolyCurve.from_json(obj))


def _instance(data: Any, r: Optional[float]) -> Instance:
    if isinstance(data, dict) and "instance" in data:
        data = data["instance"]
    if not isinstance(data, dict):
        raise ValueError("instance JSON must be an object")
    if r is not None:
        data = dict(data, r=r)
    return Instance.from_json(data)


# ---------------------------------------------------------------------------
# Subcommands: each returns (payload, drawing kwargs or None, violations)
# ---------------------------------------------------------------------------


def _cmd_steiner(data, args):
    items = data["terminals"] if isinstance(data, dict) and "terminals" in data else _need(data, "points")
    terms = [_parse_terminal(t) for t in items]
    if any(isinstance(t, Disk) for t in terms):
        raise ValueError("steiner takes fixed points; use 'solve' for disk constraints")
    tol = args.tol if args.tol is not None else 1e-6
    opts = steiner_tree(terms)
    payload = {
        "count": len(opts),
        "length": min(o.total_length for o in opts),
        "optima": [dict(o.to_json(), violations=validate_locally_minimal(o, tol)) for o in opts],
    }
    draw = {"points": np.array(terms), "networks": [o.network() for o in opts]}
    return payload, draw, []


def _cmd_solve(data, args):
    inst = _instance(data, args.r)
    opts = solve_finite_M(inst)
    payload = {
        "instance": inst.to_json(),
        "count": len(opts),
        "length": min(o.total_length for o in opts),
        "optima": [o.to_json() for o in opts],
    }
    draw = {"points": inst.points, "disks": [(p, inst.r) for p in inst.points], "networks": [o.network() for o in opts]}
    return payload, draw, []


def _cmd_bounds(data, args):
    inst = _instance(data, args.r)
    if inst.polygon is not None:
        if inst.dim != 2:
            raise ValueError("polygon instances are planar")
        M = inst.polygon
        payload = {
            "perimeter_bound": lower_bound_perimeter(M, inst.r),
            "volume_bound": lower_bound_volume(polygon_area(M), inst.r, 2),
        }
    else:
        M = inst.points
        payload = {"volume_bound": lower_bound_volume(0.0, inst.r, inst.dim)}
        if inst.dim == 2 and len(convex_hull_2d(M)) >= 3:
            payload["perimeter_bound"] = lower_bound_perimeter(convex_hull_2d(M), inst.r)
    payload = {"instance": inst.to_json(), **payload}
    draw = {"points": M} if inst.dim == 2 else None
    return payload, draw, []


def _cmd_tube_check(data, args):
    curve = _curve(data)
    R = args.r if args.r is not None else float(_need(data, "R"))
    rep = check_theorem_c11(curve, R, samples=args.samples, seed=args.seed, h=data.get("h") if isinstance(data, dict) else None)
    draw = None
    if curve.dim == 2 and args.svg:
        draw = {
            "networks": [curve.to_network()],
            "tube": tube_boundary_2d(curve.to_network(), R),
            "witnesses": [rep.witness.p] if rep.witness else [],
        }
    return {"curve": curve.to_json(), "report": rep.to_json()}, draw, []


def _cmd_corner(data, args):
    cfg = {"R": 1.0, "r": 0.01, "N": 100, "k": 10}
    if isinstance(data, dict):
        cfg.update({k: data[k] for k in cfg if k in data})
    if args.r is not None:
        cfg["r"] = args.r
    ci = build_corner_instance(float(cfg["R"]), float(cfg["r"]), int(cfg["N"]), int(cfg["k"]))
    chain = chain_solve(ci.v_points, ci.r, seed=args.seed)
    rep = validate_minimizer_structure(chain.network(), ci.instance(), tol=args.tol if args.tol is not None else 1e-6)
    payload = {
        "corner": ci.to_json(),
        "chain": chain.to_json(),
        "max_vertex_error": float(np.abs(chain.coords - ci.a_points).max()),
        "structure": rep.to_json(),
    }
    draw = {"points": ci.v_points, "disks": [(v, ci.r) for v in ci.v_points], "networks": [chain.network()]}
    return payload, draw, rep.violations


def _cmd_validate(data, args):
    net = EmbeddedNetwork.from_json(_need(data, "network"))
    tol = args.tol if args.tol is not None else 1e-6
    draw = {"networks": [net]} if net.nodes.shape[1] == 2 else None
    if not net.is_connected:
        return {"violations": ["network is disconnected"]}, draw, ["network is disconnected"]
    if "instance" in data:
        inst = _instance(data["instance"], args.r)
        rep = validate_minimizer_structure(net, inst, tol=tol)
        if draw is not None:
            draw.update(points=inst.points, disks=[(p, inst.r) for p in inst.points])
        return {"instance": inst.to_json(), "structure": rep.to_json()}, draw, rep.violations
    viol = [] if len(net.edges) < len(net.nodes) else ["cycle"]
    viol += validate_locally_minimal(net, tol)
    return {"violations": viol}, draw, viol


def _cmd_avg_distance(data, args):
    beta = _set(_need(data, "beta"))
    domain = _set(_need(data, "domain"))
    R = args.r if args.r is not None else float(_need(data, "R"))
    phi = data.get("phi", "identity")
    est, ci = avg_distance_functional(beta, domain, R, phi=phi, samples=args.samples, seed=args.seed)
    draw = {"networks": [domain, beta]} if beta.nodes.shape[1] == 2 else None
    return {"R": R, "phi": phi, "value": est, "ci_halfwidth": ci}, draw, []


COMMANDS = {
    "steiner": _cmd_steiner,
    "solve": _cmd_solve,
    "bounds": _cmd_bounds,
    "tube-check": _cmd_tube_check,
    "corner-example": _cmd_corner,
    "validate": _cmd_validate,
    "avg-distance": _cmd_avg_distance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdmkit", description="Maximal distance minimizers, Steiner trees and tubes.")
    parser.add_argument("--version", action="version", version=f"mdmkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", help="input JSON file ('-' for stdin)")
        p.add_argument("--output", help="output JSON file (default stdout)")
        p.add_argument("--svg", help="also draw the result into this SVG file")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
        p.add_argument("--r", type=float, default=None, help="override the radius r (R for tube-check)")
        p.add_argument("--tol", type=float, default=None, help="angle tolerance override")
    return parser


def run(args: argparse.Namespace) -> int:
    """Execute one subcommand; returns the exit code."""
    try:
        if args.samples <= 0:
            raise ValueError("--samples must be positive")
        if args.input is None and args.subcommand != "corner-example":
            raise ValueError("--input is required")
        data = _load(args.input) if args.input is not None else {}
        payload, draw, violations = COMMANDS[args.subcommand](data, args)
        header = {
            "tool_version": __version__,
            "seed": args.seed,
            "samples": args.samples,
            "config_echo": {
                "subcommand": args.subcommand,
                "input": args.input,
                "r": args.r,
                "tol": args.tol,
            },
        }
        text = dumps({"header": header, "result": payload})
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if args.svg:
            if draw is None:
                raise ValueError("SVG output needs planar geometry")
            render_svg(args.svg, title=args.subcommand, **draw)
        return 2 if violations else 0
    except (ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1


def main(argv: Optional[list] = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
