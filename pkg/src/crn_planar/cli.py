"""Command line interface: ``crn-planar analyze|simulate|portrait|scan|cycles``."""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import numbers
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dynamics, svg
from .equilibrium import NoEquilibriumError, scale_to_unit, solve_equilibrium
from .families import FAMILIES, FamilyError, family_instance, get_family
from .global_analysis import (dulac_geometric, dulac_search, lienard_center_check,
                              reversibility_check, reversible_center_conditions)
from .local_analysis import PreconditionError, classify, jacobian
from .network import (NetworkError, NetworkParseError, ReactionNetwork, VectorField,
                      deficiency, parse_network, reversibility_class, vector_field)

EXIT_OK, EXIT_PARSE, EXIT_NO_EQ, EXIT_INTEGRATION = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# output helpers

def _round(v):
    if isinstance(v, (bool, type(None), str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, numbers.Real):
        v = float(v)
        if not math.isfinite(v):
            return None
        return float(f"{v:.15g}")
    if isinstance(v, dict):
        return {str(k): _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    return str(v)


def dump_json(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=False) + "\n"


def _num(v: float) -> str:
    return "nan" if not math.isfinite(v) else f"{v:.15g}"


# --------------------------------------------------------------------------
# network sources

_FAMILY_LINE = re.compile(r"^\s*#\s*family:\s*(\S+)(.*)$")


@dataclass
class Source:
    network: ReactionNetwork
    family: str | None
    params: dict
    scaled: VectorField | None = None


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise CliError(f"parameter {item!r} is not name=value", EXIT_PARSE)
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v) if "/" not in v else float(_fraction(v))
        except ValueError:
            raise CliError(f"bad value in {item!r}", EXIT_PARSE) from None
    return out


def _fraction(text):
    from fractions import Fraction
    return Fraction(text.strip())


def family_directive(text: str):
    """``# family: name k=v ...`` header of a network file, if any."""
    for line in text.splitlines():
        m = _FAMILY_LINE.match(line)
        if m:
            return m.group(1), _parse_params(m.group(2).split())
    return None


def load_source(args) -> Source:
    fam = getattr(args, "family", None)
    params = _parse_params(getattr(args, "param", None))
    text = None
    if fam is None:
        if not args.file:
            raise CliError("give a network file or --family", EXIT_PARSE)
        try:
            with open(args.file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise CliError(f"cannot read {args.file}: {exc.strerror}", EXIT_PARSE) from None
        directive = family_directive(text)
        if directive is not None:
            fam, file_params = directive
            params = {**file_params, **params}
    if getattr(args, "at_critical", False):
        if fam is None:
            raise CliError("--at-critical needs a family (use --family or a '# family:' header)",
                           EXIT_PARSE)
        crit = get_family(fam).critical
        if crit is None:
            raise CliError(f"family {fam} has no critical point", EXIT_PARSE)
        params = crit()
    try:
        if fam is not None and (text is None or getattr(args, "at_critical", False) or params):
            inst = family_instance(fam, **params)
            net = inst.network()
            scaled = None if inst.natural else inst.scaled_field()
            src = Source(net, fam, inst.params, scaled)
        else:
            src = Source(parse_network(text), fam, params)
    except NetworkParseError as exc:
        raise CliError(f"{args.file}: {exc}", EXIT_PARSE) from None
    except (NetworkError, FamilyError) as exc:
        raise CliError(str(exc), EXIT_PARSE) from None
    kappa = getattr(args, "kappa", None)
    if kappa:
        try:
            ks = [float(_fraction(k)) for k in kappa.split(",") if k.strip()]
            if (len(ks) == 1 and len(src.network.reactions) > 1 and src.family
                    and "kappa" in get_family(src.family).params):
                # single value on a one-parameter family: set the family parameter
                inst = family_instance(src.family, **{**src.params, "kappa": ks[0]})
                src.network, src.params = inst.network(), inst.params
                src.scaled = None
                return src
            src.network = src.network.with_kappas(ks)
        except (ValueError, ZeroDivisionError, NetworkError) as exc:
            raise CliError(f"bad --kappa: {exc}", EXIT_PARSE) from None
        src.scaled = None
    return src


def _equilibrium(net):
    try:
        return solve_equilibrium(net)
    except NoEquilibriumError as exc:
        raise CliError(f"no positive equilibrium: {exc}", EXIT_NO_EQ) from None


# --------------------------------------------------------------------------
# analyze

def _local_block(vf: VectorField, at, depth: int) -> dict:
    jac = jacobian(vf, at)
    block = {"trace": jac.trace, "det": jac.det, "jacobian": jac.entries.tolist()}
    try:
        rep = classify(vf, at, depth)
        block["classification"] = rep.kind
        block["stable"] = rep.stable
        block["focal_order"] = rep.order
        block["focal_values"] = rep.focal
    except PreconditionError as exc:
        block["classification"] = "saddle-or-degenerate"
        block["error"] = str(exc)
    return block


def _global_block(net: ReactionNetwork, scaled) -> dict:
    out = {"dulac": None, "dulac_geometric": None, "reversible": None,
           "reversible_center": None, "lienard": None}
    try:
        out["dulac"] = dulac_search(net).as_dict()
        out["dulac_geometric"] = dulac_geometric(net)
    except NetworkError:
        pass
    if scaled is not None:
        out["reversible"] = reversibility_check(scaled)
        try:
            out["reversible_center"] = reversible_center_conditions(scaled)
        except (NetworkError, ValueError):
            pass
        try:
            out["lienard"] = lienard_center_check(scaled).as_dict()
        except (NetworkError, ValueError):
            pass
    return out


def analyze_report(src: Source, depth: int = 4) -> dict:
    net = src.network
    rc = reversibility_class(net)
    report = {
        "family": src.family,
        "params": src.params if src.family else None,
        "structural": {"m": len(net.complexes), "l": rc.linkage_classes, "t": rc.terminal_classes,
                       "deficiency": deficiency(net), "weakly_reversible": rc.weakly_reversible,
                       "reactions": len(net.reactions)},
    }
    eq = _equilibrium(net)
    report["equilibrium"] = {"exists": True, "x": eq.x, "y": eq.y, "residual": eq.residual,
                             "method": eq.method}
    vf = vector_field(net)
    report["local"] = _local_block(vf, eq.point, depth)
    sc = scale_to_unit(net, eq)
    scaled_vf = src.scaled if src.scaled is not None else sc.field
    block = {"K": sc.K, "kbar": list(sc.kbar), "lambda": sc.lam}
    block.update(_local_block(scaled_vf, (1.0, 1.0), depth))
    report["scaled"] = block
    report["global"] = _global_block(net, sc)
    return report


def cmd_analyze(args) -> int:
    src = load_source(args)
    sys.stdout.write(dump_json(analyze_report(src, args.focal_depth)))
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate

def _field_and_eq(src: Source, scaled: bool):
    if scaled:
        if src.scaled is not None:
            return src.scaled, (1.0, 1.0)
        eq = _equilibrium(src.network)
        return scale_to_unit(src.network, eq).field, (1.0, 1.0)
    return vector_field(src.network), None


def cmd_simulate(args) -> int:
    src = load_source(args)
    vf, _ = _field_and_eq(src, args.scaled)
    if not (args.x0 > 0 and args.y0 > 0):
        raise CliError("start point must lie in the open positive quadrant", EXIT_INTEGRATION)
    traj = dynamics.integrate(vf, (args.x0, args.y0), args.t, args.rtol, args.atol)
    text = traj.to_csv()
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if traj.underflow:
        print(f"integration failed: step size underflow at t={traj.times[-1]:.6g}", file=sys.stderr)
        return EXIT_INTEGRATION
    return EXIT_OK


# --------------------------------------------------------------------------
# portrait

def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise CliError(f"range {text!r} is not lo:hi", EXIT_PARSE) from None
    if not (0 < lo < hi):
        raise CliError(f"range {text!r} must satisfy 0 < lo < hi", EXIT_PARSE)
    return lo, hi


def cmd_portrait(args) -> int:
    src = load_source(args)
    vf, eq = _field_and_eq(src, args.scaled)
    if eq is None:
        try:
            eq = solve_equilibrium(src.network).point
        except NoEquilibriumError:
            eq = None
    xr, yr = _range(args.xrange), _range(args.yrange)
    n = args.grid
    if args.log:
        xs, ys = np.geomspace(*xr, n + 2)[1:-1], np.geomspace(*yr, n + 2)[1:-1]
    else:
        xs, ys = np.linspace(*xr, n + 2)[1:-1], np.linspace(*yr, n + 2)[1:-1]
    paths, failed = [], 0
    for x0, y0 in itertools.product(xs, ys):
        traj = dynamics.integrate(vf, (float(x0), float(y0)), args.t, 1e-8, 1e-10,
                                  escape=1e3 * max(xr[1], yr[1]))
        failed += traj.underflow
        paths.append(traj.points.tolist())
    section = None
    if args.section and eq is not None:
        section = (eq, (1.0, 0.0), xr[1] - eq[0])
    text = svg.render(paths, xr, yr, log=args.log, equilibrium=eq, section=section,
                      title=args.title or "")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    if failed:
        print(f"{failed} integration(s) failed; partial portrait written", file=sys.stderr)
        return EXIT_INTEGRATION
    return EXIT_OK


# --------------------------------------------------------------------------
# scan

TRACKABLE = ("trace", "det", "L1", "L2", "L3", "L4", "kind")


def _scan_axis(text: str):
    m = re.match(r"^([A-Za-z_]\w*)=([^:]+):([^:]+):(\d+)$", text.strip())
    if not m:
        raise CliError(f"scan parameter {text!r} is not name=lo:hi:n", EXIT_PARSE)
    name, lo, hi, n = m.groups()
    n = int(n)
    if n < 1:
        raise CliError("scan needs n >= 1", EXIT_PARSE)
    lo, hi = float(lo), float(hi)
    return name, [lo] if n == 1 else [float(v) for v in np.linspace(lo, hi, n)]


def scan_cell(task):
    family, params, track, depth = task
    row = {}
    try:
        inst = family_instance(family, **params)
    except (FamilyError, NetworkError) as exc:
        return {k: math.nan for k in track} | {"error": str(exc)}
    vf = inst.scaled_field() if not inst.natural else vector_field(inst.network())
    if inst.natural:
        try:
            at = solve_equilibrium(inst.network()).point
        except NoEquilibriumError:
            return {k: math.nan for k in track} | {"error": "no equilibrium"}
    else:
        at = (1.0, 1.0)
    jac = jacobian(vf, at)
    L = [math.nan] * depth
    kind = ""
    try:
        rep = classify(vf, at, depth)
        kind = rep.kind
        if rep.kind in ("weak-focus", "center-candidate"):
            from .local_analysis import field_focal_values
            L = list(field_focal_values(vf, at, depth, raw=True).L)
    except PreconditionError:
        kind = "det<=0"
    values = {"trace": jac.trace, "det": jac.det, "kind": kind}
    for i in range(depth):
        values[f"L{i + 1}"] = L[i]
    for k in track:
        row[k] = values.get(k, math.nan)
    return row


def _workers() -> int:
    cap = os.environ.get("CRN_PLANAR_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            raise CliError("CRN_PLANAR_THREADS must be an integer", EXIT_PARSE) from None
    return n


def run_scan(family: str, axes, fixed: dict, track, workers: int = 1):
    fam = get_family(family)
    for name, _ in axes:
        if name not in fam.params:
            raise CliError(f"unknown parameter {name!r} for family {family}; "
                           f"choose from {', '.join(fam.params)}", EXIT_PARSE)
    for name in fixed:
        if name not in fam.params:
            raise CliError(f"unknown parameter {name!r} for family {family}", EXIT_PARSE)
    for k in track:
        if k not in TRACKABLE:
            raise CliError(f"cannot track {k!r}; choose from {', '.join(TRACKABLE)}", EXIT_PARSE)
    depth = max([int(k[1]) for k in track if k.startswith("L")] + [1])
    names = [a[0] for a in axes]
    grids = [a[1] for a in axes]
    cells = list(itertools.product(*grids))
    tasks = [(family, {**fixed, **dict(zip(names, c))}, tuple(track), depth) for c in cells]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(scan_cell, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        rows = [scan_cell(t) for t in tasks]
    return names, grids, cells, rows


SIGN_TOL = 1e-12   # values this small are numerical zeros and carry no sign


def _sign_flags(grids, rows, track):
    """Cell flag: a tracked quantity changes sign towards the next cell on some axis."""
    shape = [len(g) for g in grids]
    flags = [False] * len(rows)
    numeric = [k for k in track if k != "kind"]
    for idx in itertools.product(*[range(n) for n in shape]):
        flat = np.ravel_multi_index(idx, shape)
        for ax in range(len(shape)):
            if idx[ax] + 1 >= shape[ax]:
                continue
            nxt = list(idx)
            nxt[ax] += 1
            other = np.ravel_multi_index(nxt, shape)
            for k in numeric:
                a, b = rows[flat].get(k, math.nan), rows[other].get(k, math.nan)
                if math.isfinite(a) and math.isfinite(b) and a * b < 0 \
                        and min(abs(a), abs(b)) > SIGN_TOL:
                    flags[flat] = True
    return flags


def cmd_scan(args) -> int:
    if args.family is None:
        if not args.file:
            raise CliError("scan needs --family or a network file with a '# family:' header",
                           EXIT_PARSE)
        try:
            with open(args.file, encoding="utf-8") as fh:
                directive = family_directive(fh.read())
        except OSError as exc:
            raise CliError(f"cannot read {args.file}: {exc.strerror}", EXIT_PARSE) from None
        if directive is None:
            raise CliError("network file has no '# family:' header", EXIT_PARSE)
        family, fixed = directive
    else:
        family, fixed = args.family, {}
    try:
        get_family(family)
    except FamilyError as exc:
        raise CliError(str(exc), EXIT_PARSE) from None
    axes = [_scan_axis(p) for p in args.param or ()]
    if not axes or len(axes) > 2:
        raise CliError("give one or two --param name=lo:hi:n", EXIT_PARSE)
    scan_names = {a[0] for a in axes}
    fixed = {k: v for k, v in {**fixed, **_parse_params(args.fix)}.items() if k not in scan_names}
    track = [t.strip() for t in args.track.split(",") if t.strip()]
    names, grids, cells, rows = run_scan(family, axes, fixed, track, _workers())
    flags = _sign_flags(grids, rows, track)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names + track + ["sign_change"])
    for cell, row, flag in zip(cells, rows, flags):
        vals = [row[k] if k == "kind" else _num(row[k]) for k in track]
        w.writerow([_num(c) for c in cell] + vals + [int(flag)])
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# --------------------------------------------------------------------------
# cycles

def cmd_cycles(args) -> int:
    src = load_source(args)
    if args.scaled:
        vf, eq = _field_and_eq(src, True)
    else:
        vf = vector_field(src.network)
        eq = _equilibrium(src.network).point
    lo, hi = 1e-3, None
    if args.section_range:
        lo, hi = _range(args.section_range)
    section = dynamics.PoincareSection(eq, (1.0, 0.0), (lo, hi))
    opts = dynamics.ReturnOptions(rtol=args.rtol, atol=args.atol, t_max=args.budget)
    rep = dynamics.find_limit_cycles(vf, section, args.grid, opts)
    out = rep.as_dict()
    out["equilibrium"] = list(eq)
    sys.stdout.write(dump_json(out))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def _add_source(p, with_critical=False):
    p.add_argument("file", nargs="?", help="network file (.crn)")
    p.add_argument("--family", choices=sorted(FAMILIES), help="built-in parameter family")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="family parameter (repeatable)")
    p.add_argument("--kappa", help="comma-separated rate constants, applied positionally")
    if with_critical:
        p.add_argument("--at-critical", action="store_true",
                       help="use the family's degenerate (critical) parameter point")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crn-planar",
                                 description="Analysis of planar mass-action reaction networks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="structural, equilibrium, local and global report (JSON)")
    _add_source(p, with_critical=True)
    p.add_argument("--focal-depth", type=int, default=4, choices=range(1, 5), metavar="N")
    p.add_argument("--json", action="store_true", help="JSON output (the default)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="integrate one trajectory (CSV)")
    _add_source(p, with_critical=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--t", type=float, default=10.0)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--scaled", action="store_true", help="use the field scaled to (1,1)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("portrait", help="phase portrait from a grid of starts (SVG)")
    _add_source(p, with_critical=True)
    p.add_argument("--xrange", required=True, metavar="LO:HI")
    p.add_argument("--yrange", required=True, metavar="LO:HI")
    p.add_argument("--grid", type=int, default=6)
    p.add_argument("--t", type=float, default=30.0)
    p.add_argument("--log", action="store_true", help="logarithmic axes")
    p.add_argument("--section", action="store_true", help="draw the Poincare section ray")
    p.add_argument("--scaled", action="store_true")
    p.add_argument("--title")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_portrait)

    p = sub.add_parser("scan", help="parameter scan of trace and focal values (CSV)")
    p.add_argument("file", nargs="?")
    p.add_argument("--family", choices=sorted(FAMILIES))
    p.add_argument("--param", action="append", metavar="NAME=LO:HI:N", help="scan axis (1 or 2)")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE", help="fixed family parameter")
    p.add_argument("--track", default="trace,L1,L2")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("cycles", help="limit cycles on a Poincare section (JSON)")
    _add_source(p, with_critical=True)
    p.add_argument("--section-range", metavar="LO:HI")
    p.add_argument("--budget", type=float, default=1e4, help="time budget per return")
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--rtol", type=float, default=1e-11)
    p.add_argument("--atol", type=float, default=1e-13)
    p.add_argument("--scaled", action="store_true")
    p.set_defaults(func=cmd_cycles)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"crn-planar: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
