"""``rdmgeom`` command line: surface sweeps, random scatter clouds, order-parameter scans, exponent fits."""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import MODEL_TAGS, SeededRng, axis_labels
from .io import DatasetManifest, SchemaError, read_table, write_cloud, write_table

log = logging.getLogger("rdmgeom")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
SCATTER_CHUNK = 250


class UsageError(ValueError):
    pass


_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*(pi)?\s*$")


def parse_number(text: str) -> float:
    """A float, optionally with a ``pi`` suffix (``0.35pi``, ``pi``)."""
    m = _NUM.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise UsageError(f"not a number: {text!r}")
    val = float(m.group(1)) if m.group(1) is not None else 1.0
    return val * math.pi if m.group(2) else val


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (endpoints included) or a comma-separated list."""
    text = text.strip()
    if not text:
        raise UsageError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} is not start:stop:count")
        start, stop = parse_number(parts[0]), parse_number(parts[1])
        try:
            count = int(parts[2])
        except ValueError:
            raise UsageError(f"grid count {parts[2]!r} is not an integer") from None
        if count < 1:
            raise UsageError("grid count must be at least 1")
        if count == 1:
            return [start]
        return [float(v) for v in np.linspace(start, stop, count)]
    return [parse_number(t) for t in text.split(",")]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("RDMGEOM_WORKERS", "1")))
    except ValueError:
        return 1


def _map(fn, jobs, workers):
    """Ordered map; results come back by job index whatever the completion order."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    return [fn(j) for j in jobs]


def _manifest(model, params, timestamp):
    axes = list(axis_labels(model)) if model in MODEL_TAGS else ["a", "b", "c"]
    return DatasetManifest(model_tag=model, axes=axes, params=params,
                           created=DatasetManifest.timestamp(timestamp))


# --------------------------------------------------------------------------
# surface

def _surface_cell(job):
    model, opts, values = job
    try:
        if model in ("spin0d", "spin1d", "spinMF"):
            from .spin import ChainSpec, SpinParams, chain_ground, mean_field_extreme, two_spin_ground
            p = SpinParams(*values)
            if model == "spin0d":
                r = two_spin_ground(p)
            elif model == "spin1d":
                r = chain_ground(ChainSpec(opts["N"], opts["boundary"]), p)
            else:
                r = mean_field_extreme(p, opts["restarts"], SeededRng(opts["seed"]))
            return (r.point.a, r.point.b, r.point.c), None
        if model == "classical2d":
            from .classical import ClassicalParams, CylinderSpec, gibbs_observables
            g = gibbs_observables(CylinderSpec(opts["W"]), ClassicalParams(*values))
            return (g.zz, g.S, g.z), None
        from .bose import BoseParams, bose_point, bose_v0_branch, solve_mu
        v, T = values
        state = bose_v0_branch(T) if v == 0 else solve_mu(BoseParams(v, T))
        return bose_point(state), None
    except Exception as exc:  # recorded in the manifest, sweep continues
        return None, f"{type(exc).__name__}: {exc}"


def _pfeuty_files(out, Bz_grid, J_grid, timestamp):
    from .spin import pfeuty_point
    written = []
    for name, branch in (("pfeuty_line", "symmetric"), ("pfeuty_plus", "plus"),
                         ("pfeuty_minus", "minus")):
        rows = []
        for J in J_grid:
            if J <= 0:
                continue
            for Bz in Bz_grid:
                h = Bz / J
                if h < 0 or (branch != "symmetric" and h >= 1):
                    continue
                p = pfeuty_point(h, branch)
                rows.append((J, Bz, 0.0, p.a, p.b, p.c))
        m = _manifest("spin1d", {"branch": branch, "limit": "thermodynamic"}, timestamp)
        m.kind = "surface"
        path = out / f"{name}.csv"
        write_table(path, ["J", "Bz", "Bx", "a", "b", "c"], rows, m, sources="oracle")
        written.append(path)
    return written


def cmd_surface(args) -> int:
    model = args.model
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if model in ("spin0d", "spin1d", "spinMF"):
        names = ["J", "Bz", "Bx"]
        grids = [parse_grid(args.J), parse_grid(args.Bz), parse_grid(args.Bx)]
    elif model == "classical2d":
        names = ["J", "h", "T"]
        grids = [parse_grid(args.J), parse_grid(args.h), parse_grid(args.T)]
    else:
        names = ["v", "T"]
        grids = [parse_grid(args.v), parse_grid(args.T)]
    opts = {"N": args.N, "boundary": args.boundary, "W": args.W, "restarts": args.restarts, "seed": args.seed}
    cells = list(itertools.product(*grids))
    results = _map(_surface_cell, [(model, opts, c) for c in cells], args.workers)
    rows, failures = [], []
    for c, (point, err) in zip(cells, results):
        if err is None:
            rows.append(tuple(c) + tuple(point))
        else:
            failures.append({"params": list(c), "error": err})
    params = {"grids": dict(zip(names, [args.J if n == "J" else getattr(args, n) for n in names]))}
    if model == "spin1d":
        params.update(N=args.N, boundary=args.boundary)
    elif model == "classical2d":
        params["W"] = args.W
    elif model == "spinMF":
        params.update(restarts=args.restarts, seed=args.seed)
    params["failures"] = failures
    m = _manifest(model, params, args.timestamp)
    m.kind = "surface"
    write_table(out / f"{model}_surface.csv", names + ["a", "b", "c"], rows, m, sources="sweep")
    if model == "spin1d":
        _pfeuty_files(out, grids[1], grids[0], args.timestamp)
    for f in failures:
        log.warning("failed cell %s: %s", f["params"], f["error"])
    return EXIT_PARTIAL if failures else EXIT_OK


# --------------------------------------------------------------------------
# scatter

def _scatter_chunk(job):
    from .mps import scatter_array
    seed, start, count, dmin, dmax = job
    return scatter_array(count, dmin, dmax, SeededRng(seed), start=start)


def oracle_rows(J: float = 1.0, Bz_grid=None, eps: float = 1e-3, N: int = 12):
    """Explicit ``B_x = +-eps`` chain ground states ``(XX, Z, X, Y=0)``."""
    from .spin import ChainSpec, SpinParams, chain_ground
    Bz_grid = np.linspace(0.0, 1.5, 31) if Bz_grid is None else Bz_grid
    rows = []
    for Bz in Bz_grid:
        for bx in (eps, -eps):
            r = chain_ground(ChainSpec(N, "periodic"), SpinParams(J, float(Bz), bx))
            rows.append((r.point.a, r.point.b, r.point.c, 0.0))
    return np.array(rows)


def cmd_scatter(args) -> int:
    if args.count < 0:
        raise UsageError("count must be non-negative")
    if not 1 <= args.Dmin <= args.Dmax:
        raise UsageError("need 1 <= Dmin <= Dmax")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    jobs = [(args.seed, s, min(SCATTER_CHUNK, args.count - s), args.Dmin, args.Dmax)
            for s in range(0, args.count, SCATTER_CHUNK)]
    parts = _map(_scatter_chunk, jobs, args.workers)
    data = np.vstack(parts)[:, :4] if parts else np.empty((0, 4))
    sources = ["random"] * len(data)
    params = {"count": args.count, "D_min": args.Dmin, "D_max": args.Dmax, "seed": args.seed,
              "augmented": bool(args.augment)}
    if args.augment:
        orc = oracle_rows(eps=args.eps, N=args.N)
        data = np.vstack([data, orc])
        sources += ["oracle"] * len(orc)
        params.update(oracle={"J": 1.0, "Bz": "0:1.5:31", "Bx": [args.eps, -args.eps], "N": args.N})
    if args.no_y:
        data = data[:, :3]
    write_cloud(data, _manifest("spin1d", params, args.timestamp), out, sources)
    return EXIT_OK


# --------------------------------------------------------------------------
# opscan

def cmd_opscan(args) -> int:
    from .geometry import theta_scan
    table = read_table(args.cloud)
    if "y" not in table.columns:
        raise SchemaError(f"{args.cloud}: order-parameter scan needs a 'y' column")
    thetas = parse_grid(args.thetas) if args.thetas else [math.pi * k / 64 for k in range(64)]
    base = np.column_stack([table.column(c) for c in ("a", "b", "c", "y")])
    rep = theta_scan(base, thetas, refine=args.refine)
    m = _manifest(table.manifest.model_tag, {"cloud": Path(args.cloud).name,
                                             "cloud_hash": table.manifest.content_hash,
                                             "theta_star": rep.theta_star, "d_max": rep.d_max,
                                             "refined": bool(args.refine)}, args.timestamp)
    m.kind = "curve"
    m.axes = ["theta", "d_max"]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_table(args.out, ["theta", "d_max"], rep.curve, m)
    return EXIT_OK


# --------------------------------------------------------------------------
# exponent

def _spin_exponent(table, lo, hi):
    from .spin import critical_exponent_fit
    J, Bz = table.column("J"), table.column("Bz")
    a, b, c = table.column("a"), table.column("b"), table.column("c")
    keep = (J > 0) & (c > 0)
    h = Bz[keep] / J[keep]
    order = np.argsort(h)
    h, a, b, c = h[order], a[keep][order], b[keep][order], c[keep][order]
    if len(h) < 3:
        raise UsageError("too few ordered points on the surface")
    # the surface normal (J, Bz) = (1, h) satisfies dXX/dZ = -h, so slope + 1 = 1 - h
    slope = np.gradient(a, h) / np.gradient(b, h)
    win = (h >= lo) & (h <= hi)
    pts = list(zip((1.0 + slope)[win], c[win]))
    return pts, critical_exponent_fit


def _bose_exponent(table, lo, hi):
    from .bose import bose_tc
    from .spin import critical_exponent_fit
    v, T, c = table.column("v"), table.column("T"), table.column("c")
    tc = bose_tc()
    win = (v == 0) & (T >= lo * tc) & (T <= hi * tc) & (c > 0)
    pts = sorted(zip(tc - T[win], c[win]))
    return pts, critical_exponent_fit


def cmd_exponent(args) -> int:
    table = read_table(args.surface)
    lo, hi = (parse_number(x) for x in args.window.split(":"))
    kind = args.kind
    if kind == "auto":
        kind = "bose" if table.manifest.model_tag == "bose3d" else "spin"
    pts, fit = (_bose_exponent if kind == "bose" else _spin_exponent)(table, lo, hi)
    if len(pts) < 5:
        raise UsageError(f"window [{lo}, {hi}] holds {len(pts)} points; need at least 5")
    exponent = fit(pts)
    report = {"exponent": exponent, "kind": kind, "window": [lo, hi], "points": len(pts),
              "surface": Path(args.surface).name, "surface_hash": table.manifest.content_hash,
              "tool_version": __version__}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"exponent {exponent:.6f} from {len(pts)} points")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdmgeom", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--workers", type=int, default=default_workers(),
                       help="worker processes (default: $RDMGEOM_WORKERS or 1)")
        p.add_argument("--timestamp", default=None,
                       help="creation time stored in the manifest (default: $SOURCE_DATE_EPOCH or none)")
        p.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("surface", help="sweep a model over a parameter grid")
    s.add_argument("--model", required=True, choices=MODEL_TAGS)
    s.add_argument("--J", default="1", help="coupling grid (spin, classical2d)")
    s.add_argument("--Bz", default="0:2:41", help="longitudinal field grid (spin)")
    s.add_argument("--Bx", default="0", help="symmetry-breaking field grid (spin)")
    s.add_argument("--h", default="0", help="field grid (classical2d)")
    s.add_argument("--T", default="1:4:31", help="temperature grid (classical2d, bose3d)")
    s.add_argument("--v", default="0", help="source grid (bose3d)")
    s.add_argument("--N", type=int, default=12, help="chain length (spin1d)")
    s.add_argument("--boundary", choices=("periodic", "open"), default="periodic")
    s.add_argument("--W", type=int, default=8, help="cylinder width (classical2d)")
    s.add_argument("--restarts", type=int, default=32, help="multi-start count (spinMF)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".", help="output directory")
    common(s)
    s.set_defaults(func=cmd_surface)

    s = sub.add_parser("scatter", help="random uniform-MPS cloud")
    s.add_argument("--count", type=int, default=10000)
    s.add_argument("--Dmin", type=int, default=2)
    s.add_argument("--Dmax", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--augment", action="store_true", help="append B_x=+-eps chain ground states")
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--N", type=int, default=12, help="chain length for augmentation rows")
    s.add_argument("--no-y", action="store_true", help="omit the <Y> column")
    s.add_argument("--out", default="scatter.csv")
    common(s)
    s.set_defaults(func=cmd_scatter)

    s = sub.add_parser("opscan", help="d_max versus order-parameter mixing angle")
    s.add_argument("--cloud", required=True)
    s.add_argument("--thetas", default=None, help="grid in [0, pi] (default: 64 points in [0, pi))")
    s.add_argument("--refine", action="store_true", help="golden-section polish of the argmax")
    s.add_argument("--out", default="opscan.csv")
    common(s)
    s.set_defaults(func=cmd_opscan)

    s = sub.add_parser("exponent", help="critical exponent from surface data")
    s.add_argument("--surface", required=True)
    s.add_argument("--window", required=True, help="lo:hi in h (spin) or T/T_c (bose)")
    s.add_argument("--kind", choices=("auto", "spin", "bose"), default="auto")
    s.add_argument("--out", default="exponent.json")
    common(s)
    s.set_defaults(func=cmd_exponent)
    return ap


_NEGATIVE_VALUE = re.compile(r"^-(\d|\.\d)")


def _glue_negative_values(argv):
    """argparse treats ``-1,1`` as a flag; attach such values to their option."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_VALUE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = ap.parse_args(_glue_negative_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        ap.error("--workers must be at least 1")
    try:
        return args.func(args)
    except (UsageError, SchemaError, FileNotFoundError) as exc:
        print(f"rdmgeom {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
