"""Command-line interface: ``polyeq <command> [options]``.

Commands
--------
analyze-surface  flock reports for a registry surface (closed or patch)
analyze-curve    flock reports for a registry curve
sweep            running averages over a range of grid resolutions
analyze-mesh     equilibrium census of an OBJ/PLY triangle mesh

Exit status: 0 success, 2 success with near-degenerate carriers excluded,
1 failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (closed_surface_report, curve_flock, flock_report_patch, make_rng,
                       running_averages)
from .classify import classify_polygon
from .discretize import discretize_curve
from .errors import PolyeqError
from .geometry import find_curve_equilibria
from .meshio import TriangleMesh, load_mesh, write_obj
from .pebble import pebble_report
from .surfaces import curve_from_spec, surface_from_spec

log = logging.getLogger("polyeq")

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_DEGENERATE = 0, 1, 2
GOLDEN = (1 + math.sqrt(5)) / 2
#: default grid offsets: fractional parts of the golden ratio and its double
GOLDEN_OFFSETS = (GOLDEN - 1, 2 * GOLDEN - 3)


@dataclass
class RunConfig:
    command: str
    surface: Optional[str] = None
    curve: Optional[str] = None
    mesh: Optional[str] = None
    n: Optional[int] = None
    n_v: Optional[int] = None
    n_min: Optional[int] = None
    n_max: Optional[int] = None
    offsets: Optional[list] = None
    offset_mode: str = "golden"
    K: Optional[int] = None
    center: list = field(default_factory=lambda: [0.0, 0.0])
    origin: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    tol: float = 1e-10
    hops: int = 3
    ring: int = 2
    out: str = "."
    seed: int = 0

    def validate(self) -> None:
        sources = [x for x in (self.surface, self.curve, self.mesh) if x is not None]
        if len(sources) != 1:
            raise PolyeqError("exactly one input (surface, curve or mesh) is required")
        if not self.tol > 0:
            raise PolyeqError("tolerances must be positive")
        for name in ("n", "n_v", "n_min", "n_max"):
            v = getattr(self, name)
            if v is not None and v < 3:
                raise PolyeqError(f"n too small: {name}={v} (need >= 3)")
        if self.K is not None and self.K < 0:
            raise PolyeqError("K must be non-negative")


def _resolve_offsets(cfg: RunConfig, dim: int) -> list:
    if cfg.offsets is not None:
        off = [float(x) for x in cfg.offsets]
        if len(off) != dim:
            raise PolyeqError(f"expected {dim} offset value(s), got {len(off)}")
    elif cfg.offset_mode == "random":
        off = [float(x) for x in make_rng(cfg.seed).random(dim)]
    else:
        off = list(GOLDEN_OFFSETS[:dim])
    if not all(0.0 <= x < 1.0 for x in off):
        raise PolyeqError(f"offsets must lie in [0, 1), got {off}")
    return off


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _overlay(path: Path, verts, faces, points, kinds) -> None:
    """OBJ with the mesh followed by one marker vertex per equilibrium."""
    legend = "equilibrium markers appended after the mesh vertices, in order:\n" + \
        "\n".join(f"{k}" for k in kinds)
    write_obj(path, verts, faces, comment=legend, points=points)


def _envelope(cfg: RunConfig, body: dict) -> dict:
    return {"schema": SCHEMA, "version": __version__, "config": asdict(cfg), **body}


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6g}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_analyze_surface(cfg: RunConfig) -> int:
    surface = surface_from_spec(cfg.surface)
    if cfg.n is None:
        raise PolyeqError("--n is required")
    off = _resolve_offsets(cfg, 2)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if surface.periodic_u:
        rep = closed_surface_report(surface, cfg.n, cfg.n_v, off, cfg.origin, cfg.tol)
        flocks = rep.flocks
        eqs = rep.equilibria
        body = {"mode": "closed", "report": rep.to_dict()}
        verts, faces = rep.hull.vertices, rep.hull.faces
        near = list(eqs.near_degenerate)
    else:
        f = flock_report_patch(surface, cfg.n, off, cfg.K, cfg.center, cfg.origin, cfg.n_v, cfg.tol)
        flocks = [f]
        body = {"mode": "patch", "report": {"flocks": [f.to_dict()]}}
        from .discretize import discretize_surface
        patch = discretize_surface(surface, cfg.n, off, cfg.origin, n_v=cfg.n_v, center=cfg.center)
        verts, faces = patch.vertices.reshape(-1, 3), patch.triangles()
        near = list(f.near_degenerate)
    rows = []
    for k, f in enumerate(flocks):
        U, N, S = f.counts
        p = f.predicted
        rows.append([k, f.smooth_eq.kind, _fmt(p and p.S_star), S, _fmt(p and p.U_star), U,
                     _fmt(p and p.N_star), N,
                     "" if f.within_bounds is None else int(all(f.within_bounds.values()))])
    _write_json(out / "report.json", _envelope(cfg, body))
    _write_csv(out / "census.csv", ["flock", "kind", "S_star", "S", "U_star", "U", "N_star", "N",
                                    "within_bounds"], rows)
    members = [p for f in flocks for p in f.members]
    _overlay(out / "overlay.obj", verts, faces, [p.location for p in members], [p.kind for p in members])
    print(f"{len(flocks)} flock(s); report written to {out}")
    if near:
        log.warning("%d near-degenerate carrier(s) excluded from the counts", len(near))
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_analyze_curve(cfg: RunConfig) -> int:
    curve = curve_from_spec(cfg.curve)
    if cfg.n is None:
        raise PolyeqError("--n is required")
    (off,) = _resolve_offsets(cfg, 1)
    o = cfg.origin[:2]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    poly = discretize_curve(curve, cfg.n, off)
    eqs = classify_polygon(poly, o, cfg.tol)
    smooth = [e for e in find_curve_equilibria(curve, o) if not e.degenerate]
    # default window: a quarter of the mean spacing between smooth equilibria
    K = cfg.K if cfg.K is not None else max(1, cfg.n // (4 * max(len(smooth), 1)))
    flocks = []
    for e in smooth:
        flocks.append(curve_flock(curve, cfg.n, off, e.params[0], K, o, cfg.tol))
    body = {"census": {"U": eqs.U, "S": eqs.S, "closed": eqs.closed},
            "flocks": [f.to_dict() for f in flocks],
            "near_degenerate": [[c[0]] + [int(x) for x in c[1:]] for c in eqs.near_degenerate]}
    _write_json(out / "report.json", _envelope(cfg, body))
    _write_csv(out / "census.csv", ["flock", "kind", "S_star", "S", "U_star", "U", "band_ok"],
               [[k, f.smooth_eq.kind, _fmt(f.S_star), f.S, _fmt(f.U_star), f.U, int(f.band_ok)]
                for k, f in enumerate(flocks)])
    print(f"polygon census U={eqs.U} S={eqs.S}; {len(flocks)} flock(s); report written to {out}")
    return EXIT_DEGENERATE if eqs.near_degenerate else EXIT_OK


SWEEP_HEADER = ["k", "U_k", "N_k", "S_k", "mean_U", "mean_N", "mean_S"]


def _read_checkpoint(path: Path) -> dict:
    done = {}
    if not path.exists():
        return done
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != SWEEP_HEADER:
            raise PolyeqError(f"{path}: not a sweep checkpoint")
        for row in r:
            if len(row) != len(SWEEP_HEADER):
                break  # truncated final line of an interrupted run
            done[int(row[0])] = (int(row[1]), int(row[2]), int(row[3]))
    return done


def cmd_sweep(cfg: RunConfig) -> int:
    surface = surface_from_spec(cfg.surface)
    if cfg.n_min is None or cfg.n_max is None:
        raise PolyeqError("--n-min and --n-max are required")
    if cfg.K is None:
        raise PolyeqError("--K is required")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    series_path, cfg_path = out / "series.csv", out / "sweep.json"
    key = {k: v for k, v in asdict(cfg).items() if k not in ("n_max", "out")}
    if series_path.exists() and cfg_path.exists():
        old = json.loads(cfg_path.read_text()).get("config", {})
        if {k: v for k, v in old.items() if k not in ("n_max", "out")} != key:
            raise PolyeqError(f"{series_path} was written by a different configuration")
    done = {k: c for k, c in _read_checkpoint(series_path).items() if cfg.n_min <= k <= cfg.n_max}
    _write_json(cfg_path, _envelope(cfg, {"status": "running"}))

    ks = list(range(cfg.n_min, cfg.n_max + 1))
    prefix = 0
    while prefix < len(ks) and ks[prefix] in done:
        prefix += 1
    done_prefix = {k: done[k] for k in ks[:prefix]}
    # rewrite the contiguous checkpointed prefix (drops a truncated last line),
    # then append new rows in k order
    fh = open(series_path, "w", newline="")
    try:
        fh.write(",".join(SWEEP_HEADER) + "\n")
        tot = np.zeros(3)
        for t, k in enumerate(ks[:prefix]):
            tot += done_prefix[k]
            fh.write(_series_line(k, done_prefix[k], [float(x) for x in tot / (t + 1)]))
        fh.flush()
        series = running_averages(surface, cfg.origin, cfg.K, cfg.n_min, cfg.n_max, cfg.center,
                                  on_step=_make_writer(fh, ks, prefix, done_prefix), done=done_prefix)
    finally:
        fh.close()
    mu, mn, ms = series.final_means()
    t = series.targets
    body = {"status": "complete", "final_means": {"U": mu, "N": mn, "S": ms},
            "targets": t.to_dict(), "identity_of_means": ms + mu - mn,
            "grid_offsets": list(series.offsets), "rows": len(series.ks)}
    _write_json(cfg_path, _envelope(cfg, body))
    print(f"{len(series.ks)} resolutions; means U={mu:.4f} N={mn:.4f} S={ms:.4f} "
          f"(targets {t.U_star:.4f} {t.N_star:.4f} {t.S_star:.4f})")
    return EXIT_OK


def _series_line(k, counts, means) -> str:
    U, N, S = counts
    return f"{k},{U},{N},{S},{means[0]!r},{means[1]!r},{means[2]!r}\n"


def _make_writer(fh, ks, prefix, done_prefix):
    """Checkpoint writer: rows are appended in ``k`` order as results arrive."""
    state = {"t": prefix, "tot": np.zeros(3)}
    for k in ks[:prefix]:
        state["tot"] = state["tot"] + np.asarray(done_prefix[k], dtype=float)
    pending = {}

    def on_step(k, counts):
        pending[k] = tuple(int(x) for x in counts)
        while state["t"] < len(ks) and ks[state["t"]] in pending:
            kk = ks[state["t"]]
            c = pending.pop(kk)
            state["tot"] = state["tot"] + np.asarray(c, dtype=float)
            state["t"] += 1
            fh.write(_series_line(kk, c, [float(x) for x in state["tot"] / state["t"]]))
            fh.flush()

    return on_step


def cmd_analyze_mesh(cfg: RunConfig) -> int:
    mesh = load_mesh(cfg.mesh)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = pebble_report(mesh, hops=cfg.hops, ring=cfg.ring, tol=cfg.tol)
    _write_json(out / "report.json", _envelope(cfg, {"report": rep.to_dict()}))
    _write_csv(out / "pebble.csv", ["flock", "S_star", "S", "U_star", "U", "N_star", "N"], rep.table_rows())
    pts = rep.equilibria.counted()
    _overlay(out / "overlay.obj", rep.hull.vertices, rep.hull.faces,
             [p.location for p in pts], [p.kind for p in pts])
    S, U, N = rep.census
    print(f"{len(rep.rows)} flock(s); census S={S} U={U} N={N}; S+U-N={rep.poincare_hopf}")
    return EXIT_DEGENERATE if rep.near_degenerate else EXIT_OK


COMMANDS = {
    "analyze-surface": cmd_analyze_surface,
    "analyze-curve": cmd_analyze_curve,
    "sweep": cmd_sweep,
    "analyze-mesh": cmd_analyze_mesh,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyeq", description="Static equilibria of discretized convex bodies.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, offsets_dim):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--tol", type=float, default=1e-10, help="normalized slack tolerance")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--origin", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("X", "Y", "Z"))
        if offsets_dim:
            sp.add_argument("--offset", type=float, nargs=offsets_dim, default=None,
                            help="fractional grid offsets in [0, 1) (default: golden-ratio derived)")
            sp.add_argument("--random-offset", action="store_true",
                            help="draw the offsets from the seeded generator")

    s = sub.add_parser("analyze-surface", help="flock report of a registry surface")
    s.add_argument("--surface", required=True, help='e.g. "ellipsoid 1.25 1.15 1"')
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--n-v", type=int, default=None)
    s.add_argument("--K", type=int, default=None, help="window half width (patch mode)")
    s.add_argument("--center", type=float, nargs=2, default=[0.0, 0.0], metavar=("U", "V"))
    common(s, 2)

    c = sub.add_parser("analyze-curve", help="flock report of a registry curve")
    c.add_argument("--curve", required=True, help='e.g. "ellipse 2 1"')
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--K", type=int, default=None)
    common(c, 1)

    w = sub.add_parser("sweep", help="running averages over resolutions n-min..n-max")
    w.add_argument("--surface", required=True)
    w.add_argument("--n-min", type=int, required=True)
    w.add_argument("--n-max", type=int, required=True)
    w.add_argument("--K", type=int, required=True)
    w.add_argument("--center", type=float, nargs=2, default=[0.0, 0.0], metavar=("U", "V"))
    common(w, 0)

    m = sub.add_parser("analyze-mesh", help="census of an OBJ/PLY mesh")
    m.add_argument("--mesh", required=True)
    m.add_argument("--hops", type=int, default=3, help="flock clustering hop distance")
    m.add_argument("--ring", type=int, default=2, help="curvature fit neighbourhood (rings)")
    common(m, 0)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command, out=args.out, tol=args.tol, seed=args.seed,
                    origin=list(args.origin))
    for name in ("surface", "curve", "mesh", "n", "n_v", "n_min", "n_max", "K", "hops", "ring"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "center"):
        cfg.center = list(args.center)
    if getattr(args, "offset", None) is not None:
        cfg.offsets = list(args.offset)
        cfg.offset_mode = "explicit"
    elif getattr(args, "random_offset", False):
        cfg.offset_mode = "random"
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = config_from_args(args)
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except (PolyeqError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
