"""Command line interface: ``dsforge genmesh | compute | oracle | bench``.

Exit codes: 0 success, 1 input error, 2 verification failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io_formats
from .basis import compute_linking_matrix, change_of_basis
from .complex import CellComplex
from .ds import extension_residual, run_ds, thinned_current_violations
from .errors import DsforgeError, InputError, InternalError
from .meshio import EXTRA_SHAPES, FORMATS, SHAPES, generate_canonical, parse_mesh, split_regions, write_mesh
from .snf import betti_numbers, homology, is_unimodular, pairing_matrix, verify_span
from .surface import debug_export

log = logging.getLogger("dsforge")

EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_INTERNAL = 0, 1, 2, 3
DEFAULT_ORACLE_CAP = 50_000


def _tags(values):
    out = []
    for v in values:
        out += [int(x) for x in str(v).split(",") if x.strip()]
    return out


def _load(args):
    mesh = parse_mesh(args.mesh, args.format)
    K = CellComplex.from_mesh(mesh)
    split = split_regions(K, _tags(args.conductor_regions),
                          exclude_outer_boundary=not args.keep_outer_boundary)
    return mesh, K, split


def _write_json(path, obj):
    text = io_formats.dumps(obj)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _oracle_section(K, split, lazy, cap):
    """Betti numbers and span verification; None when the mesh is over the cap."""
    if K.num_all_cells > cap:
        return None, [f"oracle disabled: {K.num_all_cells} cells exceed the cap of {cap}"]
    warnings = []
    bK = betti_numbers(K)
    if bK[1] != 0 or bK[2] != 0:
        warnings.append(f"mesh domain is not a topological ball (b1={bK[1]}, b2={bK[2]}); "
                        "results carry no guarantee")
    H = homology(split.K_a, 1)
    out = {"betti_K": list(bK), "betti1": H.betti, "torsion": H.torsion}
    if lazy is not None:
        out["span"] = verify_span(lazy, H).as_dict()
    return (out, H), warnings


def cmd_genmesh(args):
    mesh = generate_canonical(args.shape, args.refine)
    write_mesh(mesh, args.out, args.format)
    _write_json(args.report, {"shape": args.shape, "refinement": args.refine,
                              "vertices": mesh.num_vertices, "tetrahedra": mesh.num_tets})
    return EXIT_OK


def cmd_compute(args):
    t0 = time.perf_counter()
    mesh, K, split = _load(args)
    t_load = time.perf_counter() - t0
    lazy = run_ds(K, split, threads=args.threads)
    report = {
        "mesh": {"cells": list(K.cell_counts), "path": str(args.mesh)},
        "components": [{"index": c.index, "faces": c.num_faces, "euler_characteristic": c.euler_characteristic,
                        "genus": c.genus, "generators": s.count}
                       for c, s in zip(lazy.components, lazy.surface_sets)],
        "lanes": lazy.count,
        "timings_ms": {"load": round(1000 * t_load, 3),
                       **{k: round(1000 * v, 3) for k, v in lazy.timings.items()}},
        "fallback_solves": lazy.fallback_solves,
        "fallback_edges": lazy.fallback_edges,
        "warnings": [],
    }
    verdicts = {}
    oracle = None
    if args.verify or args.oracle or args.true_basis:
        t_dense = lazy.thinned_cochain().to_dense(K.num_cells(2))
        verdicts["thinned_cocycle"] = thinned_current_violations(K, lazy.thinned_cochain(), split.K_c) == 0
        verdicts["extension"] = extension_residual(K, lazy.full, t_dense) == 0 if lazy.count else True
        d = K.coboundary(lazy.cochain, dense=True)[split.K_a.masks[2]] if lazy.count else np.zeros(0)
        verdicts["insulator_cocycle"] = not np.any(d)
        res, warnings = _oracle_section(K, split, lazy, args.oracle_cap)
        report["warnings"] += warnings
        if res is not None:
            oracle, H = res
            report["oracle"] = oracle
            report["betti1"] = oracle["betti1"]
            verdicts["span"] = oracle["span"]["pass"]
    selection = None
    if args.true_basis:
        t1 = time.perf_counter()
        L = compute_linking_matrix(K, split, lazy, seed=args.seed)
        beta = oracle["betti1"] if oracle else None
        selection = change_of_basis(lazy, L, beta1=beta, basis=H if oracle else None)
        report["linking_matrix"] = L.entries.tolist()
        report["projection_retries"] = int(L.retries.sum())
        report["eulerian_lanes"] = L.eulerian_lanes
        report["timings_ms"]["true_basis"] = round(1000 * (time.perf_counter() - t1), 3)
        if selection.unimodular is not None:
            verdicts["true_basis_unimodular"] = selection.unimodular
    if verdicts:
        report["verification"] = verdicts
    if args.out:
        if args.binary:
            io_formats.write_generators_binary(args.out, lazy)
        else:
            io_formats.write_generators_json(args.out, lazy, selection)
    if args.debug_surface:
        Path(args.debug_surface).write_text(io_formats.dumps(debug_export(lazy.surface_sets)), encoding="utf-8")
    for w in report["warnings"]:
        log.warning(w)
    _write_json(args.report, report)
    return EXIT_OK if all(verdicts.values()) else EXIT_VERIFY


def cmd_oracle(args):
    mesh, K, split = _load(args)
    if K.num_all_cells > args.oracle_cap:
        log.warning("mesh has %d cells, above the oracle cap of %d; running anyway",
                    K.num_all_cells, args.oracle_cap)
    bK = betti_numbers(K)
    H = homology(split.K_a, 1)
    report = {"betti_K": list(bK), "betti1": H.betti, "torsion": H.torsion,
              "homology_basis": [[[int(c), int(v)] for c, v in z.items()] for z in H.cycles]}
    ok = True
    if args.check:
        doc = io_formats.read_generators(args.check)
        cochain = io_formats.cochain_from_records(doc["lanes"])
        if cochain.cells.size and cochain.cells[-1] >= K.num_cells(1):
            raise InputError("generator file refers to edges outside the mesh")
        span = verify_span(cochain, H)
        report["span"] = span.as_dict()
        d = K.coboundary(cochain, dense=True)[split.K_a.masks[2]] if cochain.lanes else np.zeros(0)
        report["insulator_cocycle"] = not np.any(d)
        ok = span.passed and report["insulator_cocycle"]
        if "basis" in doc:
            bc = io_formats.cochain_from_records(doc["basis"]["generators"]) if doc["basis"]["generators"] else None
            if bc is not None:
                P = pairing_matrix(bc, H, K.num_cells(1))
                report["basis_unimodular"] = bool(P.shape[0] == P.shape[1] and is_unimodular(P))
            else:
                report["basis_unimodular"] = H.betti == 0
            ok = ok and report["basis_unimodular"]
    report["pass"] = ok
    _write_json(args.out, report)
    return EXIT_OK if ok else EXIT_VERIFY


def bench(shape, refinements, repeats=5, threads=None):
    """Median DS runtime per refinement and the fitted log-log exponent vs tet count."""
    rows = []
    for r in refinements:
        mesh = generate_canonical(shape, r)
        K = CellComplex.from_mesh(mesh)
        split = split_regions(K, [1])
        times, fallback = [], 0
        for _ in range(repeats):
            t0 = time.perf_counter()
            lazy = run_ds(K, split, threads=threads, keep_full=False)
            times.append(time.perf_counter() - t0)
            fallback = lazy.fallback_solves
        rows.append({"refinement": r, "tetrahedra": K.num_cells(3), "cells": K.num_all_cells,
                     "median_s": float(np.median(times)), "times_s": times, "fallback_solves": fallback,
                     "lanes": lazy.count})
    out = {"shape": shape, "repeats": repeats, "runs": rows}
    if len(rows) >= 2:
        x = np.log([r["tetrahedra"] for r in rows])
        y = np.log([r["median_s"] for r in rows])
        out["exponent"] = float(np.polyfit(x, y, 1)[0])
    return out


def cmd_bench(args):
    refs = list(range(args.refine_min, args.refine_max + 1))
    out = bench(args.shape, refs, args.repeats, args.threads)
    code = EXIT_OK
    if args.ci and "exponent" in out:
        out["max_exponent"] = args.max_exponent
        out["pass"] = out["exponent"] <= args.max_exponent
        code = EXIT_OK if out["pass"] else EXIT_VERIFY
    _write_json(args.out, out)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="dsforge", description="Lazy first-cohomology generators of tetrahedral meshes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    shapes = sorted(SHAPES) + sorted(EXTRA_SHAPES)

    g = sub.add_parser("genmesh", help="write a canonical test mesh")
    g.add_argument("--shape", required=True, choices=shapes)
    g.add_argument("--refine", type=int, default=1)
    g.add_argument("--out", required=True)
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--report", default=None, help="summary JSON path (default: none)")
    g.set_defaults(func=cmd_genmesh)

    def mesh_args(q):
        q.add_argument("--mesh", required=True)
        q.add_argument("--format", choices=FORMATS)
        q.add_argument("--conductor-regions", nargs="+", required=True)
        q.add_argument("--keep-outer-boundary", action="store_true",
                       help="do not exclude the outer boundary from the conductor boundary")
        q.add_argument("--oracle-cap", type=int, default=DEFAULT_ORACLE_CAP)

    c = sub.add_parser("compute", help="compute lazy generators")
    mesh_args(c)
    c.add_argument("--out", help="generator file")
    c.add_argument("--report", default="-", help="run report JSON (default: stdout)")
    c.add_argument("--binary", action="store_true", help="write the generator file in DSH1 format")
    c.add_argument("--verify", action="store_true", help="structural checks plus the oracle span check")
    c.add_argument("--oracle", action="store_true", help="alias of --verify")
    c.add_argument("--true-basis", action="store_true", help="append a true basis to the generator JSON")
    c.add_argument("--debug-surface", help="write trees and surface generators to this JSON file")
    c.add_argument("--threads", type=int, default=None)
    c.add_argument("--seed", type=int, default=0, help="projection seed for linking numbers")
    c.set_defaults(func=cmd_compute)

    o = sub.add_parser("oracle", help="exact homology and generator verification")
    mesh_args(o)
    o.add_argument("--check", help="generator file to verify")
    o.add_argument("--out", default="-")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="scaling benchmark")
    b.add_argument("--shape", default="solid-torus-in-box", choices=shapes)
    b.add_argument("--refine-min", type=int, default=1)
    b.add_argument("--refine-max", type=int, default=4)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--ci", action="store_true", help="fail when the exponent exceeds --max-exponent")
    b.add_argument("--max-exponent", type=float, default=1.3)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="dsforge: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"dsforge: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InternalError as exc:
        print(f"dsforge: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except DsforgeError as exc:
        print(f"dsforge: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (OSError, ValueError) as exc:
        print(f"dsforge: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
