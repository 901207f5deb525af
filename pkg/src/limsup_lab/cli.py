"""Command-line driver: reproducible batch experiments over all modules.

Subcommands: gen-family, phi, content, sandwich, wwx, construct, dimension,
counterexample, pipeline.  Every run can emit a manifest (exact config,
package version, timings); timestamps live only in manifests so the data
outputs (JSON / JSON-lines / CSV) are byte-identical across reruns with the
same seed.

Exit codes: 0 success, 1 violated contract (diagnostic names the condition),
2 I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import cantor, cex, content, dimest, families
from .errors import LimsupLabError
from .geom import shape_from_json, shape_to_json, CubeUnion

__all__ = ["main", "run", "emit_plot_data"]


def _threads_from(args) -> int:
    env = os.environ.get("LIMSUP_LAB_THREADS")
    n = args.threads if getattr(args, "threads", None) else (int(env) if env else 1)
    if n < 1:
        raise LimsupLabError("--threads must be >= 1")
    return n


def _write_manifest(path: str, command: str, config: dict, timings: dict) -> None:
    doc = {
        "command": command,
        "config": config,
        "version": __version__,
        "timings_s": timings,
        "written_at": datetime.now(timezone.utc).isoformat(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_shapes(path: str) -> list[CubeUnion]:
    with open(path) as fh:
        doc = json.load(fh)
    shapes = [shape_from_json(s) for s in doc["shapes"]]
    for i, s in enumerate(shapes):
        if not isinstance(s, CubeUnion):
            raise LimsupLabError(
                f"shape {i}: phi/content commands operate on cube unions; "
                "rasterize balls and ellipsoids first"
            )
    return shapes


def _csv_writer(path: str):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _source_from_args(args) -> cantor.CandidateSource:
    if getattr(args, "family", None):
        pairs = families.load_family(args.family)
        return cantor.ExplicitPairsSource(pairs)
    rule = families.parse_shape_rule(args.shape)
    if args.kind == "dirichlet":
        if args.d != 1:
            raise LimsupLabError("dirichlet families are one-dimensional")
        return cantor.DirichletSource(rule, cells_per_minor=args.cells_per_minor)
    if args.kind == "random_cover":
        spec = families.FamilySpec(
            kind="random_cover",
            d=args.d,
            shape_rule=rule,
            count=args.count,
            seed=args.seed,
            radius_const=args.radius_const,
        )
        balls = families.gen_balls(spec)
        return cantor.RandomCoverSource(
            balls, rule, cells_per_minor=args.cells_per_minor
        )
    raise LimsupLabError(f"cannot build a candidate source for kind {args.kind!r}")


# --- subcommands -----------------------------------------------------------------


def _cmd_wwx(args) -> int:
    a = [float(x) for x in args.a.split(",")]
    print(f"{content.wwx_bound(args.d, a):.12g}")
    return 0


def _cmd_gen_family(args) -> int:
    t0 = time.perf_counter()
    rule = families.parse_shape_rule(args.shape)
    spec = families.FamilySpec(
        kind=args.kind,
        d=args.d,
        shape_rule=rule,
        count=args.count,
        seed=args.seed,
        radius_const=args.radius_const,
        path=args.family_file,
    )
    balls = families.gen_balls(spec)
    pairs = families.attach_shapes(balls, rule, cells_per_minor=args.cells_per_minor)
    families.save_family(pairs, args.out)
    if args.verify_depth:
        rep = families.verify_full_measure(balls, args.verify_depth)
        print(
            f"gen-family: {len(pairs)} pairs -> {args.out}; coverage "
            + ", ".join(
                f"n>={n}: {c:.4f}" for n, c in zip(rep.cutoffs, rep.coverages)
            )
        )
    else:
        print(f"gen-family: {len(pairs)} pairs -> {args.out}")
    if args.manifest:
        _write_manifest(
            args.manifest,
            "gen-family",
            {k: v for k, v in vars(args).items() if k != "func"},
            {"total": time.perf_counter() - t0},
        )
    return 0


def _cmd_phi(args) -> int:
    shapes = _load_shapes(args.shapes)
    fh, w = _csv_writer(args.out)
    with fh:
        w.writerow(
            [
                "shape_id",
                "s",
                "value",
                "certified_lower",
                "dual_upper",
                "radius_slack",
                "shift_slack",
            ]
        )
        for i, e in enumerate(shapes):
            r = content.phi_lower_lp(e, args.s, resolution=args.resolution)
            w.writerow(
                [i, args.s, r.value, r.certified, r.dual_upper, r.radius_slack, r.shift_slack]
            )
    print(f"phi: {len(shapes)} shapes at s={args.s} -> {args.out}")
    return 0


def _cmd_content(args) -> int:
    shapes = _load_shapes(args.shapes)
    fh, w = _csv_writer(args.out)
    with fh:
        w.writerow(["shape_id", "s", "value", "ball_cube_comparability"])
        for i, e in enumerate(shapes):
            v = content.content_dp(e, args.s, max_depth=args.depth)
            w.writerow([i, args.s, v, content.ball_cube_comparability(e.d, args.s)])
    print(f"content: {len(shapes)} shapes at s={args.s} -> {args.out}")
    return 0


def _cmd_sandwich(args) -> int:
    shapes = _load_shapes(args.shapes)
    fh, w = _csv_writer(args.out)
    n_pass = 0
    with fh:
        w.writerow(
            [
                "shape_id",
                "s",
                "phi_value",
                "phi_certified",
                "content",
                "dual_upper",
                "comparability",
                "lower_ok",
                "upper_ok",
                "passed",
            ]
        )
        for i, e in enumerate(shapes):
            rep = content.sandwich_check(
                e, args.s, resolution=args.resolution, max_depth=args.depth
            )
            n_pass += rep.passed
            w.writerow(
                [
                    i,
                    args.s,
                    rep.phi_value,
                    rep.phi_certified,
                    rep.content,
                    rep.dual_upper,
                    rep.comparability,
                    int(rep.lower_ok),
                    int(rep.upper_ok),
                    int(rep.passed),
                ]
            )
    print(f"sandwich: {n_pass}/{len(shapes)} passed at s={args.s} -> {args.out}")
    return 0 if n_pass == len(shapes) else 1


def _cmd_construct(args) -> int:
    t0 = time.perf_counter()
    source = _source_from_args(args)
    params = cantor.ConstructionParams(
        max_depth=args.depth,
        kappa2=args.kappa2,
        eps_schedule=None if args.eps_schedule == "harmonic" else None,
        rtilde_floor=args.floor,
        subdiv_cap=args.subdiv_cap,
    )
    tree = cantor.build(source, params)
    problems = cantor.validate_tree(tree)
    with open(args.out, "w") as fh:
        json.dump(cantor.tree_to_json(tree), fh, sort_keys=True)
        fh.write("\n")
    nodes = [tree.n_nodes(g) for g in range(tree.depth + 1)]
    print(
        f"construct: depth {tree.depth}, nodes per generation {nodes}, "
        f"{len(problems)} invariant violations -> {args.out}"
    )
    for msg in tree.warnings:
        print(f"  warning: {msg}")
    if args.manifest:
        _write_manifest(
            args.manifest,
            "construct",
            {k: v for k, v in vars(args).items() if k != "func"},
            {"total": time.perf_counter() - t0},
        )
    return 0 if not problems else 1


def _cmd_dimension(args) -> int:
    with open(args.tree) as fh:
        tree = cantor.tree_from_json(json.load(fh))
    if args.mode == "cases":
        rep = dimest.verify_case_bounds(
            tree, s=args.s, n_samples=args.samples, seed=args.seed
        )
        emit_plot_data(rep, args.out)
        print(
            f"dimension cases: {rep.n_violations} violations / {len(rep.samples)} "
            f"samples, fitted slope {rep.fitted_slope:.3f}, certified "
            f"s={rep.s_certified:.3f} -> {args.out}"
        )
        return 0 if rep.passed else 1
    if args.mode == "mdp":
        grid = np.arange(args.s_step, tree.d + 1e-9, args.s_step)
        val = dimest.mdp_lower_bound(
            tree, grid, n_points=args.samples, seed=args.seed
        )
        fh, w = _csv_writer(args.out)
        with fh:
            w.writerow(["s", "certified"])
            for s in grid:
                w.writerow([float(s), int(s <= val + 1e-12)])
        print(f"dimension mdp: certified s >= {val:.3f} -> {args.out}")
        return 0
    if args.mode == "box":
        scales = [int(k) for k in args.scales.split(",")]
        res = dimest.box_counting(tree, scales)
        fh, w = _csv_writer(args.out)
        with fh:
            w.writerow(["scale", "count"])
            for k, n in zip(res.scales, res.counts):
                w.writerow([k, n])
        print(f"dimension box: slope {res.slope:.3f} -> {args.out}")
        return 0
    raise LimsupLabError(f"unknown dimension mode {args.mode!r}")


def _cmd_counterexample(args) -> int:
    tree = cex.build_cex(args.depth)
    rep = cex.verify_empty_limsup(tree, args.a)
    partial, limit = cex.kappa_estimate(200)
    doc = {
        "a": float(args.a),
        "depth": args.depth,
        "n_threshold": rep.n_threshold,
        "passed": rep.passed,
        "levels_checked": list(rep.levels_checked),
        "kappa_partial_200": float(partial),
        "kappa_limit": limit,
        "level_measures": [
            str(cex.level_measure(tree, n)) for n in range(min(args.depth, 10) + 1)
        ],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"counterexample: a={args.a}, N(a)={rep.n_threshold}, "
        f"{'PASS' if rep.passed else 'FAIL'} -> {args.out}"
    )
    return 0 if rep.passed else 1


def _cmd_pipeline(args) -> int:
    t0 = time.perf_counter()
    os.makedirs(args.out_dir, exist_ok=True)
    timings: dict[str, float] = {}

    rule = families.parse_shape_rule(args.shape)
    t = time.perf_counter()
    prefix = min(args.count, args.family_prefix)
    spec = families.FamilySpec(
        kind=args.kind,
        d=args.d,
        shape_rule=rule,
        count=prefix,
        seed=args.seed,
        radius_const=args.radius_const,
    )
    balls = families.gen_balls(spec)
    pairs = families.attach_shapes(balls, rule, cells_per_minor=args.cells_per_minor)
    fam_path = os.path.join(args.out_dir, "family.jsonl")
    families.save_family(pairs, fam_path)
    timings["gen_family"] = time.perf_counter() - t

    t = time.perf_counter()
    source = _source_from_args(args)
    params = cantor.ConstructionParams(
        max_depth=args.depth,
        kappa2=args.kappa2,
        rtilde_floor=args.floor,
        subdiv_cap=args.subdiv_cap,
    )
    tree = cantor.build(source, params)
    problems = cantor.validate_tree(tree)
    tree_path = os.path.join(args.out_dir, "tree.json")
    with open(tree_path, "w") as fh:
        json.dump(cantor.tree_to_json(tree), fh, sort_keys=True)
        fh.write("\n")
    timings["construct"] = time.perf_counter() - t

    t = time.perf_counter()
    rep = dimest.verify_case_bounds(
        tree, s=args.s, n_samples=args.samples, seed=args.seed
    )
    report_path = os.path.join(args.out_dir, "report.csv")
    emit_plot_data(rep, report_path)
    grid = np.arange(0.05, tree.d + 1e-9, 0.05)
    mdp = dimest.mdp_lower_bound(tree, grid, n_points=args.mdp_points, seed=args.seed)
    timings["dimension"] = time.perf_counter() - t

    summary = {
        "tree_nodes": [tree.n_nodes(g) for g in range(tree.depth + 1)],
        "tree_warnings": tree.warnings,
        "invariant_violations": problems,
        "case_violations": rep.n_violations,
        "case_samples": len(rep.samples),
        "fitted_slope": rep.fitted_slope,
        "mdp_certified": float(mdp),
    }
    with open(os.path.join(args.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(
        os.path.join(args.out_dir, "manifest.json"),
        "pipeline",
        {k: v for k, v in vars(args).items() if k != "func"},
        {**timings, "total": time.perf_counter() - t0},
    )
    ok = not problems and rep.passed
    print(
        f"pipeline: tree {summary['tree_nodes']}, case violations "
        f"{rep.n_violations}, mdp >= {mdp:.3f} -> {args.out_dir} "
        f"[{'OK' if ok else 'VIOLATIONS'}]"
    )
    return 0 if ok else 1


def emit_plot_data(report, path: str) -> None:
    """Tidy CSV for external plotting.

    LocalDimReport: one row per sample with fixed columns
    x0..x{d-1}, r, mu, case, bound, pass.  SandwichReport: three rows
    (L, U, 6^s * dual upper proxy)."""
    if isinstance(report, dimest.LocalDimReport):
        fh, w = _csv_writer(path)
        with fh:
            if report.samples:
                d = len(report.samples[0].x)
            else:
                d = 0
            w.writerow([f"x{j}" for j in range(d)] + ["r", "mu", "case", "bound", "pass"])
            for smp in report.samples:
                w.writerow(
                    list(smp.x)
                    + [smp.r, smp.mu, smp.case, smp.bound, int(smp.passed)]
                )
        return
    if isinstance(report, content.SandwichReport):
        fh, w = _csv_writer(path)
        with fh:
            w.writerow(["quantity", "value"])
            w.writerow(["phi_lower", report.phi_value])
            w.writerow(["content_upper", report.content])
            w.writerow(["six_pow_s_dual_upper", 6.0**report.s * report.dual_upper])
        return
    raise LimsupLabError(f"no plot data emitter for {type(report)!r}")


# --- parser ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="limsup-lab",
        description="Desk-scale experiments on limsup sets: singular value "
        "functions, Hausdorff content, coverings, Cantor constructions, "
        "dimension certification.",
    )
    p.add_argument("--threads", type=int, default=None, help="worker cap (modules are pure; orchestration is sequential)")
    sub = p.add_subparsers(dest="command", required=True)

    w = sub.add_parser("wwx", help="anisotropic dimension bound")
    w.add_argument("--d", type=int, required=True)
    w.add_argument("--a", type=str, required=True, help="comma-separated exponents")
    w.set_defaults(func=_cmd_wwx)

    g = sub.add_parser("gen-family", help="generate a ball family with shapes")
    g.add_argument("--kind", choices=["random_cover", "dirichlet", "explicit"], required=True)
    g.add_argument("--d", type=int, default=1)
    g.add_argument("--count", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--shape", type=str, required=True, help="concentric:A | ellipsoid:A1,A2 | dust:K:S | cusp:G")
    g.add_argument("--radius-const", type=float, default=2.0)
    g.add_argument("--cells-per-minor", type=int, default=8)
    g.add_argument("--family-file", type=str, default=None, help="balls JSONL for kind=explicit")
    g.add_argument("--verify-depth", type=int, default=0, help="grid depth for the full-measure report")
    g.add_argument("--out", type=str, required=True)
    g.add_argument("--manifest", type=str, default=None)
    g.set_defaults(func=_cmd_gen_family)

    for name, fn in (("phi", _cmd_phi), ("content", _cmd_content), ("sandwich", _cmd_sandwich)):
        q = sub.add_parser(name, help=f"{name} over a shapes file")
        q.add_argument("--shapes", type=str, required=True, help='JSON {"shapes": [...]} of cube unions')
        q.add_argument("--s", type=float, required=True)
        q.add_argument("--resolution", type=int, default=4)
        q.add_argument("--depth", type=int, default=10)
        q.add_argument("--out", type=str, required=True)
        q.set_defaults(func=fn)

    c = sub.add_parser("construct", help="build a construction tree")
    c.add_argument("--family", type=str, default=None, help="family JSONL (explicit source)")
    c.add_argument("--kind", choices=["random_cover", "dirichlet"], default="dirichlet")
    c.add_argument("--shape", type=str, default="concentric:2")
    c.add_argument("--d", type=int, default=1)
    c.add_argument("--count", type=int, default=200000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--radius-const", type=float, default=2.0)
    c.add_argument("--cells-per-minor", type=int, default=8)
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--eps-schedule", choices=["harmonic"], default="harmonic")
    c.add_argument("--kappa2", type=float, default=None)
    c.add_argument("--floor", type=float, default=2.0**-40)
    c.add_argument("--subdiv-cap", type=int, default=8)
    c.add_argument("--out", type=str, required=True)
    c.add_argument("--manifest", type=str, default=None)
    c.set_defaults(func=_cmd_construct)

    m = sub.add_parser("dimension", help="verify case bounds / mdp / box counting")
    m.add_argument("--tree", type=str, required=True)
    m.add_argument("--mode", choices=["cases", "mdp", "box"], required=True)
    m.add_argument("--samples", type=int, default=2000)
    m.add_argument("--s", type=float, default=0.5)
    m.add_argument("--s-step", type=float, default=0.05)
    m.add_argument("--scales", type=str, default="3,4,5,6,7")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", type=str, required=True)
    m.set_defaults(func=_cmd_dimension)

    x = sub.add_parser("counterexample", help="exact shrunk-limsup counterexample")
    x.add_argument("--depth", type=int, default=24)
    x.add_argument("--a", type=float, default=1.5)
    x.add_argument("--out", type=str, required=True)
    x.set_defaults(func=_cmd_counterexample)

    pl = sub.add_parser("pipeline", help="gen-family -> construct -> dimension")
    pl.add_argument("--kind", choices=["random_cover", "dirichlet"], required=True)
    pl.add_argument("--shape", type=str, required=True)
    pl.add_argument("--d", type=int, default=1)
    pl.add_argument("--count", type=int, default=200000)
    pl.add_argument("--family-prefix", type=int, default=500, help="pairs written to family.jsonl")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--radius-const", type=float, default=2.0)
    pl.add_argument("--cells-per-minor", type=int, default=8)
    pl.add_argument("--depth", type=int, required=True)
    pl.add_argument("--kappa2", type=float, default=None)
    pl.add_argument("--floor", type=float, default=2.0**-40)
    pl.add_argument("--subdiv-cap", type=int, default=8)
    pl.add_argument("--s", type=float, default=0.5)
    pl.add_argument("--samples", type=int, default=2000)
    pl.add_argument("--mdp-points", type=int, default=200)
    pl.add_argument("--out-dir", type=str, required=True)
    pl.set_defaults(func=_cmd_pipeline)
    return p


def run(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _threads_from(args)
    try:
        return args.func(args)
    except LimsupLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
