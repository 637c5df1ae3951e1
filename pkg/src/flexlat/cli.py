"""Command line: build, validate, trace, analyze and reduce periodic surfaces.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 a Gram cluster
of local dimension two or more (dimension alarm).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, builders, formats
from .flex import (Configuration, CorrectorError, SolverSettings, branch_directions,
                   gram_tangent_rank, infinitesimal_flex_space, constraint_jacobian,
                   project_newton, residual_vector, trace_flex)
from .gramset import (InsufficientPointsError, clusters, cluster_dimension, consecutive_gaps,
                      fit_relations, relation_residual, relations_to_dict, sample_gram)
from .lattice_complex import validate
from .realization import Realization, all_edge_lengths, gram
from .reduction import ReductionError, base_case_structure, basis_inner_products, reduce

log = logging.getLogger("flexlat")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_ALARM = 0, 2, 3, 4


class InputError(Exception):
    pass


class NumericalError(Exception):
    pass


def _vector(text: str, n: int, cast=float):
    try:
        vals = [cast(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    if len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _vec3(text):
    return _vector(text, 3)


def _matrix(text):
    c11, c12, c21, c22 = _vector(text, 4, int)
    return [[c11, c12], [c21, c22]]


def _threads(n_jobs: int) -> int:
    cap = os.environ.get("FLEXLAT_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise InputError(f"FLEXLAT_THREADS must be an integer, got {cap!r}")
    return max(1, min(limit, n_jobs))


# ---------------------------------------------------------------------------
# build


def cmd_build(args) -> int:
    meta = {"example": args.example}
    if args.example == "miura":
        p = builders.MiuraParams(args.alpha, args.a0, args.b0, args.z)
        c, r = builders.miura_ori(p)
        meta["params"] = {"alpha": args.alpha, "a0": args.a0, "b0": args.b0, "z": args.z}
    else:
        C = args.sublattice
        if args.example == "plane":
            a, b = np.array(args.a), np.array(args.b)
            c, r = builders.triangulated_plane(a, b, C)
        else:
            a, b = np.array([args.side, 0.0, 0.0]), np.array([0.0, args.side, 0.0])
            c, r = builders.grid_squares(args.side, C)
        meta["params"] = {"a": list(a), "b": list(b), "sublattice": C or [[1, 0], [0, 1]]}
        if args.fold_angle is not None:
            q = builders.folded_plane_seed(c, r, args.fold_angle, args.fold_family, base=(a, b))
            lengths = all_edge_lengths(c, r)
            r = q.realization()
            meta["fold"] = {"angle": args.fold_angle, "family": args.fold_family}
            meta["flat_lengths_max_deviation"] = float(
                np.abs(residual_vector(c, q, lengths)).max(initial=0.0))
    rep = validate(c)
    if not rep.ok:
        raise NumericalError(f"builder produced an invalid complex: {rep}")
    out = Path(args.out)
    name = f"{args.example}.json"
    formats.write_surface(out / name, c, r, meta)
    formats.write_manifest(out, "build", outputs=[name],
                           settings={k: v for k, v in sorted(vars(args).items())
                                     if k not in ("func", "out", "verbose")})
    print(out / name)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def _load(path):
    try:
        return formats.read_surface(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file")
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(str(exc))


def cmd_validate(args) -> int:
    c, r, _, _ = _load(args.input)
    rep = validate(c)
    if not rep.ok:
        raise InputError(f"invalid complex: {rep.violations[0]}")
    n, e, t = c.counts()
    print(f"valid: {n} orbits, {e} edges, {t} triangles, {len(c.aux)} aux")
    return EXIT_OK


def _require_valid(c):
    rep = validate(c)
    if not rep.ok:
        raise InputError(f"invalid complex: {rep.violations[0]}")


# ---------------------------------------------------------------------------
# trace


def _settings(args) -> SolverSettings:
    try:
        return SolverSettings(rank_tolerance=args.rank_tol, corrector_tolerance=args.corrector_tol,
                              step_size=args.step_size)
    except ValueError as exc:
        raise InputError(str(exc))


def cmd_trace(args) -> int:
    c, r, _, lengths = _load(args.input)
    _require_valid(c)
    if r is None:
        raise InputError("input has no realization to trace from")
    if lengths is None:
        lengths = all_edge_lengths(c, r)
    if args.steps < 0:
        raise InputError("--steps must be non-negative")
    s = _settings(args)
    try:
        q = Configuration.from_realization(c, r)
    except ValueError as exc:
        raise InputError(str(exc))
    if np.abs(residual_vector(c, q, lengths)).max(initial=0.0) > s.corrector_tolerance:
        try:
            q = project_newton(c, q, lengths, s)
        except CorrectorError as exc:
            raise NumericalError(f"input is off the constraint set: {exc}")
    space = infinitesimal_flex_space(constraint_jacobian(c, q), s)
    try:
        seeds = branch_directions(c, q, s, args.seed_branch)
    except ValueError as exc:
        raise InputError(str(exc))
    out = Path(args.out)
    results = {"flex_dimension": space.dimension,
               "gram_tangent_rank": gram_tangent_rank(c, q, s), "branches": {}}
    outputs = []
    n_coords = len(q.coords)
    if not seeds:
        name = "branch0_fwd.csv"
        formats.atomic_write(out / name, formats.path_csv(None, args.coords, n_coords))
        outputs.append(name)
        results["branches"][name] = {"samples": 0, "stop_reason": "rigid"}
    else:
        def run(seed):
            label, d = seed
            return label, trace_flex(c, q, d, args.steps, s, target=lengths)

        with ThreadPoolExecutor(_threads(len(seeds))) as pool:
            traced = list(pool.map(run, seeds))
        for label, path in traced:
            name = f"{label}.csv"
            formats.atomic_write(out / name, formats.path_csv(path, args.coords, n_coords))
            outputs.append(name)
            results["branches"][name] = {"samples": len(path), "stop_reason": path.stop_reason}
    settings = {"steps": args.steps, "step_size": s.step_size, "rank_tolerance": s.rank_tolerance,
                "corrector_tolerance": s.corrector_tolerance,
                "max_corrector_iterations": s.max_corrector_iterations,
                "seed_branch": args.seed_branch, "coords": args.coords}
    formats.write_manifest(out, "trace", inputs=[args.input], outputs=outputs,
                           settings=settings, results=results)
    for name in outputs:
        info = results["branches"][name]
        print(f"{out / name}: {info['samples']} samples ({info['stop_reason']})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    if not args.inputs:
        raise InputError("no trajectory files given")
    paths = []
    for p in args.inputs:
        try:
            paths.append(formats.read_path_csv(p))
        except FileNotFoundError:
            raise InputError(f"{p}: no such file")
        except ValueError as exc:
            raise InputError(str(exc))
    try:
        cloud = sample_gram(paths)
    except ValueError as exc:
        raise InputError(str(exc))
    if len(cloud) == 0:
        raise InputError("trajectories contain no samples")
    gaps = consecutive_gaps(cloud)
    positive = gaps[gaps > 0]
    radius = args.radius
    if radius is None:
        radius = 8 * float(np.median(positive)) if positive.size else 1.0
    comps = clusters(cloud)
    report, rel_out = [], []
    alarm = False
    max_residual = 0.0
    for k, comp in enumerate(comps):
        sub = cloud.subset(comp)
        entry = {"cluster": k, "points": len(comp),
                 "paths": sorted({int(t[0]) for t in sub.tags}),
                 "centroid": sub.points.mean(axis=0).tolist()}
        try:
            dim = cluster_dimension(sub.points, radius, args.dim_tol)
            entry["local_dimension"] = dim
            alarm |= dim >= 2
        except InsufficientPointsError as exc:
            entry["local_dimension"] = None
            entry["note"] = str(exc)
        try:
            rels = fit_relations(sub, args.degree, args.svd_threshold)
        except InsufficientPointsError as exc:
            rels = []
            entry["relations_note"] = str(exc)
        residuals = [relation_residual(rr, sub) for rr in rels]
        entry["relations"] = len(rels)
        entry["max_relation_residual"] = max(residuals, default=0.0)
        max_residual = max(max_residual, entry["max_relation_residual"])
        rel_out.append({"cluster": k, **relations_to_dict(rels, sub)})
        report.append(entry)
    out = Path(args.out)
    formats.atomic_write(out / "relations.json",
                         formats.dumps({"degree": args.degree, "clusters": rel_out}))
    summary = {"points": len(cloud), "radius": radius, "dimension_tolerance": args.dim_tol,
               "clusters": report, "max_relation_residual": max_residual, "alarm": alarm}
    formats.atomic_write(out / "dimension_report.json", formats.dumps(summary))
    series = []
    ids = cloud.path_ids
    for pid in np.unique(ids):
        sel = ids == pid
        series.append((Path(args.inputs[pid]).stem, cloud.points[sel, 0], cloud.points[sel, 2]))
    formats.atomic_write(out / "gram_scatter.svg", formats.scatter_svg(series))
    formats.write_manifest(out, "analyze", inputs=args.inputs,
                           outputs=["relations.json", "dimension_report.json", "gram_scatter.svg"],
                           settings={"degree": args.degree, "svd_threshold": args.svd_threshold,
                                     "radius": radius, "dimension_tolerance": args.dim_tol},
                           results={"clusters": len(comps), "alarm": alarm})
    for e in report:
        print(f"cluster {e['cluster']}: {e['points']} points, dimension {e['local_dimension']}, "
              f"{e['relations']} relations")
    if alarm:
        print("ALARM: a Gram cluster has local dimension >= 2", file=sys.stderr)
        return EXIT_ALARM
    return EXIT_OK


# ---------------------------------------------------------------------------
# reduce


def cmd_reduce(args) -> int:
    c, r, _, lengths = _load(args.input)
    _require_valid(c)
    trace = reduce(c, args.strategy)
    s = base_case_structure(trace.final)
    result = {"trace": trace.to_dict(), "base_case": s.to_dict()}
    if r is not None:
        sub = Realization(r.positions[list(trace.orbit_map)], r.a, r.b)
        ll, lm = basis_inner_products(s, all_edge_lengths(trace.final, sub))
        G = gram(r)
        result["inner_products"] = {"lam_lam": ll, "lam_mu": lm,
                                    "oracle_lam_lam": G.inner(s.lam, s.lam),
                                    "oracle_lam_mu": G.inner(s.lam, s.mu)}
    out = Path(args.out)
    formats.atomic_write(out / "reduction.json", formats.dumps(result))
    formats.write_manifest(out, "reduce", inputs=[args.input], outputs=["reduction.json"],
                           settings={"strategy": args.strategy},
                           results={"moves": len(trace), "q": s.q})
    print(f"{len(trace)} moves; base case q={s.q}, lambda={tuple(s.lam)}, mu={tuple(s.mu)}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexlat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="write an example surface (complex + realization)")
    b.add_argument("example", choices=["miura", "plane", "grid"])
    b.add_argument("--alpha", type=float, default=math.pi / 3)
    b.add_argument("--a0", type=float, default=2.0)
    b.add_argument("--b0", type=float, default=2.0)
    b.add_argument("--z", type=float, default=0.3)
    b.add_argument("--a", type=_vec3, default=[1.0, 0.0, 0.0])
    b.add_argument("--b", type=_vec3, default=[0.0, 1.0, 0.0])
    b.add_argument("--side", type=float, default=1.0)
    b.add_argument("--sublattice", type=_matrix, default=None, metavar="C11,C12,C21,C22")
    b.add_argument("--fold-angle", type=float, default=None)
    b.add_argument("--fold-family", choices=sorted(builders.FAMILIES), default="a")
    b.add_argument("--out", default=".", metavar="DIR")
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("validate", help="check a surface file")
    v.add_argument("input")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("trace", help="trace flexes from the realization of a surface file")
    t.add_argument("input")
    t.add_argument("--steps", type=int, default=100)
    t.add_argument("--step-size", type=float, default=1e-2)
    t.add_argument("--rank-tol", type=float, default=1e-8)
    t.add_argument("--corrector-tol", type=float, default=1e-10)
    t.add_argument("--seed-branch", default="gram",
                   help="'gram', 'all' or a nullspace basis index")
    t.add_argument("--coords", action="store_true", help="append chart coordinates to CSVs")
    t.add_argument("--out", default=".", metavar="DIR")
    t.set_defaults(func=cmd_trace)

    a = sub.add_parser("analyze", help="cluster, estimate dimension and fit Gram relations")
    a.add_argument("inputs", nargs="*")
    a.add_argument("--degree", type=int, default=2)
    a.add_argument("--svd-threshold", type=float, default=1e-7)
    a.add_argument("--radius", type=float, default=None,
                   help="neighbourhood radius (default: 8 x median sample gap)")
    a.add_argument("--dim-tol", type=float, default=0.1,
                   help="relative singular value threshold for local dimension")
    a.add_argument("--out", default=".", metavar="DIR")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("reduce", help="reduce a complex to the all-special base case")
    r.add_argument("input")
    r.add_argument("--strategy", choices=["first", "last"], default="first")
    r.add_argument("--out", default=".", metavar="DIR")
    r.set_defaults(func=cmd_reduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ReductionError) as exc:
        # bad parameters reaching a builder or the reduction engine
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CorrectorError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
