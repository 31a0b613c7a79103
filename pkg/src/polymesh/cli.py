"""Command-line pipeline: normalize -> mesh -> verify, plus one-off tools.

All certificates, metric values, and mesh coordinates live in the normalized
frame (the affine image of the body squeezed between the unit ball and
B(0, d)); the normalization manifest records the maps in both directions.
Serialized polynomials are the exception: they are composed with the
normalization map so they evaluate directly on original-frame points.

Artifacts are strict JSON written atomically (temp file + rename) with
sorted keys and shortest-round-trip floats, so identical configurations
produce byte-identical files. Every artifact-writing command also writes
`<out>.manifest.json` echoing the fully resolved configuration; an artifact
can be regenerated from its manifest alone.

Exit codes: 0 success, 1 parse/input, 2 normalization, 3 mesh or polynomial
construction, 4 certification failure (diagnostics still written), 5
internal. The environment variable POLYMESH_SEED overrides every seed for
CI determinism.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .dubiner import (DirectionSet, MetricContext, doubling_ratio, estimate_tau_dir,
                      rho_batch, rho_refined_with_direction)
from .errors import (DegreeBudgetError, FingerprintMismatchError, FlatnessError, InputError,
                     MeshQualityError, NormalizationError, PolymeshError, SeparationError,
                     UnboundedBodyError)
from .geometry import ConvexBody, NormalizedBody, john_normalize, sample_candidates
from .mesh import Mesh, MeshSpec, build_mesh, default_c_mesh, mesh_cardinality_scan
from .poly import compose_affine, fast_decreasing_poly, poly_from_dict
from .verify import NormingReport, certify
from .util import atomic_write_text, canonical_json

log = logging.getLogger("polymesh.cli")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_NORMALIZE = 2
EXIT_MESH = 3
EXIT_VERIFY = 4
EXIT_INTERNAL = 5


@dataclass
class RunConfig:
    """Fully resolved parameters of one pipeline run."""

    body_path: str
    n: int
    c_mesh: float | None = None
    mode: str = "maximal-separated"
    eta: float = 0.0
    pool_size: int = 0
    boundary_fraction: float = 0.7
    seed: int = 7
    dirs: int = 0
    rounds: int = 6
    trials: int = 200
    target: float = 2.0
    alpha: float = 0.5
    big_l: float = 4.0
    out_dir: str = "."
    jobs: int = 0
    log_level: str = "INFO"

    def to_dict(self):
        return asdict(self)


def _resolve_seed(seed):
    env = os.environ.get("POLYMESH_SEED")
    if env is not None:
        return int(env)
    return int(seed)


def _parse_point(text):
    try:
        return np.asarray([float(t) for t in text.split(",")], dtype=float)
    except ValueError as exc:
        raise InputError(f"cannot parse point {text!r}: {exc}") from exc


def _load_body(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read body file {path}: {exc}") from exc
    return ConvexBody.from_dict(data)


def _direction_set(dim, count, rounds):
    if count <= 0:
        ds = DirectionSet.default_for(dim)
        if rounds != ds.refinement_rounds:
            ds = DirectionSet(dim, ds.directions, ds.generator, ds.count, ds.seed,
                              rounds, ds.refinement_factor)
        return ds
    if dim == 2:
        return DirectionSet.angular(count, rounds=rounds)
    if dim == 3:
        return DirectionSet.fibonacci(count, rounds=rounds)
    return DirectionSet.random(dim, count, seed=0, rounds=rounds)


def _write_artifact(path, payload, manifest):
    atomic_write_text(path, canonical_json(payload) + "\n")
    atomic_write_text(str(path) + ".manifest.json", canonical_json(manifest) + "\n")


def _manifest(command, config_dict, artifacts):
    return {"command": command, "config": config_dict,
            "version": __version__, "artifacts": list(artifacts)}


def _nn_rho_distances(ctx, points):
    """Nearest-neighbor distance within a point set, in the metric."""
    from scipy.spatial import cKDTree

    n = points.shape[0]
    if n < 2:
        return np.full(n, math.inf)
    tree = cKDTree(points)
    k = min(8, n)
    _, idx = tree.query(points, k=k)
    best = np.full(n, np.inf)
    chord_scale = 2.0 * math.sqrt(2.0 * ctx.body.outer_radius)
    for col in range(1, k):
        vals = rho_batch(ctx, points, points[idx[:, col]])
        best = np.minimum(best, vals)
    # candidates beyond the k-NN ring cannot undercut best when their
    # Euclidean distance exceeds the chordal bound times best
    groups = tree.query_ball_point(points, best * chord_scale + 1e-12)
    pairs_i, pairs_j = [], []
    known = {(i, int(j)) for i in range(n) for j in idx[i, 1:]}
    for i, cand in enumerate(groups):
        for j in cand:
            if j != i and (i, j) not in known:
                pairs_i.append(i)
                pairs_j.append(j)
    if pairs_i:
        vals = rho_batch(ctx, points[np.asarray(pairs_i)], points[np.asarray(pairs_j)])
        np.minimum.at(best, np.asarray(pairs_i), vals)
    return best


# ---------------------------------------------------------------------------
# subcommands


def _cmd_normalize(args):
    body = _load_body(args.body)
    nb = john_normalize(body, num_support_samples=args.samples or None,
                        tau_norm=args.tau_norm)
    payload = nb.to_dict()
    payload["body_fingerprint"] = body.fingerprint()
    cfg = {"body": args.body, "samples": args.samples, "tau_norm": args.tau_norm}
    _write_artifact(args.out, payload, _manifest("normalize", cfg, [args.out]))
    print(f"normalized: inner_radius={nb.inner_radius:.6f} outer_radius={nb.outer_radius:.6f}")
    return EXIT_OK


def _context_for(body, dirs, rounds):
    nb = john_normalize(body)
    ctx = MetricContext.create(nb, _direction_set(body.dim, dirs, rounds))
    return nb, ctx


def _cmd_metric(args):
    body = _load_body(args.body)
    nb, ctx = _context_for(body, args.dirs, args.rounds)
    x = nb.to_normalized.apply(_parse_point(args.x))
    y = nb.to_normalized.apply(_parse_point(args.y))
    value, direction = rho_refined_with_direction(ctx, x, y, rounds=args.rounds)
    print(f"rho = {value!r}")
    print("argmax_direction = " + ",".join(repr(float(v)) for v in direction))
    return EXIT_OK


def _cmd_doubling(args):
    body = _load_body(args.body)
    nb, ctx = _context_for(body, args.dirs, args.rounds)
    center = nb.to_normalized.apply(_parse_point(args.center))
    seed = _resolve_seed(args.seed)
    ratio, stderr = doubling_ratio(ctx, center, args.h, args.samples, seed)
    print(f"ratio = {ratio!r} +- {stderr!r}")
    return EXIT_OK


def _mesh_spec_from(args, dim):
    c_mesh = args.c if args.c is not None else default_c_mesh(dim)
    mode = {"maximal": "maximal-separated", "covering": "covering-only"}[args.mode]
    return MeshSpec(n=args.n, c_mesh=c_mesh, pool_size=args.pool,
                    boundary_fraction=args.boundary_fraction,
                    seed=_resolve_seed(args.seed), mode=mode,
                    eta=args.eta if mode == "covering-only" else 0.0)


def _cmd_mesh(args):
    body = _load_body(args.body)
    nb, ctx = _context_for(body, args.dirs, args.rounds)
    spec = _mesh_spec_from(args, body.dim)
    mesh = build_mesh(ctx, spec, body_fingerprint=body.fingerprint())
    cfg = {"body": args.body, "spec": spec.to_dict(), "dirs": args.dirs, "rounds": args.rounds}
    _write_artifact(args.out, mesh.to_dict(), _manifest("mesh", cfg, [args.out]))
    print(f"mesh: N={mesh.cardinality} separation={mesh.separation_certificate!r} "
          f"covering={mesh.covering_certificate!r}")
    return EXIT_OK


def _cmd_fastpoly(args):
    body = _load_body(args.body)
    nb, ctx = _context_for(body, args.dirs, args.rounds)
    x = nb.to_normalized.apply(_parse_point(args.x))
    poly = fast_decreasing_poly(ctx, x, args.n, alpha=args.alpha, L=args.L,
                                pool_seed=_resolve_seed(args.seed))
    original_frame = compose_affine(poly, nb.to_normalized.matrix, nb.to_normalized.shift)
    payload = {"dim": body.dim, "degree": original_frame.degree,
               "tree": original_frame.to_dict()}
    cfg = {"body": args.body, "x": args.x, "n": args.n, "alpha": args.alpha,
           "L": args.L, "seed": _resolve_seed(args.seed)}
    _write_artifact(args.out, payload, _manifest("fastpoly", cfg, [args.out]))
    print(f"fastpoly: structural_degree={original_frame.degree}")
    return EXIT_OK


def _cmd_polyeval(args):
    try:
        with open(args.poly) as fh:
            payload = json.load(fh)
        poly = poly_from_dict(payload["tree"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read polynomial file: {exc}") from exc
    try:
        pts = np.loadtxt(args.points, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read points file: {exc}") from exc
    for v in poly.eval(pts):
        sys.stdout.write(repr(float(v)) + "\n")
    return EXIT_OK


def _cmd_verify(args):
    body = _load_body(args.body)
    try:
        with open(args.mesh) as fh:
            mesh = Mesh.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read mesh file: {exc}") from exc
    nb, ctx = _context_for(body, args.dirs, args.rounds)
    seed = _resolve_seed(args.seed)
    ok, report = certify(ctx, mesh, args.target, args.n, args.trials, seed,
                         body_fingerprint=body.fingerprint())
    cfg = {"body": args.body, "mesh": args.mesh, "n": args.n, "trials": args.trials,
           "target": args.target, "seed": seed}
    _write_artifact(args.out, report.to_dict(), _manifest("verify", cfg, [args.out]))
    print(f"verify: ensemble_max={report.ensemble_max_ratio:.6f} "
          f"adversarial_max={report.adversarial_max_ratio:.6f} target={args.target} "
          f"-> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def _cmd_scan(args):
    body = _load_body(args.body)
    nb, ctx = _context_for(body, args.dirs, args.rounds)
    degrees = [int(t) for t in args.degrees.split(",")]
    c_mesh = args.c if args.c is not None else default_c_mesh(body.dim)
    seed = _resolve_seed(args.seed)
    rows, _ = mesh_cardinality_scan(ctx, degrees, c_mesh, seed,
                                    body_fingerprint=body.fingerprint())
    payload = {"body_fingerprint": body.fingerprint(), "c_mesh": c_mesh, "seed": seed,
               "rows": [{"n": n, "N": big, "density": dens} for n, big, dens in rows]}
    cfg = {"body": args.body, "degrees": degrees, "c_mesh": c_mesh, "seed": seed}
    _write_artifact(args.out, payload, _manifest("scan", cfg, [args.out]))
    for n, big, dens in rows:
        print(f"n={n:4d}  N={big:6d}  N/n^d={dens:.4f}")
    return EXIT_OK


def _cmd_export(args):
    try:
        with open(args.input) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read artifact: {exc}") from exc
    lines = []
    if "points" in data and "certificates" in data:
        mesh = Mesh.from_dict(data)
        if args.body:
            body = _load_body(args.body)
            _, ctx = _context_for(body, args.dirs, args.rounds)
            nn = _nn_rho_distances(ctx, mesh.points)
        else:
            nn = np.full(mesh.cardinality, math.nan)
        dim = mesh.points.shape[1]
        cols = ",".join(f"x{i}" for i in range(dim))
        lines.append(f"# mesh export: columns {cols},nn_rho (normalized frame)")
        for p, v in zip(mesh.points, nn):
            lines.append(",".join(repr(float(c)) for c in p) + "," + repr(float(v)))
    elif "trial_ratios" in data:
        report = NormingReport.from_dict(data)
        lines.append("# report export: columns trial_index,ratio")
        for i, r in enumerate(report.trial_ratios):
            lines.append(f"{i},{r!r}")
    else:
        raise InputError("unknown artifact type (expected mesh or norming report)")
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"exported {len(lines) - 1} rows")
    return EXIT_OK


def run_pipeline(config: RunConfig):
    """normalize -> mesh -> verify with per-stage exit codes and artifacts.

    Artifacts (normalized.json, mesh.json, report.json and their manifests)
    land in config.out_dir; rerunning with an identical configuration
    rewrites byte-identical files. The report is still written when
    certification fails.
    """
    logging.basicConfig(level=getattr(logging, config.log_level.upper(), logging.INFO))
    try:
        body = _load_body(config.body_path)
    except InputError as exc:
        log.error("parse: %s", exc)
        return EXIT_PARSE
    cfg = config.to_dict()
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    seed = _resolve_seed(config.seed)
    cfg["seed"] = seed
    try:
        nb = john_normalize(body)
    except (NormalizationError, FlatnessError, UnboundedBodyError) as exc:
        log.error("normalize: %s", exc)
        return EXIT_NORMALIZE
    norm_path = os.path.join(out, "normalized.json")
    payload = nb.to_dict()
    payload["body_fingerprint"] = body.fingerprint()
    _write_artifact(norm_path, payload, _manifest("pipeline", cfg, [norm_path]))

    try:
        ctx = MetricContext.create(nb, _direction_set(body.dim, config.dirs, config.rounds))
        c_mesh = config.c_mesh if config.c_mesh else default_c_mesh(body.dim)
        spec = MeshSpec(n=config.n, c_mesh=c_mesh, pool_size=config.pool_size,
                        boundary_fraction=config.boundary_fraction, seed=seed,
                        mode=config.mode, eta=config.eta)
        mesh = build_mesh(ctx, spec, body_fingerprint=body.fingerprint())
    except PolymeshError as exc:
        log.error("mesh: %s", exc)
        return EXIT_MESH
    mesh_path = os.path.join(out, "mesh.json")
    _write_artifact(mesh_path, mesh.to_dict(), _manifest("pipeline", cfg, [mesh_path]))
    log.info("mesh: N=%d separation=%g covering=%g", mesh.cardinality,
             mesh.separation_certificate, mesh.covering_certificate)

    ok, report = certify(ctx, mesh, config.target, config.n, config.trials, seed,
                         body_fingerprint=body.fingerprint())
    report_path = os.path.join(out, "report.json")
    _write_artifact(report_path, report.to_dict(), _manifest("pipeline", cfg, [report_path]))
    log.info("verify: ensemble_max=%.6f adversarial_max=%.6f -> %s",
             report.ensemble_max_ratio, report.adversarial_max_ratio,
             "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


def _cmd_pipeline(args):
    config = RunConfig(
        body_path=args.body, n=args.n, c_mesh=args.c,
        mode={"maximal": "maximal-separated", "covering": "covering-only"}[args.mode],
        eta=args.eta, pool_size=args.pool, boundary_fraction=args.boundary_fraction,
        seed=args.seed, dirs=args.dirs, rounds=args.rounds, trials=args.trials,
        target=args.target, alpha=args.alpha, big_l=args.L, out_dir=args.out_dir,
        jobs=args.jobs or 0, log_level=args.log_level,
    )
    return run_pipeline(config)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="polymesh",
        description="optimal polynomial meshes on convex bodies with empirical certificates",
    )
    parser.add_argument("--version", action="version", version=f"polymesh {__version__}")
    parser.add_argument("--jobs", type=int, default=0,
                        help="worker-count hint for batch APIs (default: all cores)")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rounds_default=6):
        p.add_argument("--body", required=True, help="body specification JSON")
        p.add_argument("--dirs", type=int, default=0,
                       help="direction count (0: dimension default)")
        p.add_argument("--rounds", type=int, default=rounds_default)

    p = sub.add_parser("normalize", help="compute the John-type normalization")
    p.add_argument("--body", required=True)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--tau-norm", type=float, default=0.02)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("metric", help="evaluate the metric between two points")
    common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.set_defaults(func=_cmd_metric)

    p = sub.add_parser("doubling", help="Monte-Carlo doubling ratio of metric balls")
    common(p)
    p.add_argument("--center", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_doubling)

    p = sub.add_parser("mesh", help="build a separated/covering mesh")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--mode", choices=("maximal", "covering"), default="maximal")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--pool", type=int, default=0)
    p.add_argument("--boundary-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("fastpoly", help="build a fast-decreasing polynomial")
    common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=20250101)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fastpoly)

    p = sub.add_parser("polyeval", help="stream polynomial values for CSV points")
    p.add_argument("--poly", required=True)
    p.add_argument("--points", required=True)
    p.set_defaults(func=_cmd_polyeval)

    p = sub.add_parser("verify", help="certify a mesh against a norming target")
    common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--target", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("scan", help="cardinality scan over degrees")
    common(p)
    p.add_argument("--degrees", required=True, help="comma-separated ascending degrees")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("export", help="export mesh/report artifacts to CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--body", default="", help="body file (enables nn_rho column)")
    p.add_argument("--dirs", type=int, default=0)
    p.add_argument("--rounds", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("pipeline", help="normalize -> mesh -> verify in one run")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--mode", choices=("maximal", "covering"), default="maximal")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--pool", type=int, default=0)
    p.add_argument("--boundary-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--target", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold into the parse code
        code = exc.code if isinstance(exc.code, int) else 0
        return EXIT_PARSE if code else EXIT_OK
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO))
    try:
        return args.func(args)
    except (InputError, FingerprintMismatchError) as exc:
        log.error("input: %s", exc)
        return EXIT_PARSE
    except (NormalizationError, FlatnessError, UnboundedBodyError) as exc:
        log.error("normalize: %s", exc)
        return EXIT_NORMALIZE
    except (MeshQualityError, SeparationError, DegreeBudgetError) as exc:
        log.error("construction: %s", exc)
        return EXIT_MESH
    except PolymeshError as exc:
        log.error("internal: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
