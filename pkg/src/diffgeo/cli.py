"""Command-line entry point: ``diffgeo <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import expand
from .bench import run_bench, write_bench
from .errors import DiffGeoError, InvalidArgument, MissingArtifact, NumericError, ResourceError
from .exterior import gradient, metric_pointwise, sharp, wedge
from .features import FeatureConfig, build_features, features_to_csv
from .frames import TruncationConfig
from .geometry import coordinate_metric, singularity_score, tangent_field
from .hodge import GapRule, cup_norm, harmonic_count, hodge_spectrum
from .kernel import KernelConfig
from .pipeline import SCHEMA_VERSION, Pipeline, PipelineConfig, atomic_write, parse_bandwidth
from .second_order import covariant_derivative, lie_bracket, riemann
from .synth import save_csv

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(p):
    src = p.add_argument_group("input")
    src.add_argument("--input", help="CSV file of points (optional header row)")
    src.add_argument("--shape-spec", help="generator spec as JSON text or a path to a JSON file")
    src.add_argument("--seed", type=int, help="override the seed in --shape-spec")
    k = p.add_argument_group("kernel")
    k.add_argument("--bandwidth", default="auto", help="'auto', a number t, or '<k>x' for k times auto (default auto)")
    k.add_argument("--alpha", type=float, default=1.0, help="density renormalisation exponent (default 1)")
    k.add_argument("--knn", type=int, help="sparse kernel with this many neighbours")
    t = p.add_argument_group("truncation")
    t.add_argument("--n0", type=int, default=35)
    t.add_argument("--n1", type=int, help="1-form frame size (default min(10, n0))")
    t.add_argument("--n2", type=int, help="frame index range for k >= 2 (default min(4, n0 - 1))")
    t.add_argument("--tau", type=float, default=1e-8, help="relative Gram eigenvalue threshold")
    t.add_argument("--epsilon", type=float, help="Galerkin regulariser (default: scaled by the Sobolev trace)")
    p.add_argument("--out", default="diffgeo_out", help="output directory (default diffgeo_out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diffgeo", description="Diffusion geometry on point clouds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="sample a synthetic cloud and write it as CSV")
    _common(p)
    p = sub.add_parser("basis", help="estimate the Laplacian eigenbasis")
    _common(p)
    p.add_argument("--num-eigs", type=int, help="eigenvalues to report (default n0)")
    p = sub.add_parser("forms", help="Dirichlet energies, Gram ranks and wedge norms")
    _common(p)
    p = sub.add_parser("hodge", help="Hodge spectrum, Betti estimate and cup norms")
    _common(p)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--num-eigs", type=int, default=10)
    p = sub.add_parser("singularity", help="per-point metric spectra, scores and tangents")
    _common(p)
    p = sub.add_parser("features", help="geometric feature vector")
    _common(p)
    p.add_argument("--config", help="feature schedule as JSON text or a path to a JSON file")
    p = sub.add_parser("curvature", help="connection residuals and curvature signs")
    _common(p)
    p = sub.add_parser("bench", help="stage timings on torus samples")
    p.add_argument("--sizes", default="2000,4000,8000", help="comma-separated ascending sample sizes")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bandwidth", default="auto")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--knn", type=int)
    p.add_argument("--n0", type=int, default=35)
    p.add_argument("--n1", type=int, default=10)
    p.add_argument("--n2", type=int, default=4)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--out", default="diffgeo_out")
    return parser


def _json_arg(text, what):
    if text is None:
        return {}
    p = Path(text)
    if not text.lstrip().startswith("{") and p.exists():
        text = p.read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{what} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise InvalidArgument(f"{what} must be a JSON object")
    return obj


def _floats(a):
    return [float(x) for x in np.asarray(a).ravel()]


def cmd_synth(pipe: Pipeline, args) -> dict:
    if pipe.config.shape_spec is None:
        raise InvalidArgument("synth needs --shape-spec")
    pc = pipe.cloud
    save_csv(pc, pipe.out_path("points.csv"))
    payload = {"command": "synth", "spec": pipe.config.shape_spec, "n": pc.n, "dim": pc.dim}
    if "intersections" in pc.meta:
        payload["intersections"] = np.asarray(pc.meta["intersections"]).tolist()
    pipe.write_json("synth.json", payload)
    return payload


def cmd_basis(pipe: Pipeline, args) -> dict:
    b = pipe.basis
    m = b.n0 if args.num_eigs is None else args.num_eigs
    if not 1 <= m <= b.n0:
        raise InvalidArgument(f"--num-eigs must lie in [1, {b.n0}]")
    payload = {"command": "basis", "n": b.n, "n0": b.n0, "bandwidth": b.bandwidth, "eigenvalues": _floats(b.eigenvalues[:m])}
    pipe.write_json("basis.json", payload)
    return payload


def cmd_forms(pipe: Pipeline, args) -> dict:
    calc = pipe.calc
    alg = calc.algebra
    n2 = calc.trunc.n2
    ranks = {str(k): calc.space(k).rank for k in range(min(n2, 2) + 1)}
    s1 = calc.space(1)
    energies = [float(alg.gamma.values[i, i, 0] / alg.c.phi0) for i in range(1, n2 + 1)]
    block = s1.gram[: min(6, s1.N), : min(6, s1.N)]
    wedges = []
    if n2 >= 2:
        grads = {i: gradient(calc, np.eye(i + 1)[i]) for i in range(1, n2 + 1)}
        for i in range(1, n2 + 1):
            for j in range(i + 1, n2 + 1):
                w = wedge(grads[i], grads[j])
                # truncated Grams can be indefinite: report the magnitude, not a clamped zero
                wedges.append({"i": i, "j": j, "norm": float(np.sqrt(abs(w.inner(w))))})
    payload = {
        "command": "forms",
        "dirichlet_energies": energies,
        "eigenvalues": _floats(alg.eigenvalues[1 : n2 + 1]),
        "gram_ranks": ranks,
        "gram_sizes": {k: calc.space(int(k)).N for k in ranks},
        "gram1_block": block.tolist(),
        "wedge_norms": wedges,
    }
    pipe.write_json("forms.json", payload)
    return payload


def cmd_hodge(pipe: Pipeline, args) -> dict:
    calc = pipe.calc
    k = args.degree
    if not 0 <= k <= calc.trunc.n2:
        raise InvalidArgument(f"--degree must lie in [0, {calc.trunc.n2}]")
    if args.num_eigs < 1:
        raise InvalidArgument("--num-eigs must be >= 1")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        spec = hodge_spectrum(calc, k, args.num_eigs, pipe.config.epsilon)
    for w in caught:
        pipe.log(f"warning: {w.message}")
    rule = GapRule()
    h = harmonic_count(spec.eigenvalues, rule)
    cups = []
    if k == 1 and calc.trunc.n2 >= 2 and h >= 2:
        forms = spec.forms[:h]
        cups = [[float(cup_norm(a, b)) if i != j else 0.0 for j, b in enumerate(forms)] for i, a in enumerate(forms)]
    payload = {
        "command": "hodge",
        "degree": k,
        "eigenvalues": _floats(spec.eigenvalues),
        "raw_eigenvalues": _floats(spec.raw_eigenvalues),
        "epsilon": spec.epsilon,
        "incomplete": bool(spec.incomplete),
        "betti": int(h),
        "cup_norms": cups,
    }
    pipe.write_json("hodge.json", payload)
    if k == 1:
        _write_dual_fields(pipe, spec)
    return payload


def _write_dual_fields(pipe, spec):
    """Per-point ``(X(x_0), X(x_1), ...)`` for each eigenform's dual field."""
    pc, basis = pipe.cloud, pipe.basis
    coords = expand(pc.points - pc.points.mean(axis=0), basis)
    rows = [pc.points]
    header = [f"x{j}" for j in range(pc.dim)]
    for m, form in enumerate(spec.forms):
        M = sharp(form).matrix
        rows.append(basis.phi @ (M @ coords))
        header += [f"form{m}_v{j}" for j in range(pc.dim)]
    _write_csv(pipe.out_path("hodge_fields.csv"), header, np.hstack(rows))


def _write_csv(path, header, data):
    import io

    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for row in data:
        w.writerow([repr(float(v)) for v in row])
    atomic_write(path, buf.getvalue().encode())


def cmd_singularity(pipe: Pipeline, args) -> dict:
    pc = pipe.cloud
    field = coordinate_metric(pc, pipe.algebra)
    score = singularity_score(field)
    T, degenerate = tangent_field(field)
    d = pc.dim
    header = [f"x{j}" for j in range(d)] + [f"eig{j}" for j in range(d)] + ["score"] + [f"t{j}" for j in range(d)] + ["degenerate"]
    data = np.hstack([pc.points, field.eigenvalues, score[:, None], T, degenerate[:, None].astype(float)])
    _write_csv(pipe.out_path("singularity.csv"), header, data)
    payload = {
        "command": "singularity",
        "n": pc.n,
        "bandwidth": pipe.basis.bandwidth,
        "score_quantiles": _floats(np.quantile(score, [0.0, 0.05, 0.5, 0.95, 1.0])),
        "degenerate_fraction": float(degenerate.mean()),
        "max_clip": float(field.clipped.max()),
    }
    inter = pc.meta.get("intersections")
    if inter is not None and len(inter):
        low = np.argsort(score, kind="stable")[: max(1, int(0.05 * pc.n))]
        dist = np.min(np.linalg.norm(pc.points[low][:, None] - np.asarray(inter)[None], axis=2), axis=1)
        payload["intersections"] = np.asarray(inter).tolist()
        payload["low5_mean_distance"] = float(dist.mean())
        payload["two_sqrt_bandwidth"] = float(2 * np.sqrt(pipe.basis.bandwidth))
    pipe.write_json("singularity.json", payload)
    return payload


def cmd_features(pipe: Pipeline, args) -> dict:
    cfg = FeatureConfig.from_dict(_json_arg(args.config, "--config"))
    calc = pipe.calc if cfg.needs_forms else None
    fv = build_features(pipe.basis, cfg, calc=calc)
    features_to_csv([fv], pipe.out_path("features.csv"), labels=[pipe.cloud.label or "cloud"])
    payload = {"command": "features", "n_features": len(fv), "config": cfg.to_dict(), "names": list(fv.names), "values": _floats(fv.values), "excluded": list(fv.excluded)}
    pipe.write_json("features.json", payload)
    return payload


def cmd_curvature(pipe: Pipeline, args) -> dict:
    calc = pipe.calc
    if calc.trunc.n2 < 2:
        raise InvalidArgument("curvature needs --n2 >= 2")
    X = gradient(calc, np.eye(2)[1])
    Y = gradient(calc, np.eye(3)[2])
    scale = X.norm() * Y.norm()
    nXY, nYX = covariant_derivative(X, Y), covariant_derivative(Y, X)
    # compared in the weak image, which stays meaningful when the Gram is indefinite
    resid = np.linalg.norm((nXY - nYX - lie_bracket(X, Y)).weak())
    torsion = resid / max(np.linalg.norm((nXY - nYX).weak()), np.finfo(float).tiny)
    phi0 = calc.algebra.c.phi0
    gYX = calc.space(1).inner(Y.v, X.v)
    MX = sharp(X).matrix
    lhs = (MX @ metric_pointwise(Y, X))[0] / phi0
    compat = abs(lhs - nXY.inner(X) - Y.inner(covariant_derivative(X, X))) / max(scale, np.finfo(float).tiny)
    # G-orthonormal pair for the sectional proxy.
    e1 = X.normalized()
    f = Y - e1 * e1.inner(Y)
    sect = float("nan")
    if f.norm() > 0:
        e2 = f.normalized()
        sect = riemann(e1, e2, e2).inner(e1)
    payload = {
        "command": "curvature",
        "fields": ["d phi_1", "d phi_2"],
        "torsion_residual": float(torsion),
        "metric_compatibility_residual": float(compat),
        "g_XY": float(gYX),
        "sectional_proxy": float(sect),
        "sectional_sign": int(np.sign(sect)) if np.isfinite(sect) else 0,
    }
    pipe.write_json("curvature.json", payload)
    return payload


def cmd_bench(args) -> dict:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise InvalidArgument(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    bw, scale = parse_bandwidth(args.bandwidth)
    kernel = KernelConfig(bandwidth=bw, alpha=args.alpha, knn=args.knn, n0=args.n0, bandwidth_scale=scale)
    trunc = TruncationConfig(args.n0, args.n1, args.n2)

    def progress(n, r, t):
        print(f"n={n} rep={r} " + " ".join(f"{v:.3f}s" for v in t), file=sys.stderr)

    res = run_bench(sizes, args.reps, kernel, trunc, args.degree, args.seed, progress)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = {"schema_version": SCHEMA_VERSION, "command": "bench", "degree": args.degree}
    write_bench(res, out / "bench.csv", out / "bench.json", extra)
    return {**extra, **res.summary()}


COMMANDS = {
    "synth": cmd_synth,
    "basis": cmd_basis,
    "forms": cmd_forms,
    "hodge": cmd_hodge,
    "singularity": cmd_singularity,
    "features": cmd_features,
    "curvature": cmd_curvature,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bench":
            payload = cmd_bench(args)
        else:
            pipe = Pipeline(PipelineConfig.from_args(args))
            payload = COMMANDS[args.command](pipe, args)
    except (InvalidArgument, MissingArtifact) as exc:
        print(f"diffgeo {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, ResourceError, np.linalg.LinAlgError) as exc:
        print(f"diffgeo {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DiffGeoError as exc:
        print(f"diffgeo {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    summary = {k: v for k, v in payload.items() if not isinstance(v, (list, dict))}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
