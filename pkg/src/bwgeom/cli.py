"""Command-line interface.

Every command reads plain-text matrix files (comma-separated rows, ``#``
comments) or a JSON manifest listing such files, prints one deterministic
report document on stdout, and writes any output matrices atomically.  The
same command line with the same files and seed produces byte-identical
output.

Exit codes: 0 success; 2 unusable input (parse errors, out-of-range values,
empty families, degenerate requests); 3 dimension mismatch; 4 not positive
semidefinite; 5 kernel condition violated (no transport map); 6 iteration cap
reached (the best iterate is still written).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .barycenter import (
    MeanConfig,
    fixed_point_residual,
    frechet_functional,
    mean_fixed_point,
    mean_procrustes_averaging,
    multicoupling,
    multicoupling_cost,
)
from .bures import optimal_map, procrustes_distance, procrustes_distance_via_alignment
from .errors import (
    DegenerateError,
    DimMismatchError,
    EmptyFamilyError,
    KernelConditionError,
    MatrixParseError,
    MaxIterExceeded,
    NonFiniteError,
    NotPSDError,
    OutOfRangeError,
)
from .geometry import geodesic
from .io import (
    Manifest,
    Report,
    load_family,
    read_manifest,
    read_matrix,
    render_report,
    write_manifest,
    write_matrix,
)
from .simulate import (
    RngSpec,
    convergence_equivalence,
    counterexample_family,
    deformation_family,
    equivalence_constant,
    fourth_moment_check,
    project,
    projection_error,
    projection_stability_experiment,
)
from .spectral import Covariance, cov_from_product, validate_psd
from .tpca import lift, reconstruct, tangent_pca


def _load_cov(path) -> Covariance:
    a = read_matrix(path)
    try:
        return validate_psd(a)
    except NotPSDError as e:
        raise NotPSDError(e.lambda_min, f"{path}: {e}") from None


def _load_pair(path_a, path_b) -> tuple[Covariance, Covariance]:
    a = _load_cov(path_a)
    b = _load_cov(path_b)
    if a.dim != b.dim:
        raise DimMismatchError(
            f"{path_a} is {a.dim}x{a.dim} but {path_b} is {b.dim}x{b.dim}"
        )
    return a, b


def _load_manifest_family(path) -> tuple[Manifest, list[Covariance]]:
    manifest = read_manifest(path)
    mats = load_family(manifest)
    covs = []
    for name, m in zip(manifest.operators, mats):
        try:
            covs.append(validate_psd(m))
        except NotPSDError as e:
            raise NotPSDError(e.lambda_min, f"{name}: {e}") from None
    return manifest, covs


def _matrix_payload(m) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(m)]


def _mean_config(args) -> MeanConfig:
    return MeanConfig(max_iter=args.max_iter, rel_tol=args.rel_tol)


def _solver_diagnostics(res) -> dict:
    return {
        "algorithm": res.algorithm,
        "iterations": res.iterations,
        "converged": res.converged,
        "functional_trace": list(res.functional_trace),
        "residual_trace": list(res.residual_trace),
        "trace_of_iterates": list(res.trace_of_iterates),
        "min_eig_of_iterates": list(res.min_eig_of_iterates),
    }


def _solve_mean(covs, args, algorithm=None):
    """Run the selected solver; on an iteration-cap failure keep the best
    iterate and remember exit code 6."""
    cfg = _mean_config(args)
    algorithm = algorithm or getattr(args, "algorithm", "descent")
    try:
        if algorithm == "gpa":
            return mean_procrustes_averaging(covs, cfg), 0
        return mean_fixed_point(covs, cfg, rank_tol=args.rank_tol), 0
    except MaxIterExceeded as e:
        return e.result, 6


def _outdir(args) -> str:
    os.makedirs(args.output, exist_ok=True)
    return args.output


def _report(command: str, inputs: dict, results: dict, diagnostics: dict) -> Report:
    return Report(
        command=command,
        inputs=inputs,
        results=results,
        diagnostics=diagnostics,
        version=__version__,
    )


def cmd_distance(args):
    a, b = _load_pair(args.a, args.b)
    pi, root_hs, tdist = convergence_equivalence(a, b)
    alignment = procrustes_distance_via_alignment(a, b)
    u = alignment.rotation
    results = {
        "procrustes": pi,
        "procrustes_squared": pi * pi,
        "alignment_distance": alignment.distance,
        "root_hs_distance": root_hs,
        "trace_distance": tdist,
    }
    diagnostics = {
        "dim": a.dim,
        "trace_a": a.trace,
        "trace_b": b.trace,
        "equivalence_constant": equivalence_constant(b),
        "trace_regime": bool(a.trace <= b.trace + 1.0),
        "rotation_orthogonality_gap": float(np.max(np.abs(u.T @ u - np.eye(a.dim)))),
    }
    inputs = {"a": args.a, "b": args.b, "rank_tol": args.rank_tol}
    return _report("distance", inputs, results, diagnostics), 0


def cmd_mean(args):
    manifest, covs = _load_manifest_family(args.manifest)
    res, code = _solve_mean(covs, args)
    outdir = _outdir(args)
    mean_file = os.path.join(args.output, "mean.txt")
    write_matrix(os.path.join(outdir, "mean.txt"), res.mean.mat)
    results = {
        "mean_file": mean_file,
        "trace": res.mean.trace,
        "functional": float(res.functional_trace[-1]),
        "residual": float(res.residual_trace[-1]),
        "iterations": res.iterations,
        "converged": res.converged,
    }
    diagnostics = _solver_diagnostics(res)
    diagnostics.update({"rel_tol": args.rel_tol, "max_iter": args.max_iter, "rank_tol": args.rank_tol})
    inputs = {
        "manifest": args.manifest,
        "operators": manifest.operators,
        "labels": manifest.labels,
        "algorithm": args.algorithm,
    }
    return _report("mean", inputs, results, diagnostics), code


def cmd_geodesic(args):
    if args.steps < 2:
        raise OutOfRangeError(f"steps={args.steps} must be at least 2")
    a, b = _load_pair(args.a, args.b)
    grid = np.linspace(0.0, 1.0, args.steps)
    points = [geodesic(a, b, float(t), args.rank_tol) for t in grid]
    dist = procrustes_distance(a, b)
    speed_table = []
    max_dev = 0.0
    for i in range(len(grid)):
        for j in range(i + 1, len(grid)):
            seg = procrustes_distance(points[i], points[j])
            dev = abs(seg - (grid[j] - grid[i]) * dist)
            speed_table.append([float(grid[i]), float(grid[j]), dev])
            max_dev = max(max_dev, dev)
    endpoint_gap = max(
        float(np.max(np.abs(points[0].mat - a.mat))),
        float(np.max(np.abs(points[-1].mat - b.mat))),
    )
    results = {
        "distance": dist,
        "grid": [float(t) for t in grid],
        "points": [_matrix_payload(p.mat) for p in points],
        "speed_table": speed_table,
        "max_speed_deviation": max_dev,
    }
    diagnostics = {"dim": a.dim, "endpoint_gap": endpoint_gap}
    inputs = {"a": args.a, "b": args.b, "steps": args.steps, "rank_tol": args.rank_tol}
    return _report("geodesic", inputs, results, diagnostics), 0


def cmd_pca(args):
    manifest, covs = _load_manifest_family(args.manifest)
    d = covs[0].dim
    k = args.components if args.components is not None else min(len(covs), d * (d + 1) // 2)
    res, code = _solve_mean(covs, args, algorithm="descent")
    lifted = lift(covs, res.mean, args.rank_tol)
    pca = tangent_pca(lifted, res.mean, k)
    outdir = _outdir(args)
    write_matrix(os.path.join(outdir, "mean.txt"), res.mean.mat)
    component_files = []
    for i, comp in enumerate(pca.components):
        name = f"component_{i + 1:02d}.txt"
        write_matrix(os.path.join(outdir, name), comp.mat)
        component_files.append(os.path.join(args.output, name))
    recon_errors = []
    for i, member in enumerate(covs):
        row = [
            procrustes_distance(reconstruct(res.mean, pca, i, kk), member)
            for kk in range(len(pca.components) + 1)
        ]
        recon_errors.append(row)
    results = {
        "mean_file": os.path.join(args.output, "mean.txt"),
        "component_files": component_files,
        "variances": list(pca.variances),
        "scores": _matrix_payload(pca.scores) if pca.scores.size else [],
        "lifted_mean_norm": pca.lifted_mean_norm,
        "effective_components": len(pca.components),
        "reconstruction_errors": recon_errors,
    }
    diagnostics = _solver_diagnostics(res)
    diagnostics.update({"requested_components": k, "rank_tol": args.rank_tol})
    inputs = {
        "manifest": args.manifest,
        "operators": manifest.operators,
        "labels": manifest.labels,
    }
    return _report("pca", inputs, results, diagnostics), code


def cmd_multicouple(args):
    manifest, covs = _load_manifest_family(args.manifest)
    res, code = _solve_mean(covs, args, algorithm="descent")
    joint = multicoupling(res.mean, covs, args.rank_tol)
    cost = multicoupling_cost(joint)
    functional = frechet_functional(res.mean, covs)
    outdir = _outdir(args)
    joint_file = os.path.join(args.output, "multicoupling.txt")
    write_matrix(os.path.join(outdir, "multicoupling.txt"), joint.full())
    block_gap = max(
        float(np.max(np.abs(joint.blocks[i, i] - covs[i].mat))) for i in range(joint.n)
    )
    full = joint.full()
    results = {
        "joint_file": joint_file,
        "cost": cost,
        "functional": functional,
        "cost_functional_gap": abs(cost - functional),
        "members": joint.n,
        "block_dim": joint.dim,
    }
    diagnostics = _solver_diagnostics(res)
    diagnostics.update(
        {
            "min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (full + full.T))[0]),
            "diagonal_block_gap": block_gap,
            "map_conditioning": [
                optimal_map(res.mean, c, args.rank_tol).condition() for c in covs
            ],
            "rank_tol": args.rank_tol,
        }
    )
    inputs = {
        "manifest": args.manifest,
        "operators": manifest.operators,
        "labels": manifest.labels,
    }
    return _report("multicouple", inputs, results, diagnostics), code


def _random_template(dim: int, seed: int) -> Covariance:
    gen = RngSpec(seed, "template").generator()
    q, _ = np.linalg.qr(gen.standard_normal((dim, dim)))
    evals = gen.uniform(0.5, 2.0, size=dim)
    return cov_from_product((q * evals) @ q.T)


def cmd_simulate_deform(args):
    if args.template is not None:
        template = _load_cov(args.template)
    else:
        template = _random_template(args.dim, args.seed)
    fam = deformation_family(template, args.count, args.eps, RngSpec(args.seed, "deform"))
    res, code = _solve_mean(fam.deformed, args, algorithm="descent")
    outdir = _outdir(args)
    write_matrix(os.path.join(outdir, "template.txt"), template.mat)
    member_names = []
    for i, member in enumerate(fam.deformed):
        name = f"member_{i + 1:02d}.txt"
        write_matrix(os.path.join(outdir, name), member.mat)
        member_names.append(name)
    write_manifest(os.path.join(outdir, "manifest.json"), member_names)
    write_matrix(os.path.join(outdir, "recovered.txt"), res.mean.mat)
    avg_map = sum(t.mat for t in fam.maps) / len(fam.maps)
    results = {
        "template_file": os.path.join(args.output, "template.txt"),
        "manifest_file": os.path.join(args.output, "manifest.json"),
        "recovered_file": os.path.join(args.output, "recovered.txt"),
        "members": args.count,
        "eps": args.eps,
        "recovery_distance": procrustes_distance(res.mean, template),
        "residual_at_template": fixed_point_residual(template, fam.deformed),
    }
    diagnostics = _solver_diagnostics(res)
    diagnostics.update(
        {
            "map_identity_gap": float(np.max(np.abs(avg_map - np.eye(template.dim)))),
            "template_trace": template.trace,
            "seed": args.seed,
        }
    )
    inputs = {
        "template": args.template,
        "dim": template.dim,
        "count": args.count,
        "eps": args.eps,
        "seed": args.seed,
    }
    return _report("simulate.deform", inputs, results, diagnostics), code


def _parse_ranks(text: str, d: int) -> list[int]:
    if text == "all":
        return list(range(1, d + 1))
    try:
        ranks = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise OutOfRangeError(f"cannot parse ranks {text!r}") from None
    if not ranks:
        raise OutOfRangeError("ranks list is empty")
    return ranks


def cmd_simulate_project(args):
    if (args.input is None) == (args.manifest is None):
        raise OutOfRangeError("provide either a matrix file or --manifest, not both")
    if args.manifest is not None:
        manifest, covs = _load_manifest_family(args.manifest)
        ranks = _parse_ranks(args.ranks, covs[0].dim)
        outcome = projection_stability_experiment(
            covs, ranks, basis=args.basis, cfg=_mean_config(args)
        )
        inputs = {
            "manifest": args.manifest,
            "operators": manifest.operators,
            "basis": args.basis,
            "ranks": ranks,
        }
        diagnostics = {"rel_tol": args.rel_tol, "max_iter": args.max_iter}
        return _report("simulate.project", inputs, outcome, diagnostics), 0
    c = _load_cov(args.input)
    ranks = _parse_ranks(args.ranks, c.dim)
    errors = []
    squared = []
    for r in ranks:
        err = projection_error(c, r, basis=args.basis)
        compressed = project(c, r, basis=args.basis)
        pi2 = procrustes_distance(c, compressed) ** 2
        errors.append(err)
        squared.append(pi2)
    results = {
        "ranks": ranks,
        "projection_error": errors,
        "squared_distance": squared,
        "max_identity_gap": max(abs(e - p) for e, p in zip(errors, squared)),
    }
    inputs = {"input": args.input, "basis": args.basis, "ranks": ranks}
    return _report("simulate.project", inputs, results, {"dim": c.dim, "trace": c.trace}), 0


def cmd_simulate_counterexample(args):
    mean, s1, s2, thresholds = counterexample_family(args.blocks, args.ratio, args.b0)
    res, code = _solve_mean([s1, s2], args, algorithm="descent")
    outdir = _outdir(args)
    write_matrix(os.path.join(outdir, "mean.txt"), mean.mat)
    write_matrix(os.path.join(outdir, "member_01.txt"), s1.mat)
    write_matrix(os.path.join(outdir, "member_02.txt"), s2.mat)
    write_manifest(os.path.join(outdir, "manifest.json"), ["member_01.txt", "member_02.txt"])
    results = {
        "mean_file": os.path.join(args.output, "mean.txt"),
        "manifest_file": os.path.join(args.output, "manifest.json"),
        "dim": mean.dim,
        "thresholds": list(thresholds),
        "min_threshold": float(np.min(thresholds)),
        "recovery_distance": procrustes_distance(res.mean, mean),
    }
    diagnostics = _solver_diagnostics(res)
    diagnostics.update(
        {
            "mean_eigenvalues": list(mean.spectrum.values),
            "rel_tol": args.rel_tol,
            "max_iter": args.max_iter,
        }
    )
    inputs = {"blocks": args.blocks, "ratio": args.ratio, "b0": args.b0}
    return _report("simulate.counterexample", inputs, results, diagnostics), code


def cmd_simulate_moments(args):
    c = _load_cov(args.input)
    outcome = fourth_moment_check(c, args.samples, RngSpec(args.seed, "moments"))
    inputs = {"input": args.input, "samples": args.samples, "seed": args.seed}
    return _report("simulate.moments", inputs, outcome, {"dim": c.dim, "trace": c.trace}), 0


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rel-tol", type=float, default=1e-9, help="relative convergence tolerance")
    p.add_argument("--max-iter", type=int, default=200, help="iteration cap")


def _add_rank_tol(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--rank-tol",
        type=float,
        default=None,
        help="relative eigenvalue cutoff for numerical rank (default dim * eps)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwgeom",
        description="Geometry of covariance matrices under the Bures-Wasserstein metric.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="Procrustes distance between two covariance files")
    p.add_argument("a")
    p.add_argument("b")
    _add_rank_tol(p)
    p.set_defaults(handler=cmd_distance)

    p = sub.add_parser("mean", help="Frechet mean of a manifest of covariances")
    p.add_argument("manifest")
    p.add_argument(
        "--algorithm",
        choices=["descent", "gpa"],
        default="descent",
        help="transport-map descent or generalized Procrustes averaging",
    )
    _add_solver_flags(p)
    _add_rank_tol(p)
    p.add_argument("--output", default=".", help="directory for mean.txt")
    p.set_defaults(handler=cmd_mean)

    p = sub.add_parser("geodesic", help="points along the geodesic between two covariances")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--steps", type=int, default=5, help="number of grid points (>= 2)")
    _add_rank_tol(p)
    p.set_defaults(handler=cmd_geodesic)

    p = sub.add_parser("pca", help="tangent PCA of a manifest at its Frechet mean")
    p.add_argument("manifest")
    p.add_argument("--components", "-k", type=int, default=None, help="number of components")
    _add_solver_flags(p)
    _add_rank_tol(p)
    p.add_argument("--output", default=".", help="directory for component files")
    p.set_defaults(handler=cmd_pca)

    p = sub.add_parser("multicouple", help="optimal multicoupling covariance of a manifest")
    p.add_argument("manifest")
    _add_solver_flags(p)
    _add_rank_tol(p)
    p.add_argument("--output", default=".", help="directory for the joint matrix")
    p.set_defaults(handler=cmd_multicouple)

    p = sub.add_parser("simulate", help="generative and stability experiments")
    sim = p.add_subparsers(dest="subcommand", required=True)

    q = sim.add_parser("deform", help="identity-mean deformations of a template covariance")
    q.add_argument("--template", default=None, help="template matrix file (default: generated)")
    q.add_argument("--dim", type=int, default=4, help="dimension of the generated template")
    q.add_argument("--count", type=int, default=5, help="family size")
    q.add_argument("--eps", type=float, default=0.3, help="largest deformation operator norm")
    q.add_argument("--seed", type=int, default=0)
    _add_solver_flags(q)
    _add_rank_tol(q)
    q.add_argument("--output", default=".", help="directory for the generated family")
    q.set_defaults(handler=cmd_simulate_deform)

    q = sim.add_parser("project", help="rank-r compression errors or family stability sweep")
    q.add_argument("input", nargs="?", default=None, help="matrix file for the error curve")
    q.add_argument("--manifest", default=None, help="manifest for the family stability sweep")
    q.add_argument("--ranks", default="all", help="comma-separated ranks (default all)")
    q.add_argument("--basis", choices=["standard", "eigen"], default="standard")
    _add_solver_flags(q)
    q.set_defaults(handler=cmd_simulate_project)

    q = sim.add_parser("counterexample", help="two-member family with vanishing domination thresholds")
    q.add_argument("--blocks", type=int, default=3, help="number of paired blocks")
    q.add_argument("--ratio", type=float, default=6.0, help="eigenvalue decay ratio (> 5)")
    q.add_argument("--b0", type=float, default=0.5, help="leading mixing weight in (0, 1]")
    _add_solver_flags(q)
    _add_rank_tol(q)
    q.add_argument("--output", default=".", help="directory for the generated family")
    q.set_defaults(handler=cmd_simulate_counterexample)

    q = sim.add_parser("moments", help="Monte Carlo fourth-moment identity check")
    q.add_argument("input", help="covariance matrix file")
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(handler=cmd_simulate_moments)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report, code = args.handler(args)
    except MatrixParseError as e:
        return _fail(2, e)
    except (OutOfRangeError, EmptyFamilyError, DegenerateError, NonFiniteError) as e:
        return _fail(2, e)
    except DimMismatchError as e:
        return _fail(3, e)
    except NotPSDError as e:
        return _fail(4, e)
    except KernelConditionError as e:
        return _fail(5, e)
    except MaxIterExceeded as e:
        return _fail(6, e)
    sys.stdout.write(render_report(report))
    if code == 6:
        sys.stderr.write("warning: iteration cap reached; result did not converge\n")
    return code


def _fail(code: int, e: Exception) -> int:
    sys.stderr.write(f"error: {e}\n")
    return code


def run() -> None:
    sys.exit(main())
