"""Command-line interface.

Subcommands: synth, cluster, evaluate, estimate-k, noise, verify-theorem,
bench. Exit codes: 0 success, 1 usage error, 2 data/format error,
3 algorithm failure.
"""

import argparse
import csv
import re
import sys
import time

import numpy as np

from .geometry import Flat, TubeMixture
from .kflats import kflats
from .lbf import lbf_cluster
from .metrics import misclassification_rate
from .model_order import estimate_k, sod_values, wk_curve
from .scale import ScaleParams, estimate_noise_epsilon
from .slbf import slbf_cluster
from .synth import SynthSpec, generate_hybrid
from .theorem import verify_theorem
from .utils import parallel_map, resolve_threads
from . import __version__

__all__ = ["main", "run"]

_ALGOS = ("lbf", "lbf-ms", "slbf", "slbf-ms", "kflats")


class DataError(Exception):
    """File missing or malformed."""


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with code 1 on usage errors."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _echo(pairs):
    for key, value in pairs:
        print(f"config: {key} = {value}")


def _resolve_seed(args):
    if args.seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**32))
        print(f"seed drawn from entropy: {seed}")
        return seed
    return args.seed


def write_points_csv(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(points.shape[1])])
        for row in points:
            writer.writerow([repr(float(v)) for v in row])


def read_points_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataError(f"cannot read points file {path}: {exc}") from exc
    if not rows:
        raise DataError(f"points file {path} is empty")
    start = 0
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        start = 1  # header row
    data = []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: not a number: {exc}") from exc
        if len(row) != len(rows[start]):
            raise DataError(f"{path}:{lineno}: inconsistent column count")
    if not data:
        raise DataError(f"points file {path} has a header but no data")
    return np.asarray(data, dtype=np.float64)


def write_labels(path, labels):
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def read_labels(path):
    try:
        with open(path) as fh:
            lines = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read labels file {path}: {exc}") from exc
    try:
        return np.array([int(line) for line in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"labels file {path}: {exc}") from exc


def _parse_case(case):
    m = re.fullmatch(r"(\d+)x(\d+)in(\d+)", case)
    if not m:
        raise DataError(f"cannot parse case {case!r}; expected like 2x2in4 (d x K in D)")
    d, k, big_d = (int(g) for g in m.groups())
    return d, k, big_d


def _spec_from_args(args):
    d, k, big_d = _parse_case(args.case)
    return SynthSpec(
        ambient_dim=big_d,
        flat_dims=(d,) * k,
        points_per_flat=args.n_per_flat,
        noise_sigma=args.sigma,
        outlier_fraction=args.outliers,
        affine=args.affine,
        min_angle=args.min_angle,
    )


def _cmd_synth(args):
    seed = _resolve_seed(args)
    spec = _spec_from_args(args)
    _echo(
        [
            ("case", args.case),
            ("points_per_flat", spec.points_per_flat),
            ("noise_sigma", spec.noise_sigma),
            ("outlier_fraction", spec.outlier_fraction),
            ("affine", spec.affine),
            ("min_angle", spec.min_angle),
            ("seed", seed),
        ]
    )
    cloud, _ = generate_hybrid(spec, seed=seed)
    write_points_csv(args.points_out, cloud.points)
    write_labels(args.labels_out, cloud.truth_labels)
    print(f"wrote {cloud.n_points} points to {args.points_out}")
    print(f"wrote labels to {args.labels_out}")
    return 0


def _scale_from_args(args, allow_first_scale):
    return ScaleParams(
        d=args.flat_dim,
        start_size=args.start_size,
        step_size=args.step_size,
        allow_first_scale=allow_first_scale,
        max_neighbors=args.max_neighbors,
    )


def _run_algo(algo, X, args, seed, threads):
    """Dispatch one clustering run; returns (labels, summary string)."""
    ms = algo.endswith("-ms")
    scale = _scale_from_args(args, allow_first_scale=ms)
    base = algo[:-3] if ms else algo
    if base == "lbf":
        n_candidates = args.candidates or 70 * args.num_clusters
        n_passes = args.passes if args.passes is not None else 5 * args.num_clusters
        _echo(
            [
                ("algo", algo),
                ("n_clusters", args.num_clusters),
                ("flat_dim", args.flat_dim),
                ("n_candidates", n_candidates),
                ("n_passes", n_passes),
                ("start_size", scale.resolved_start),
                ("step_size", scale.step_size),
                ("energy", args.energy),
                ("seed", seed),
                ("threads", threads),
            ]
        )
        labels, _, info = lbf_cluster(
            X, args.num_clusters, args.flat_dim, n_candidates=n_candidates,
            n_passes=n_passes, scale=scale, energy_kind=args.energy, seed=seed,
            threads=threads,
        )
        return labels, f"final energy: {info['energy']:.6g}"
    if base == "slbf":
        lambdas = (
            tuple(float(v) for v in args.lambdas.split(","))
            if args.lambdas
            else tuple(2.0 * np.exp(np.arange(7)))
        )
        _echo(
            [
                ("algo", algo),
                ("n_clusters", args.num_clusters),
                ("flat_dim", args.flat_dim),
                ("lambdas", ",".join(f"{v:.6g}" for v in lambdas)),
                ("kmeans_restarts", args.kmeans_restarts),
                ("start_size", scale.resolved_start),
                ("step_size", scale.step_size),
                ("seed", seed),
                ("threads", threads),
            ]
        )
        labels, info = slbf_cluster(
            X, args.num_clusters, args.flat_dim, lambdas=lambdas, scale=scale,
            kmeans_restarts=args.kmeans_restarts, seed=seed, threads=threads,
        )
        return labels, (
            f"best lambda: {info['best_lambda']:.6g}  "
            f"segmentation error: {info['lambda_errors'].min():.6g}"
        )
    # kflats
    _echo(
        [
            ("algo", algo),
            ("n_clusters", args.num_clusters),
            ("flat_dim", args.flat_dim),
            ("init", args.init),
            ("neighborhood_size", args.neighborhood_size),
            ("affine", not args.linear),
            ("max_iter", args.max_iter),
            ("seed", seed),
            ("threads", threads),
        ]
    )
    labels, _, trace = kflats(
        X, args.num_clusters, args.flat_dim, affine=not args.linear, init=args.init,
        neighborhood_size=args.neighborhood_size, scale=scale,
        max_iter=args.max_iter, seed=seed,
    )
    return labels, f"final objective: {trace[-1]:.6g} after {len(trace)} iterations"


def _cmd_cluster(args):
    X = read_points_csv(args.points)
    seed = _resolve_seed(args)
    threads = resolve_threads(args.threads)
    start = time.perf_counter()
    labels, summary = _run_algo(args.algo, X, args, seed, threads)
    elapsed = time.perf_counter() - start
    write_labels(args.labels_out, labels)
    print(summary)
    print(f"wall time: {elapsed:.2f} s")
    print(f"wrote labels to {args.labels_out}")
    return 0


def _cmd_evaluate(args):
    pred = read_labels(args.pred)
    truth = read_labels(args.truth)
    if len(pred) != len(truth):
        raise DataError(
            f"label counts differ: {len(pred)} predicted vs {len(truth)} truth"
        )
    rate = misclassification_rate(pred, truth)
    print(f"misclassification: {rate:.2f}%")
    return 0


def _cmd_estimate_k(args):
    X = read_points_csv(args.points)
    seed = _resolve_seed(args)
    threads = resolve_threads(args.threads)
    _echo(
        [
            ("algo", args.algo),
            ("flat_dim", args.flat_dim),
            ("k_max", args.k_max),
            ("seed", seed),
            ("threads", threads),
        ]
    )
    wk = wk_curve(X, args.flat_dim, args.k_max, algorithm=args.algo, seed=seed,
                  threads=threads)
    sod = sod_values(wk)
    print(f"{'K':>3} {'W_K':>14} {'SOD(ln W)':>12}")
    for k in range(1, args.k_max + 1):
        sod_str = f"{sod[k - 2]:12.4f}" if 2 <= k <= args.k_max - 1 else " " * 12
        print(f"{k:>3} {wk[k - 1]:14.6g} {sod_str}")
    print(f"estimated K: {estimate_k(wk)}")
    return 0


def _cmd_noise(args):
    X = read_points_csv(args.points)
    threads = resolve_threads(args.threads)
    scale = _scale_from_args(args, allow_first_scale=False)
    eps = estimate_noise_epsilon(X, scale, threads=threads)
    print(f"noise epsilon: {eps:.6g}")
    return 0


def _axis_flat(axis, big_d):
    basis = np.zeros((1, big_d))
    basis[0, axis] = 1.0
    return Flat(basis=basis, offset=np.zeros(big_d), affine=False)


def _theorem_setup(preset, width, separation):
    if preset == "perpendicular-lines":
        flats = [_axis_flat(0, 2), _axis_flat(1, 2)]
        x_star = np.array([separation, 0.0])
    elif preset == "orthogonal-axes-3d":
        flats = [_axis_flat(0, 3), _axis_flat(1, 3), _axis_flat(2, 3)]
        x_star = np.array([separation, 0.0, 0.0])
    elif preset == "orthogonal-planes-4d":
        e = np.eye(4)
        flats = [
            Flat(basis=e[:2], offset=np.zeros(4), affine=False),
            Flat(basis=e[2:], offset=np.zeros(4), affine=False),
        ]
        x_star = np.array([separation, 0.0, 0.0, 0.0])
    else:
        raise DataError(f"unknown preset {preset!r}")
    return TubeMixture(flats=tuple(flats), width=width), x_star


def _cmd_verify_theorem(args):
    seed = _resolve_seed(args)
    threads = resolve_threads(args.threads)
    mixture, x_star = _theorem_setup(args.preset, args.width, args.separation)
    _echo(
        [
            ("preset", args.preset),
            ("width", args.width),
            ("separation", args.separation),
            ("mc_samples", args.samples),
            ("grid_size", args.grid_size),
            ("seed", seed),
            ("threads", threads),
        ]
    )
    report = verify_theorem(
        mixture, x_star, mc_samples=args.samples, grid_size=args.grid_size,
        seed=seed, threads=threads,
    )
    print(f"r0 = {report.r0:.6g}")
    print(f"w/r0 = {report.w_over_r0:.6g} (bound {report.condition3_bound:.6g}, "
          f"condition {'holds' if report.condition3_holds else 'FAILS'})")
    print(f"r1* = {report.r1_star:.6g}  r2* = {report.r2_star:.6g}  "
          f"r* = {report.r_star:.6g}")
    for claim in report.claims:
        print(f"claim [{claim.name}]: {claim.status} ({claim.detail})")
    if args.profile_out:
        with open(args.profile_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "beta2", "std_error"])
            for r, v, s in zip(report.grid, report.values, report.std_errors):
                writer.writerow([repr(float(r)), repr(float(v)), repr(float(s))])
        print(f"wrote profile to {args.profile_out}")
    return 0


def _cmd_bench(args):
    seed = _resolve_seed(args)
    threads = resolve_threads(args.threads)
    algos = args.algos.split(",")
    for algo in algos:
        if algo not in _ALGOS:
            raise DataError(f"unknown algorithm {algo!r}; choose from {_ALGOS}")
    spec = _spec_from_args(args)
    _echo(
        [
            ("case", args.case),
            ("algos", ",".join(algos)),
            ("trials", args.trials),
            ("noise_sigma", spec.noise_sigma),
            ("outlier_fraction", spec.outlier_fraction),
            ("affine", spec.affine),
            ("seed", seed),
            ("threads", threads),
        ]
    )
    d, k, _ = _parse_case(args.case)
    children = np.random.SeedSequence(seed).spawn(args.trials)

    def one_trial(child):
        data_seed, algo_seed = child.spawn(2)
        cloud, _ = generate_hybrid(spec, seed=np.random.default_rng(data_seed))
        row = {}
        for algo in algos:
            ms = algo.endswith("-ms")
            scale = ScaleParams(d=d, allow_first_scale=ms)
            base = algo[:-3] if ms else algo
            t0 = time.perf_counter()
            if base == "lbf":
                labels, _, _ = lbf_cluster(
                    cloud.points, k, d, scale=scale,
                    seed=np.random.default_rng(algo_seed),
                    energy_kind=args.energy,
                )
            elif base == "slbf":
                labels, _ = slbf_cluster(
                    cloud.points, k, d, scale=scale,
                    seed=np.random.default_rng(algo_seed),
                )
            else:
                labels, _, _ = kflats(
                    cloud.points, k, d, affine=spec.affine, scale=scale,
                    seed=np.random.default_rng(algo_seed),
                )
            elapsed = time.perf_counter() - t0
            err = misclassification_rate(labels, cloud.truth_labels)
            row[algo] = (err, elapsed)
        return row

    rows = parallel_map(one_trial, children, threads)
    print(f"{'algo':>8} {'mean err %':>11} {'std err %':>10} {'mean sec':>9}")
    csv_rows = []
    for algo in algos:
        errs = np.array([row[algo][0] for row in rows])
        times = np.array([row[algo][1] for row in rows])
        print(f"{algo:>8} {errs.mean():11.2f} {errs.std(ddof=0):10.2f} "
              f"{times.mean():9.3f}")
        csv_rows.append([algo, f"{errs.mean():.2f}", f"{errs.std(ddof=0):.2f}",
                         f"{times.mean():.4f}"])
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algo", "mean_error_pct", "std_error_pct", "mean_seconds"])
            writer.writerows(csv_rows)
        print(f"wrote results to {args.csv_out}")
    return 0


def _add_scale_flags(p):
    p.add_argument("--flat-dim", type=int, required=True, help="dimension of the flats")
    p.add_argument("--start-size", type=int, default=None,
                   help="smallest scanned neighborhood size (default 2*dim)")
    p.add_argument("--step-size", type=int, default=2,
                   help="neighborhood scan increment")
    p.add_argument("--max-neighbors", type=int, default=None,
                   help="cap on scanned neighborhood sizes")


def _add_common(p):
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: drawn from entropy and printed)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: FLATCLUSTER_THREADS or all cores)")


def build_parser():
    parser = _Parser(prog="flatcluster",
                     description="Clustering data drawn from unions of flats.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark data set")
    p.add_argument("--case", required=True,
                   help="layout like 2x2in4: flat-dim x num-flats in ambient-dim")
    p.add_argument("--n-per-flat", type=int, default=250)
    p.add_argument("--sigma", type=float, default=0.05, help="ambient noise std")
    p.add_argument("--outliers", type=float, default=0.0,
                   help="outlier fraction of the final data set, in [0, 1)")
    p.add_argument("--affine", action="store_true",
                   help="translate flats away from the origin")
    p.add_argument("--min-angle", type=float, default=None,
                   help="minimum pairwise principal angle (radians)")
    p.add_argument("--points-out", default="points.csv")
    p.add_argument("--labels-out", default="labels.txt")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("cluster", help="cluster a points file")
    p.add_argument("--points", required=True)
    p.add_argument("--algo", choices=_ALGOS, required=True)
    p.add_argument("--num-clusters", type=int, required=True)
    _add_scale_flags(p)
    p.add_argument("--candidates", type=int, default=None,
                   help="candidate pool size (default 70*K)")
    p.add_argument("--passes", type=int, default=None,
                   help="exchange passes (default 5*K)")
    p.add_argument("--energy", choices=("l1_sum", "median"), default="l1_sum")
    p.add_argument("--lambdas", default=None,
                   help="comma-separated kernel scales for slbf")
    p.add_argument("--kmeans-restarts", type=int, default=10)
    p.add_argument("--init", choices=("farthest_adaptive", "farthest_fixed", "random"),
                   default="farthest_adaptive", help="kflats initialization")
    p.add_argument("--neighborhood-size", type=int, default=None,
                   help="neighborhood size for kflats farthest_fixed init")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--linear", action="store_true",
                   help="kflats: fit flats through the origin")
    p.add_argument("--labels-out", default="labels_pred.txt")
    _add_common(p)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("evaluate", help="misclassification of predicted labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("estimate-k", help="estimate the number of flats")
    p.add_argument("--points", required=True)
    p.add_argument("--algo", choices=("lbf", "slbf", "kflats"), default="lbf")
    p.add_argument("--k-max", type=int, default=8)
    _add_scale_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_estimate_k)

    p = sub.add_parser("noise", help="estimate the inlier noise level")
    p.add_argument("--points", required=True)
    _add_scale_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_noise)

    p = sub.add_parser("verify-theorem",
                       help="Monte-Carlo check of the flatness-profile claims")
    p.add_argument("--preset",
                   choices=("perpendicular-lines", "orthogonal-axes-3d",
                            "orthogonal-planes-4d"),
                   default="perpendicular-lines")
    p.add_argument("--width", type=float, default=0.02, help="tube half-width")
    p.add_argument("--separation", type=float, default=2.0,
                   help="distance of the query point from the origin")
    p.add_argument("--samples", type=int, default=100_000,
                   help="Monte-Carlo samples per grid radius")
    p.add_argument("--grid-size", type=int, default=60)
    p.add_argument("--profile-out", default=None,
                   help="write the (r, beta2, std_error) profile CSV here")
    _add_common(p)
    p.set_defaults(func=_cmd_verify_theorem)

    p = sub.add_parser("bench", help="error/time table over seeded trials")
    p.add_argument("--case", required=True)
    p.add_argument("--algos", default="lbf,slbf")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--n-per-flat", type=int, default=250)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--affine", action="store_true")
    p.add_argument("--min-angle", type=float, default=None)
    p.add_argument("--energy", choices=("l1_sum", "median"), default="l1_sum")
    p.add_argument("--csv-out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, AssertionError, RuntimeError) as exc:
        print(f"algorithm failure: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())
