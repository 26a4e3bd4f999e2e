"""Command-line interface.

Every command is a thin shell over library calls: files in, library out,
files/stdout back. Exit codes: 0 success, 2 invalid input (files, flags,
dimensions, metric domain), 3 solver diverged, 4 bandwidth tuning failed,
1 unexpected internal error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import baselines, experiment, fileio, metrics, solvers, synth
from .core import (
    SolverConfig,
    Termination,
    TuningFailed,
    UnmixError,
    linear_mix,
    validate_problem,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_DIVERGED = 3
EXIT_TUNING = 4

_ALGORITHM_COMMANDS = ("ls", "fcls", "sunsal-sparse", "cusal-fc", "cusal-sp")


def _add_generate(sub):
    p = sub.add_parser("generate", help="write a synthetic cube (Y, M, X_true, truth meta)")
    p.add_argument("--model", choices=("lmm", "ppnmm"), default="lmm")
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--snr", default="inf", help="SNR in dB, or 'inf' for noiseless")
    p.add_argument("--corrupt", type=int, default=0, help="number of corrupted bands")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=None, help="nonzeros per pixel (sparse abundances)")
    p.add_argument("--b-range", default="-3,3", help="ppnmm coefficient interval 'lo,hi'")
    p.add_argument("--min-angle", type=float, default=10.0, help="pairwise endmember angle (deg)")
    p.add_argument("--endmember-seed", type=int, default=0)
    p.add_argument("--endmembers", default=None, help="matrix file to use instead of synthesis")
    p.add_argument("--out-dir", default=".")


def _add_algorithms(sub):
    for name in _ALGORITHM_COMMANDS:
        p = sub.add_parser(name, help=f"unmix with {name}")
        p.add_argument("observations", help="matrix file with Y (bands x pixels)")
        p.add_argument("endmembers", help="matrix file with M (bands x endmembers)")
        p.add_argument("--out", default="X_hat.txt", help="output abundance file")
        p.add_argument("--report-path", default=None, help="write per-iteration diagnostics TSV")
        if name in ("sunsal-sparse", "cusal-sp"):
            p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="l1 weight (default 0)")
        if name in ("cusal-fc", "cusal-sp"):
            p.add_argument("--sigma", type=float, default=None, help="kernel bandwidth")
            p.add_argument(
                "--sigma-auto",
                action="store_true",
                help="search the bandwidth: start at sqrt(R/8L)*||Y - M X_ls||_F (floored to "
                "1e-6*max(1, ||Y||_F/sqrt(LT))), grow by 1.2, divide the start by p after "
                "divergence beyond 1000x, accept at reconstruction ratio < 2, give up after 60 attempts",
            )
            p.add_argument("--rho", type=float, default=1.0, help="ADMM penalty (default 1)")
            p.add_argument(
                "--eta",
                type=float,
                default=None,
                help="inner step (default 1/(||A||_2^2/sigma^2 + coupling curvature))",
            )
            p.add_argument(
                "--max-iters", type=int, default=1000, help="outer iteration cap (default 1000)"
            )
            p.add_argument(
                "--max-inner-iters",
                type=int,
                default=50,
                help="gradient steps per x-update (default 50; inner tolerance 1e-6 relative)",
            )


def _add_eval(sub):
    p = sub.add_parser("eval", help="print '<metric>\\t<value>' for a truth/estimate pair")
    p.add_argument("metric", choices=("rmse", "sre", "sad"))
    p.add_argument("truth", help="reference matrix file")
    p.add_argument("estimate", help="estimate matrix file")
    p.add_argument("--exclude", default="", help="1-based band ranges to drop (sad), e.g. 1-3,105-115")
    p.add_argument("--degrees", action="store_true", help="report sad in degrees")
    p.add_argument(
        "--reconstruct-with",
        default=None,
        help="endmember matrix file; treats the estimate file as abundances and compares M @ X",
    )
    p.add_argument("--append", default=None, help="TSV file to append a result row to")
    p.add_argument("--algorithm", default="", help="row label used with --append")
    p.add_argument("--n-corrupt", default="", help="row label used with --append")
    p.add_argument("--seed", default="", help="row label used with --append")


def _add_experiment(sub):
    p = sub.add_parser("experiment", help="run a Monte-Carlo grid from a config file")
    p.add_argument("config", help="flat key = value experiment file")
    p.add_argument("--out", default=None, help="TSV output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unmix",
        description="Robust hyperspectral abundance estimation (correntropy ADMM solvers, "
        "quadratic baselines, synthetic data, metrics).",
        epilog="Solver defaults: rho=1, eta=0.1*sigma^2/||M||_F^2, inner tolerance 1e-6, "
        "50 inner and 1000 outer iterations, residual thresholds sqrt(R*T)*1e-5. "
        "Exit codes: 0 ok, 2 input error, 3 diverged, 4 tuning failed.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_algorithms(sub)
    _add_eval(sub)
    _add_experiment(sub)
    return parser


def _parse_snr(text: str) -> float:
    if text.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return float(text)


def cmd_generate(args) -> int:
    lo, hi = (float(v) for v in args.b_range.split(","))
    if args.endmembers is not None:
        M = fileio.read_matrix(args.endmembers)
    else:
        M = synth.gen_endmembers(
            args.R, args.L, seed=args.endmember_seed, min_angle_deg=args.min_angle
        ).data
    spec = synth.SyntheticSpec(
        model=args.model,
        R=args.R,
        L=args.L,
        T=args.T,
        snr_db=_parse_snr(args.snr),
        n_corrupt=args.corrupt,
        sparsity_K=args.K,
        seed=args.seed,
        b_range=(lo, hi),
    )
    Y, truth = synth.gen_cube(M, spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_matrix(out / "Y.txt", Y)
    fileio.write_matrix(out / "M.txt", M)
    fileio.write_matrix(out / "X_true.txt", truth.X_true)
    fileio.write_truth_meta(out / "truth_meta.txt", truth, spec)
    print(f"wrote Y.txt M.txt X_true.txt truth_meta.txt in {out}")
    return EXIT_OK


def _write_report(path, report, handle=None, X=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# termination_reason {report.termination_reason.value}\n")
        fh.write(f"# iterations_run {report.iterations_run}\n")
        if report.sigma_used is not None:
            fh.write(f"# sigma_used {fileio.format_float(report.sigma_used)}\n")
        if handle is not None and X is not None:
            ratio = solvers.reconstruction_ratio(handle, X)
            fh.write(f"# reconstruction_ratio {fileio.format_float(ratio)}\n")
        fh.write("iteration\tprimal_residual\tdual_residual\tobjective\n")
        for i in range(report.iterations_run):
            fh.write(
                f"{i + 1}\t{fileio.format_float(report.primal_residuals[i])}"
                f"\t{fileio.format_float(report.dual_residuals[i])}"
                f"\t{fileio.format_float(report.objective_trace[i])}\n"
            )


def cmd_unmix(args) -> int:
    Y = fileio.read_matrix(args.observations)
    M = fileio.read_matrix(args.endmembers)
    handle = validate_problem(Y, M)
    report = None
    if args.command == "ls":
        X = baselines.solve_ls(handle)
    elif args.command == "fcls":
        X = baselines.solve_fcls(handle)
    elif args.command == "sunsal-sparse":
        X = baselines.solve_sunsal_sparse(handle, args.lam)
    else:
        config = SolverConfig(
            sigma=args.sigma,
            rho=args.rho,
            eta=args.eta,
            lam=getattr(args, "lam", 0.0),
            max_outer_iters=args.max_iters,
            max_inner_iters=args.max_inner_iters,
            sigma_auto=args.sigma_auto,
        )
        solve = solvers.cusal_fc if args.command == "cusal-fc" else solvers.cusal_sp
        X, report = solve(handle, config)
    fileio.write_matrix(args.out, X)
    if args.report_path is not None:
        if report is not None:
            _write_report(args.report_path, report, handle, X)
        else:
            with open(args.report_path, "w", encoding="utf-8") as fh:
                fh.write(f"# termination_reason direct\n# iterations_run 0\n")
                fh.write("iteration\tprimal_residual\tdual_residual\tobjective\n")
    if report is not None and report.termination_reason == Termination.PRIMAL_INCREASED:
        print("warning: solver terminated on a primal residual increase", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = fileio.read_matrix(args.truth)
    estimate = fileio.read_matrix(args.estimate)
    if args.reconstruct_with is not None:
        M = fileio.read_matrix(args.reconstruct_with)
        estimate = linear_mix(M, estimate)
    if args.metric == "rmse":
        name, value = "RMSE", metrics.rmse(truth, estimate)
    elif args.metric == "sre":
        name, value = "SRE_dB", metrics.sre_db(truth, estimate)
    else:
        exclude = fileio.parse_band_ranges(args.exclude) if args.exclude else []
        value = metrics.sad(truth, estimate, exclude_bands=exclude)
        name = "SAD_rad"
        if args.degrees:
            name, value = "SAD_deg", math.degrees(value)
    print(f"{name}\t{fileio.format_float(value)}")
    if args.append is not None:
        new = not os.path.exists(args.append)
        with open(args.append, "a", encoding="utf-8") as fh:
            if new:
                fh.write("algorithm\tn_corrupt\tseed\tvalue\n")
            fh.write(
                f"{args.algorithm}\t{args.n_corrupt}\t{args.seed}\t{fileio.format_float(value)}\n"
            )
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = fileio.parse_experiment_config(args.config)
    max_workers = int(os.environ.get("UNMIX_THREADS", "1"))
    if max_workers < 1:
        raise fileio.ParseError(f"UNMIX_THREADS must be >= 1, got {max_workers}")
    rows = experiment.run_experiment(config, max_workers=max_workers)
    text = experiment.rows_to_tsv(rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def _join_negative_values(argv):
    """Fold values that start with '-' into '--flag=value' form so argparse
    accepts e.g. `--b-range -3,3`."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--b-range", "--exclude"):
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            else:
                out.append(f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(_join_negative_values([str(a) for a in argv]))
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command in _ALGORITHM_COMMANDS:
            return cmd_unmix(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "experiment":
            return cmd_experiment(args)
        parser.error(f"unknown command {args.command!r}")
    except TuningFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TUNING
    except (UnmixError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_INTERNAL


def entry_point() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry_point()
