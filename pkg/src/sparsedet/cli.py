"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import divergence as dv
from .detectors import calibrate_cov_scan_threshold
from .errors import InvalidInputError, SparseDetError
from .experiment import (ConfigError, ExperimentConfig, emit_phase_csv, emit_phase_plot,
                         format_phase_csv, resolve_threads, run_experiment, write_metadata)
from .matrix import read_matrix
from .priors import SignalSpec
from .scan import ScanConfig
from .witness import find_witness

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="base seed (overrides config)")
    parser.add_argument("--threads", type=int, default=default,
                        help="worker threads (default: $SPARSEDET_THREADS or 1)")
    parser.add_argument("--out", default=default, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsedet", description="Sparse matrix detection experiments.")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help):
        sp = sub.add_parser(name, help=help, description=help)
        _global_flags(sp, suppress=True)
        return sp

    sp = add("simulate", "run a Monte Carlo sweep from a TOML config")
    sp.add_argument("config")

    sp = add("boundary", "tabulate lambda0, lambda1 and beta*")
    sp.add_argument("--p", type=int, nargs="+", required=True)
    sp.add_argument("--k", type=int, nargs="+", required=True)
    sp.add_argument("--literal", action="store_true",
                    help="drop the e inside the lambda0 logarithm (may clamp at 0)")
    sp.add_argument("--no-cap", action="store_true", help="do not cap lambda0 at lambda1")
    sp.add_argument("--plot", help="also write the phase-diagram overlay to this SVG")

    sp = add("witness", "find a small submatrix carrying 1/8 of the spectral norm")
    sp.add_argument("--in", dest="infile", required=True, help="matrix in the text fixture format")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--c-w", type=float, default=8.0)
    sp.add_argument("--restarts", type=int, default=10)

    sp = add("divergence", "evaluate a chi-square / MGF calculator")
    sp.add_argument("op", choices=["mgf-gh", "mgf-h", "chi2-exact", "chi2-mc", "cs-bound", "s-star",
                                   "tv", "permutation", "cov-pair"])
    sp.add_argument("--p", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--t", type=float, help="amplitude (or MGF argument for mgf-gh)")
    sp.add_argument("--lam", type=float)
    sp.add_argument("--s", type=float, nargs="+", help="one value or a sweep grid (cs-bound)")
    sp.add_argument("--c", type=float, default=0.05)
    sp.add_argument("--chi2", type=float)
    sp.add_argument("--reps", type=int, default=100_000)
    sp.add_argument("--n", type=int)
    sp.add_argument("--T", dest="T", help="matrix file")
    sp.add_argument("--T-tilde", dest="T_tilde", help="matrix file")

    sp = add("calibrate", "calibrate the covariance scan threshold under Sigma = I")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--reps", type=int, default=200)
    sp.add_argument("--restarts", type=int, default=20)
    return ap


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise InvalidInputError(f"{args.op} needs --{', --'.join(missing)}")


def _json_value(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def cmd_simulate(args):
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    threads = resolve_threads(args.threads)
    table = run_experiment(cfg, threads)
    out = args.out or cfg.csv_path
    if out:
        emit_phase_csv(table, out)
        write_metadata(cfg, f"{out}.meta.json")
    else:
        sys.stdout.write(format_phase_csv(table))
    if cfg.plot_path:
        emit_phase_plot(table, cfg.plot_path)


def cmd_boundary(args):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "k", "alpha", "lambda0", "lambda1", "lambda0_clamped", "lambda0_capped", "beta_star"])
    for p in args.p:
        for k in args.k:
            b = dv.boundary_curves(p, k, with_e=not args.literal, cap=not args.no_cap)
            alpha = math.log(k) / math.log(p)
            w.writerow([p, k, format(alpha, ".17g"), format(b.lambda0, ".17g"),
                        format(b.lambda1, ".17g"), int(b.clamped), int(b.capped),
                        format(dv.beta_star(alpha), ".17g")])
    _emit(buf.getvalue(), args.out)
    if args.plot:
        emit_phase_plot(None, args.plot)


def cmd_witness(args):
    try:
        M = read_matrix(args.infile)
    except FileNotFoundError:
        raise InvalidInputError(f"{args.infile}: matrix file not found") from None
    rep = find_witness(M, args.k, args.c_w, args.restarts, 0 if args.seed is None else args.seed)
    _emit(rep.to_json() + "\n", args.out)


def cmd_divergence(args):
    seed = 0 if args.seed is None else args.seed
    op = args.op
    if op == "cs-bound" and args.s and len(args.s) > 1:
        _need(args, "p", "m", "k")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "k", "m", "s", "value", "method", "se"])
        for s in args.s:
            v = dv.chi2_upper_bound_cs(args.p, args.m, args.k, s)
            w.writerow([args.p, args.k, args.m, format(s, ".17g"), format(v, ".17g"), "exact_enumeration", 0])
        _emit(buf.getvalue(), args.out)
        return
    if op == "mgf-gh":
        _need(args, "p", "m", "t")
        rec = {"value": dv.mgf_gh_exact(args.p, args.m, args.t)}
    elif op == "mgf-h":
        _need(args, "p", "m", "lam")
        rec = {"value": dv.mgf_h_exact(args.p, args.m, args.lam)}
    elif op == "chi2-exact":
        _need(args, "p", "m", "k", "t")
        rec = vars(dv.chi2_prior_exact(args.p, args.m, args.k, args.t))
    elif op == "chi2-mc":
        _need(args, "p", "m", "k", "t")
        spec = SignalSpec("least_favorable", args.p, {"m": args.m, "k": args.k, "t": args.t})
        rec = vars(dv.chi2_gaussian_mixture_mc(spec, args.reps, seed))
    elif op == "cs-bound":
        _need(args, "p", "m", "k", "s")
        rec = {"value": dv.chi2_upper_bound_cs(args.p, args.m, args.k, args.s[0])}
    elif op == "s-star":
        _need(args, "p", "k")
        s, m = dv.optimize_s_star(args.p, args.k, range(args.k, args.p + 1), args.c)
        rec = {"s_star": s, "m_star": m}
    elif op == "tv":
        _need(args, "chi2")
        rec = {"value": dv.tv_upper_from_chi2(args.chi2)}
    elif op == "permutation":
        _need(args, "p")
        rec = vars(dv.permutation_mgf(args.p, args.reps, seed))
    else:
        _need(args, "T", "T_tilde", "n")
        det, sur = dv.cov_chi2_pair_term(read_matrix(args.T), read_matrix(args.T_tilde), args.n)
        rec = {"value": det, "surrogate": sur}
    rec = {"op": op, **{key: _json_value(v) for key, v in rec.items()}}
    _emit(json.dumps(rec) + "\n", args.out)


def cmd_calibrate(args):
    cfg = ScanConfig(args.m, restarts=args.restarts, principal_only=True)
    t = calibrate_cov_scan_threshold(args.p, args.n, args.m, args.epsilon, args.reps, cfg,
                                     0 if args.seed is None else args.seed)
    rec = {"p": args.p, "n": args.n, "m": args.m, "epsilon": args.epsilon, "reps": args.reps, "t_cov": t}
    _emit(json.dumps(rec) + "\n", args.out)


COMMANDS = {"simulate": cmd_simulate, "boundary": cmd_boundary, "witness": cmd_witness,
            "divergence": cmd_divergence, "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        COMMANDS[args.command](args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"sparsedet {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SparseDetError, OSError, ArithmeticError) as exc:
        print(f"sparsedet {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
