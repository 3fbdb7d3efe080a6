"""Command-line entry point: ``simdegree gen | analyze | finite | verify | sweep``.

Exit codes: 0 success, 2 parameter/domain error, 3 no transition for the
requested (k, q, d), 4 verification failure, 5 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import oracle
from .errors import ParameterError, RegimeError, SimDegreeError
from .exact_finite import (
    avg_similarity_finite,
    concentration_mass,
    expected_sat_pairs,
    fmt,
    profile_to_csv,
    second_moment_finite,
    LogValue,
    PairCountProfile,
)
from .model_gb import ModelParams, generate

EXIT_OK = 0
EXIT_PARAM = 2
EXIT_REGIME = 3
EXIT_VERIFY = 4
EXIT_BUDGET = 5


def _round(x):
    if isinstance(x, float) and math.isfinite(x):
        return float(fmt(x))
    return x


def _dumps(doc: dict) -> str:
    return json.dumps({k: _round(v) for k, v in doc.items()})


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text}") from exc


def _model_params(args) -> ModelParams:
    if getattr(args, "ksat", False):
        args.d, args.q = 2, 1
    missing = [f"--{x}" for x in ("n", "d", "k", "q", "t") if getattr(args, x) is None]
    if missing:
        raise ParameterError("missing required option(s): " + ", ".join(missing))
    return ModelParams(n=args.n, d=args.d, k=args.k, q=args.q, t=args.t)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--ksat", action="store_true", help="random k-SAT: sets d=2, q=1")


# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    params = _model_params(args)
    if args.seed is None:
        raise ParameterError("missing required option: --seed")
    inst = generate(params, args.seed)
    if args.output or not args.dimacs:
        _write(args.output, inst.to_json(indent=None) + "\n")
    if args.dimacs:
        _write(args.dimacs, inst.to_dimacs())
    where = args.output or "stdout"
    print(
        f"generated {params.t} constraints (n={params.n} d={params.d} k={params.k} "
        f"q={params.q} r={fmt(params.r)} seed={args.seed}) -> {where}",
        file=sys.stderr if not args.output and not args.dimacs else sys.stdout,
    )
    return EXIT_OK


def _portrait(args) -> asy.PhasePortrait:
    for x in ("k", "q", "d"):
        if getattr(args, x) is None:
            raise ParameterError(f"missing required option: --{x}")
    return asy.find_r_cr(asy.AnalyticContext(k=args.k, q=args.q, d=args.d))


def _r_grid(args, portrait: asy.PhasePortrait) -> np.ndarray:
    r_min = args.r_min if args.r_min is not None else portrait.r_cr / 2
    r_max = args.r_max if args.r_max is not None else min(1.5 * portrait.r_cr, portrait.r_cap)
    if not 0 < r_min < r_max:
        raise ParameterError(f"r grid needs 0 < r-min < r-max (got {r_min}, {r_max})")
    if args.r_steps < 1:
        raise ParameterError("r-steps must be >= 1")
    grid = np.linspace(r_min, r_max, args.r_steps)
    if args.threshold_rows and r_min <= portrait.r_cr <= r_max:
        grid = np.union1d(grid, [portrait.r_cr])
    return grid


def curve_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "s_av_inf", "branch", "d_av_inf"])
    for row in rows:
        w.writerow([fmt(row["r"]), fmt(row["s_av_inf"]), row["branch"], fmt(row["d_av_inf"])])
    return buf.getvalue()


def cmd_analyze(args) -> int:
    portrait = _portrait(args)
    doc = _dumps(portrait.to_dict()) + "\n"
    _write(args.output, doc)
    if args.curve:
        rows = asy.s_av_curve(portrait, _r_grid(args, portrait))
        _write(args.curve, curve_to_csv(rows))
    if args.output:
        print(f"r_cr={fmt(portrait.r_cr)} k={args.k} q={args.q} d={args.d}")
    return EXIT_OK


def _parse_mass(text: str) -> tuple[float, float]:
    try:
        c, e = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise ParameterError(f"--mass expects CENTER,EPS (got {text!r})") from exc
    return c, e


def cmd_finite(args) -> int:
    params = _model_params(args)
    profile = expected_sat_pairs(params)
    footer = [
        f"s_av={fmt(avg_similarity_finite(profile))}",
        f"log_E_N2={fmt(second_moment_finite(profile).log)}",
    ]
    for text in args.mass or []:
        c, e = _parse_mass(text)
        footer.append(f"mass({fmt(c)},{fmt(e)})={fmt(concentration_mass(profile, c, e))}")
    _write(args.output, profile_to_csv(profile) + "\n".join(footer) + "\n")
    if args.output:
        print("\n".join(footer))
    return EXIT_OK


def _corrupted(profile: PairCountProfile, factor: float) -> PairCountProfile:
    shift = math.log(factor)
    return PairCountProfile(
        profile.params,
        tuple(v if v.is_zero else LogValue(v.log + shift) for v in profile.log_counts),
    )


def cmd_verify(args) -> int:
    params = _model_params(args)
    mode = oracle.Mode.parse(args.mode)
    profile = expected_sat_pairs(params)
    if args.corrupt:
        profile = _corrupted(profile, args.corrupt)

    def run(seed):
        est = oracle.ensemble_expected_counts(
            params, mode, budget=args.budget, samples=args.samples, seed=seed,
            workers=args.workers,
        )
        rows = oracle.compare(est, profile)
        return est, rows, oracle.comparison_passes(rows, mode, args.rel_tol, args.z_max)

    est, rows, ok = run(args.seed)
    attempts = 1
    if not ok and mode is oracle.Mode.MONTE_CARLO and args.rerun:
        est, rows, ok = run(args.seed + args.samples)
        attempts = 2

    print(f"mode={mode.value} instances={est.instances_sampled} attempts={attempts}")
    print("S,exact,mean,std_err,rel_err,z")
    for r in rows:
        print(",".join([str(r.S), fmt(r.exact), fmt(r.mean), fmt(r.std_err), fmt(r.rel_err), fmt(r.z)]))
    if args.output:
        _write(args.output, est.to_csv())
    if args.manifest:
        _write(args.manifest, est.manifest_json() + "\n")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(args) -> int:
    lines = []
    for k in args.k:
        for q in args.q:
            for d in args.d:
                try:
                    ctx = asy.AnalyticContext(k=k, q=q, d=d)
                    doc = {"regime": "two_roots", **asy.find_r_cr(ctx).to_dict()}
                except RegimeError as exc:
                    doc = {"k": k, "q": q, "d": d, "regime": "no_transition",
                           "r_prime_s02": exc.r_prime_at_s02}
                except ParameterError as exc:
                    doc = {"k": k, "q": q, "d": d, "error": str(exc)}
                lines.append(_dumps(doc))
    _write(args.output, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simdegree", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys mirror the long flags")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("gen", help="generate a Model GB instance")
    _add_model_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--dimacs", help="also write DIMACS CNF (k-SAT only)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", help="phase portrait and limiting similarity curve")
    p.add_argument("--k", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("-o", "--output", help="portrait JSON (default stdout)")
    p.add_argument("--curve", help="write the r, s_av_inf, branch, d_av_inf CSV here")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--r-steps", type=int, default=201)
    p.add_argument("--threshold-rows", action=argparse.BooleanOptionalAction, default=True,
                   help="insert r_cr into the grid")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("finite", help="exact finite-n profile, s_av and E(N^2)")
    _add_model_flags(p)
    p.add_argument("-o", "--output")
    p.add_argument("--mass", action="append", metavar="CENTER,EPS",
                   help="report the concentration mass of a window (repeatable)")
    p.set_defaults(func=cmd_finite)

    p = sub.add_parser("verify", help="compare the closed form with the brute-force oracle")
    _add_model_flags(p)
    p.add_argument("--mode", default="exhaustive", choices=["exhaustive", "mc",
                   "exhaustive_ensemble", "monte_carlo"])
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_ENSEMBLE_BUDGET)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--z-max", type=float, default=3.0)
    p.add_argument("--rerun", action=argparse.BooleanOptionalAction, default=True,
                   help="retry a failed Monte Carlo check once with fresh seeds")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output", help="estimate CSV")
    p.add_argument("--manifest", help="run manifest JSON")
    p.add_argument("--corrupt", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="analyze over lists of k, q, d (JSON lines)")
    p.add_argument("--k", type=_int_list, required=False, default=[5])
    p.add_argument("--q", type=_int_list, required=False, default=[1])
    p.add_argument("--d", type=_int_list, required=False, default=[2])
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
        subparser = parser.subcommands[args.command]
        config = {k.replace("-", "_"): v for k, v in config.items()}
        for key in ("k", "q", "d"):
            if args.command == "sweep" and isinstance(config.get(key), list):
                config[key] = [int(x) for x in config[key]]
        subparser.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except RegimeError as exc:
        print(f"regime: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except SimDegreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
