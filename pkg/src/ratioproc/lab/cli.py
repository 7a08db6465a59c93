"""Command-line interface.

Subcommands: bound, expect, simulate, rates, margin, erm, oracle, verify.
Flags mirror the StudySpec fields; ``--config`` loads a key=value config
file instead.  Exit code 0 iff all checks pass (verify) or the run
completed.
"""

from __future__ import annotations

import argparse
import json
import sys

from .. import expect as expect_mod
from .. import classes as fcm
from .. import peel
from .config import ConfigError, StudySpec, emit_config, parse_config
from .io import rows_to_csv, rows_to_json, write_gnuplot
from .studies import fit_slope, run_study, stability_check


def _add_study_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="config file (overrides the other flags)")
    p.add_argument("--class", dest="clazz", default="halfline",
                   help="class kind: halfline|boxcdf|intervals|coordc0")
    p.add_argument("--n", type=int, nargs="+", default=[1000])
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--alpha", type=float, default=1.0, help="weight exponent phi(t) = t^alpha")
    p.add_argument("--rule", default="eicker", help="range rule (eicker|box-rate|c0-ratio|fixed)")
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-plot", default=None, help="gnuplot two-column (n, median) data file")


def _spec_from_args(args, kind: str) -> StudySpec:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    rng: dict = {"rule": args.rule}
    if args.rule == "fixed":
        rng.update({"r": args.r, "delta": args.delta, "r_t": args.r, "delta_t": args.delta})
    return StudySpec(kind=kind, n_grid=tuple(args.n), reps=args.reps, seed=args.seed,
                     workers=args.workers, clazz={"kind": args.clazz},
                     weight={"alpha": args.alpha}, range=rng)


def _emit(result, spec, args):
    csv_text = rows_to_csv(result.rows)
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.out_json:
        with open(args.out_json, "w", encoding="utf-8") as fh:
            fh.write(rows_to_json(result.rows, emit_config(spec)))
    if args.out_plot:
        pairs = [(row["n"], row["value"]) for row in result.rows
                 if row.get("rep") == "summary" and row.get("statistic") == "q50"]
        write_gnuplot(args.out_plot, [p[0] for p in pairs], [p[1] for p in pairs])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ratioproc",
                                     description="ratio-type empirical process studies")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="replicated supremum study")
    _add_study_flags(p_sim)

    p_rates = sub.add_parser("rates", help="scaling study with slope and stability diagnostics")
    _add_study_flags(p_rates)
    p_rates.add_argument("--band", type=float, default=1.5)

    p_margin = sub.add_parser("margin", help="margin-ratio study")
    _add_study_flags(p_margin)

    p_erm = sub.add_parser("erm", help="ERM excess study")
    _add_study_flags(p_erm)
    p_erm.add_argument("--problem", default="finite-dim-ls",
                       choices=["finite-dim-ls", "isotonic", "margin-classification"])
    p_erm.add_argument("--h", type=float, default=0.1)

    p_bound = sub.add_parser("bound", help="evaluate a ratio bound certificate")
    p_bound.add_argument("--op", default="ratio-t2", choices=["ratio-t2", "ratio-t1", "ratio-talpha"])
    p_bound.add_argument("--n", type=int, required=True)
    p_bound.add_argument("--r", type=float, required=True)
    p_bound.add_argument("--delta", type=float, default=0.5)
    p_bound.add_argument("--q", type=float, default=2.0)
    p_bound.add_argument("--beta", type=float, default=0.0)
    p_bound.add_argument("--s", type=float, default=4.0)
    p_bound.add_argument("--t", type=float, default=4.0)
    p_bound.add_argument("--weight-alpha", type=float, default=1.5)
    p_bound.add_argument("--mode", default="shape", choices=["shape", "explicit"])

    p_expect = sub.add_parser("expect", help="expectation bounds for a query")
    p_expect.add_argument("--n", type=int, required=True)
    p_expect.add_argument("--sigma", type=float, required=True)
    p_expect.add_argument("--env-norm", type=float, default=1.0)
    p_expect.add_argument("--entropy", default="vc", choices=["vc", "regvar"])
    p_expect.add_argument("--A", type=float, default=2.718281828459045)
    p_expect.add_argument("--v", type=float, default=1.0)
    p_expect.add_argument("--exponent", type=float, default=1.0)
    p_expect.add_argument("--mode", default="shape", choices=["shape", "explicit"])

    p_oracle = sub.add_parser("oracle", help="exact small-instance distribution")
    p_oracle.add_argument("--probs", type=float, nargs="+", required=True)
    p_oracle.add_argument("--n", type=int, required=True)
    p_oracle.add_argument("--dict", type=str, required=True,
                          help="semicolon-separated member rows, e.g. '1,0;0,1'")
    p_oracle.add_argument("--statistic", default="sup_abs", choices=["sup_abs", "sup_ratio"])
    p_oracle.add_argument("--seed", type=int, default=20240601)

    p_verify = sub.add_parser("verify", help="run the acceptance suite")
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument("--only", nargs="*", default=None,
                          help="criterion numbers to run (default: all)")

    args = parser.parse_args(argv)

    try:
        if args.command in ("simulate", "rates"):
            spec = _spec_from_args(args, "ratio-scaling")
            result = run_study(spec)
            _emit(result, spec, args)
            if args.command == "rates":
                try:
                    slope = fit_slope(result.rows, "n", "q50")
                    print(f"# slope(log median vs log n) = {slope.slope:.4f}", file=sys.stderr)
                except ValueError as exc:
                    print(f"# slope unavailable: {exc}", file=sys.stderr)
            return 0
        if args.command == "margin":
            spec = _spec_from_args(args, "margin")
            result = run_study(spec)
            _emit(result, spec, args)
            return 0
        if args.command == "erm":
            spec = _spec_from_args(args, "erm")
            spec.problem = {"kind": args.problem, "h": args.h}
            result = run_study(spec)
            _emit(result, spec, args)
            return 0
        if args.command == "bound":
            if args.op == "ratio-t2":
                upper, lower = peel.ratio_bound_t2(args.n, args.r, args.delta, args.q, args.beta,
                                                   args.s, mode=args.mode)
                out = {"upper": vars(upper)}
                if lower is not None:
                    out["lower"] = vars(lower)
            elif args.op == "ratio-t1":
                out = {"report": vars(peel.ratio_bound_t1(args.n, args.r, args.delta, args.q,
                                                          args.beta, args.s, args.t))}
            else:
                out = {"report": vars(peel.ratio_bound_talpha(args.n, args.r, args.delta, args.q,
                                                              args.beta, args.s, args.weight_alpha))}
            print(json.dumps(out, indent=1, default=str))
            return 0
        if args.command == "expect":
            model = (fcm.vc_type(args.A, args.v) if args.entropy == "vc"
                     else fcm.reg_varying(args.exponent, args.A))
            query = expect_mod.ExpectationQuery(n=args.n, sigma=args.sigma,
                                                env_norm=args.env_norm, model=model,
                                                mode=args.mode)
            rep = expect_mod.expectation_upper(query)
            print(json.dumps({"value": rep.value, "regime": rep.regime,
                              "constants": rep.constants_used}, indent=1, default=str))
            return 0
        if args.command == "oracle":
            rows = tuple(tuple(float(v) for v in part.split(",")) for part in args.dict.split(";"))
            spec = StudySpec(kind="oracle", n_grid=(args.n,), reps=1, seed=args.seed,
                             problem={"probs": tuple(args.probs), "dict": rows,
                                      "statistic": args.statistic})
            result = run_study(spec)
            sys.stdout.write(rows_to_csv(result.rows))
            return 0
        if args.command == "verify":
            from .acceptance import run_acceptance

            results = run_acceptance(workers=args.workers, only=args.only)
            return 0 if all(r.passed for r in results) else 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
