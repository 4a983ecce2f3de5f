"""Command-line entry point.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .harness import ExperimentConfig, dumps_record, read_jsonl, run_experiment
from .local import E2, check_claim_inequalities, compute_constants, guard_inequalities, scaled_constants

REPORT_COLUMNS = ["k", "p_connected", "ci_lo", "ci_hi",
                  "mean_small_components", "tv_vs_poisson"]


def _add_common(p: argparse.ArgumentParser, default_mode: str = "global") -> None:
    p.add_argument("--n", type=float, required=True, help="area of the sampling square")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=int, help="single neighbour count")
    group.add_argument("--k-min", type=int, help="sweep lower bound (with --k-max)")
    p.add_argument("--k-max", type=int, help="sweep upper bound")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=E2,
                   help=f"diameter scale constant (default e^2 = {E2:.6f})")
    p.add_argument("--mode", choices=["global", "local"], default=default_mode)
    p.add_argument("--grid-samples", type=int, default=64)
    p.add_argument("--joint-pairs", type=int, default=4096)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: KNN_LAB_THREADS or all cores)")
    p.add_argument("--resume", action="store_true",
                   help="replay a partial record file for the same config")
    p.add_argument("--scaled-m", type=float, default=None)
    p.add_argument("--scaled-n-tiles", type=int, default=None)
    p.add_argument("--scaled-lam1", type=float, default=None)
    p.add_argument("--scaled-lam2", type=float, default=None)


def _k_values(args) -> tuple[int, ...]:
    if args.k is not None:
        return (args.k,)
    if args.k_max is None:
        raise SystemExit("--k-min requires --k-max")
    return tuple(range(args.k_min, args.k_max + 1))


def _config(args, mode: str) -> ExperimentConfig:
    return ExperimentConfig(
        n=args.n, k_values=_k_values(args), trial_count=args.trials,
        base_seed=args.seed, lam=args.lam, mode=getattr(args, "mode", mode) or mode,
        scaled_m=getattr(args, "scaled_m", None),
        scaled_n_tiles=getattr(args, "scaled_n_tiles", None),
        scaled_lam1=getattr(args, "scaled_lam1", None),
        scaled_lam2=getattr(args, "scaled_lam2", None),
        grid_sample_count=args.grid_samples,
        joint_sample_pairs=args.joint_pairs,
    )


def _write_csv_records(path: str, records, k_values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial_id", "seed", "point_count", "k", "connected",
                    "small_components", "longest_edge"])
        for r in records:
            for k in k_values:
                w.writerow([r.trial_id, r.seed, r.point_count, k,
                            int(r.connected_by_k[k]),
                            r.small_component_count_by_k[k],
                            format(r.longest_edge, ".17g")])


def _cmd_simulate(args, mode="global") -> int:
    config = _config(args, mode)
    out = args.out if args.format == "jsonl" else None
    records, summary = run_experiment(config, out_path=out, workers=args.workers,
                                      progress=True, resume=args.resume)
    if args.format == "csv":
        if not args.out:
            raise SystemExit("--format csv requires --out")
        _write_csv_records(args.out, records, config.k_values)
    print(dumps_record(summary))
    return 0


def _cmd_local_events(args) -> int:
    return _cmd_simulate(args, mode="local")


def _cmd_verify_poisson(args) -> int:
    config = _config(args, "global")
    records, summary = run_experiment(config, out_path=args.out,
                                      workers=args.workers, progress=True,
                                      resume=args.resume)
    for k_str, entry in summary["per_k"].items():
        cs = entry.get("chen_stein")
        if cs is None:
            print(f"k={k_str}: no cell samples collected; cannot estimate", file=sys.stderr)
            continue
        print(dumps_record({"k": int(k_str), "chen_stein": cs,
                            "tv_small_count_vs_poisson": entry["tv_small_count_vs_poisson"]}))
    return 0


def _cmd_constants(args) -> int:
    if args.scaled_m is not None or args.scaled_n_tiles is not None:
        bundle = scaled_constants(
            args.n, lam=args.lam,
            M=args.scaled_m if args.scaled_m is not None else 10.0,
            N=args.scaled_n_tiles,
            lam1=args.scaled_lam1, lam2=args.scaled_lam2)
    else:
        bundle = compute_constants(args.lam, args.n)
    g1, g2 = guard_inequalities(bundle.lam1, bundle.lam2, bundle.N)
    out = bundle.to_dict()
    out["guards"] = "PASS" if (g1 and g2) else "FAIL"
    print(dumps_record(out))
    return 0 if (g1 and g2) else 1


def _cmd_claims_check(args) -> int:
    bundle = (compute_constants(args.lam, args.n)
              if args.scaled_m is None and args.scaled_n_tiles is None
              else scaled_constants(args.n, lam=args.lam,
                                    M=args.scaled_m if args.scaled_m is not None else 10.0,
                                    N=args.scaled_n_tiles,
                                    lam1=args.scaled_lam1, lam2=args.scaled_lam2))
    report = check_claim_inequalities(args.samples, args.seed, bundle)
    print(dumps_record({
        "claim1_samples": report.claim1_samples,
        "claim1_counterexamples": report.claim1_counterexamples,
        "claim2_samples": report.claim2_samples,
        "claim2_counterexamples": report.claim2_counterexamples,
        "passed": report.passed,
    }))
    return 0 if report.passed else 1


def _cmd_report(args) -> int:
    _, _, summary = read_jsonl(args.input)
    if summary is None:
        raise SystemExit("record file has no summary marker (incomplete run?)")
    sink = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(sink)
        w.writerow(REPORT_COLUMNS)
        for k_str in sorted(summary["per_k"], key=int):
            entry = summary["per_k"][k_str]
            tv = entry.get("tv_small_count_vs_poisson")
            w.writerow([
                k_str,
                format(entry["p_connected"], ".17g"),
                format(entry["p_connected_ci"][0], ".17g"),
                format(entry["p_connected_ci"][1], ".17g"),
                format(entry["mean_small_components"], ".17g"),
                "nan" if tv is None else format(tv, ".17g"),
            ])
    finally:
        if args.out:
            sink.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knnlab",
        description="Monte Carlo laboratory for k-nearest-neighbour random geometric graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a global experiment at one or more k")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep-k", help="run a global experiment over a k range")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("local-events", help="sample the local box and tally its events")
    _add_common(p, default_mode="local")
    p.set_defaults(func=_cmd_local_events)

    p = sub.add_parser("verify-poisson",
                       help="run a global experiment and emit the Poisson-approximation report")
    _add_common(p)
    p.set_defaults(func=_cmd_verify_poisson)

    p = sub.add_parser("constants", help="print the derived constants and verify guards")
    p.add_argument("--lambda", dest="lam", type=float, default=E2)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--scaled-m", type=float, default=None)
    p.add_argument("--scaled-n-tiles", type=int, default=None)
    p.add_argument("--scaled-lam1", type=float, default=None)
    p.add_argument("--scaled-lam2", type=float, default=None)
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("claims-check", help="sample the geometric claim configurations")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=E2)
    p.add_argument("--n", type=float, default=1e6)
    p.add_argument("--scaled-m", type=float, default=None)
    p.add_argument("--scaled-n-tiles", type=int, default=None)
    p.add_argument("--scaled-lam1", type=float, default=None)
    p.add_argument("--scaled-lam2", type=float, default=None)
    p.set_defaults(func=_cmd_claims_check)

    p = sub.add_parser("report", help="aggregate a record file into plotting CSV")
    p.add_argument("--in", dest="input", type=str, required=True)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
