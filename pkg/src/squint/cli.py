"""Command-line entry point: run / verify / bound."""

from __future__ import annotations

import argparse
import sys

from .harness import ExperimentConfig, run_experiment, write_report, write_trace
from .metrics import regret_bound


def _load_config(args):
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = int(args.seed)
    return config


def _print_summary(result):
    report = result.report
    print(f"rounds={result.config.horizon} n_experts={result.config.n_experts} "
          f"seed={result.config.seed} algorithm={result.config.algorithm['name']}")
    print(f"learner_total={report['learner_total']:.6f}")
    audit = report["audit"]
    if audit is not None:
        status = "pass" if audit["pass"] else "FAIL"
        print(f"potential audit: {status} "
              f"(max_step_delta={audit['max_step_delta']:.3e}, "
              f"max_potential={audit['max_potential']:.3e})")
    rows = report["regret_table"]
    if rows:
        bad = [r for r in rows if not r["pass"]]
        print(f"bound checks: {len(rows) - len(bad)}/{len(rows)} pass")
        for r in bad:
            print(f"  FAIL eps={r['epsilon']:.4f} regret={r['regret']:.4f} "
                  f"bound={r['bound']:.4f}")
    if report["max_root_residual"] is not None:
        print(f"max root residual: {report['max_root_residual']:.3e}")
    print(f"checks_pass={report['checks_pass']}")
    print(f"wall_clock_seconds={result.wall_clock:.3f}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="squint",
        description="Expert-advice experiments with potential-based learners")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", required=True, help="JSON config file")
    p_run.add_argument("--trace", help="write the round-by-round CSV here")
    p_run.add_argument("--report", help="write the JSON report here")
    p_run.add_argument("--seed", type=int, help="override the config seed")

    p_verify = sub.add_parser(
        "verify", help="run and exit nonzero on any failed check")
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--seed", type=int)

    p_bound = sub.add_parser("bound", help="print the quantile-regret bound")
    p_bound.add_argument("--vt", type=float, required=True,
                         help="accumulated variance V_T")
    p_bound.add_argument("--t", type=int, required=True, help="horizon T")
    p_bound.add_argument("--eps", type=float, required=True,
                         help="quantile level in (0, 1)")

    args = parser.parse_args(argv)
    if args.command == "bound":
        print(repr(regret_bound(args.vt, args.t, args.eps)))
        return 0

    result = run_experiment(_load_config(args))
    if args.command == "run":
        if args.trace:
            write_trace(args.trace, result.records)
        if args.report:
            write_report(args.report, result.report)
    _print_summary(result)
    return 0 if result.report["checks_pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
