"""Command-line entry point: ``absnet run|validate|baseline``.

Exit codes: 0 success, 2 validation error, 3 runtime error. Failures print
one JSON error record to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .scenario import MODES, ScenarioError, load_scenario, random_stationary_baseline, run_experiment

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="absnet", description="ABS relay-network mobility experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV outputs")
    run.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
    run.add_argument("--mode", choices=MODES, help="override the scenario mode")
    run.add_argument("--iters", type=int, help="maximum mobility slots L")
    run.add_argument("--runs", type=int, help="Monte-Carlo runs")
    run.add_argument("--seed", type=int, help="RNG seed")
    run.add_argument("--out", required=True, help="output directory")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--scenario", required=True)

    base = sub.add_parser("baseline", help="random stationary baseline flow")
    base.add_argument("--scenario", required=True)
    base.add_argument("--runs", type=int)
    base.add_argument("--seed", type=int)
    return ap


def _error(kind: str, exc: Exception, key=None) -> None:
    rec = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if key is not None:
        rec["key"] = key
    print(json.dumps(rec), file=sys.stderr)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario)
        for opt in ("iters", "runs"):
            val = getattr(args, opt, None)
            if val is not None and val < 1:
                raise ScenarioError(opt, "must be >= 1")
        if getattr(args, "seed", None) is not None and args.seed < 0:
            raise ScenarioError("seed", "must be nonnegative")
    except ScenarioError as exc:
        _error("validation", exc, exc.key)
        return EXIT_VALIDATION
    except (OSError, ValueError) as exc:
        _error("validation", exc)
        return EXIT_VALIDATION

    try:
        if args.command == "validate":
            print(json.dumps({"scenario": scenario.name, "valid": True, "mode": scenario.mode,
                              "flow_eval": scenario.flow_eval, "n_abs": len(scenario.abs_initial)}))
        elif args.command == "baseline":
            res = random_stationary_baseline(scenario, args.runs, args.seed)
            print(json.dumps({"scenario": scenario.name, "metric": scenario.metric,
                              "runs": len(res.values), "mean": res.mean, "std": res.std}))
        else:
            bundle = run_experiment(scenario, args.mode, args.runs, args.out, args.iters, args.seed)
            summary = {"scenario": scenario.name, "mode": bundle.mode, "out": args.out}
            if bundle.baseline is not None:
                summary["mean"] = bundle.baseline.mean
            else:
                summary["mean_final_flow"] = bundle.mean_final_flow
            if bundle.warnings:
                summary["warnings"] = bundle.warnings
            print(json.dumps(summary))
    except ScenarioError as exc:
        _error("validation", exc, exc.key)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - any module failure is a runtime error
        _error("runtime", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
