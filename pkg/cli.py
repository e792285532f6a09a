"""
Command-line entry point: solve | sweep | sample | check.

Exit code 0 on success, 1 on invalid input or numerical failure, 2 when an invariant is
violated. The first failure is named on standard error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from env import DEFAULT_SEED, configure_logging
from errors import InvariantViolationError, SimulationError
from harness.checks import run_all_checks
from harness.io import (
    counts_csv,
    distribution_csv,
    load_instance_json,
    model_json,
    parse_potential_flag,
    records_csv,
    rows_to_csv,
    write_artifact,
)
from harness.pipeline import ExperimentService
from models.config import ExperimentConfig
from services.phase_estimation import outcome_distribution, sample_outcomes


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file mirroring ExperimentConfig; flags override it")
    parser.add_argument(
        "--potential",
        help="zero | quad:<c> | file:<path>; a file table fixes one grid size, "
             "so it only runs with s = 0 and n0 equal to its row count",
    )
    parser.add_argument("--k", type=int, help="target eigenvector index (default 0)")
    parser.add_argument("--n0", help="comma-separated coarse sizes, e.g. 8,16,32")
    grid = parser.add_mutually_exclusive_group()
    grid.add_argument("--s", type=int, help="number of appended qubits, N = 2^s N0")
    grid.add_argument("--fine-n", type=int, help="fixed fine size N for every coarse size")
    parser.add_argument("--bits", type=int, help="target accuracy bits n")
    parser.add_argument("--epsilon", type=float, help="failure budget for choose_b")
    parser.add_argument("--b", type=int, help="explicit ancilla count, overrides choose_b")
    parser.add_argument("--shots", type=int, help="finite-shot sampling (0 = analytic only)")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--noise", type=float, help="perturbation of the coarse eigenvector (default 0)")
    parser.add_argument("--out", help="output file; bare names go under QPE_OUTPUT_DIR")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Coarse-to-fine eigenvector preparation feeding quantum phase estimation."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_experiment_flags(sub.add_parser("solve", help="single pipeline run"))
    _add_experiment_flags(sub.add_parser("sweep", help="multi-N0 sweep with convergence fit"))
    sample = sub.add_parser("sample", help="finite-shot end-to-end success rate")
    _add_experiment_flags(sample)
    sample.add_argument("--instance", help="JSON instance file; sample it directly instead of a pipeline run")

    check = sub.add_parser("check", help="run all invariant suites")
    check.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return parser


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.potential:
        data["potential"] = parse_potential_flag(args.potential)
    if args.n0:
        data["n0_list"] = [int(v) for v in args.n0.split(",") if v.strip()]
    data.setdefault("n0_list", [16])
    if args.s is not None:
        data["s"] = args.s
        data.pop("fine_n", None)
    if args.fine_n is not None:
        data["fine_n"] = args.fine_n
        data.pop("s", None)
    for flag, key in (("k", "k"), ("shots", "shots"), ("seed", "rng_seed"), ("noise", "noise")):
        value = getattr(args, flag)
        if value is not None:
            data[key] = value
    qpe = dict(data.get("qpe") or {})
    for flag, key in (("bits", "n"), ("epsilon", "epsilon"), ("b", "b")):
        value = getattr(args, flag)
        if value is not None:
            qpe[key] = value
    data["qpe"] = qpe
    return ExperimentConfig.model_validate(data)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        path = write_artifact(out, text)
        print(f"📝 wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _banner(title: str) -> None:
    print(f"\n{'='*60}", file=sys.stderr)
    print(title, file=sys.stderr)
    print(f"{'='*60}\n", file=sys.stderr)


def cmd_solve(args: argparse.Namespace) -> int:
    config = build_config(args)
    _banner(f"🚀 SOLVE {config.potential.label} k={config.k} N0={config.n0_list}")
    report = ExperimentService().run_pipeline(config)
    for r in report.records:
        print(f"   - N0={r.N0} s={r.s} N={r.N}: success={r.success_probability:.10f} "
              f"lambda~{r.eigenvalue_estimate:.6g} (fine {r.fine_eigenvalue:.6g})", file=sys.stderr)
    _emit(model_json(report) if args.format == "json" else records_csv(report.records), args.out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_config(args)
    _banner(f"🚀 SWEEP {config.potential.label} k={config.k} N0={config.n0_list}")
    result = ExperimentService().sweep_and_fit(config)
    print(f"📊 fitted slope of log(failure) vs log(N0): {result.fit.slope:.4f}", file=sys.stderr)
    if result.report.threshold_n0 is None:
        print("⚠️  no N0 in the sweep reaches failure < 1/2", file=sys.stderr)
    else:
        points = ", ".join(f"N={p.N}: {p.failure:.3e}" for p in result.report.threshold_points)
        print(f"📊 smallest N0 with failure < 1/2: {result.report.threshold_n0} ({points})", file=sys.stderr)
    _emit(model_json(result.report) if args.format == "json" else result.csv_text, args.out)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    if args.instance:
        instance = load_instance_json(args.instance)
        b = args.b or 8
        seed = args.seed if args.seed is not None else DEFAULT_SEED
        distribution = outcome_distribution(instance, b)
        _banner(f"🎲 SAMPLE instance {args.instance} b={b}")
        if args.shots:
            _emit(counts_csv(sample_outcomes(distribution, args.shots, seed)), args.out)
        else:
            _emit(distribution_csv(distribution), args.out)
        return 0

    config = build_config(args)
    if config.shots == 0:
        config = config.model_copy(update={"shots": 10000})
    _banner(f"🎲 SAMPLE {config.potential.label} k={config.k} shots={config.shots}")
    results = ExperimentService().end_to_end_success_rate(config)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "✅" if r.passed else "❌"
        print(f"{status} N0={r.N0} N={r.N}: rate={r.rate:.4f} floor={r.predicted_floor:.4f}", file=sys.stderr)
    if args.format == "json":
        text = json.dumps([r.model_dump() for r in results], indent=2) + "\n"
    else:
        text = rows_to_csv((r.model_dump() for r in results), list(results[0].model_dump().keys()))
    _emit(text, args.out)
    if failed:
        r = failed[0]
        print(f"❌ end-to-end success rate: N0={r.N0} rate {r.rate:.4f} < {r.predicted_floor:.4f}", file=sys.stderr)
        return 2
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    _banner("🔍 CHECK invariant suites")
    results = run_all_checks(args.seed)
    for r in results:
        status = "✅" if r.passed else "❌"
        print(f"{status} {r.name} ({r.seconds:.2f}s)", file=sys.stderr)
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"❌ {failed[0].detail}", file=sys.stderr)
        return 2
    return 0


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "sample": cmd_sample, "check": cmd_check}


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InvariantViolationError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2
    except (SimulationError, ValidationError, ValueError, OSError) as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
