"""Command-line entry point: run experiments, verify, export the schema."""

from __future__ import annotations

import argparse
import json
import sys

from . import experiment, verify


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rotadapt",
        description=(
            "Run rotation-sensitivity experiments for adaptive gradient methods "
            "from declarative JSON configs."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("config", help="path to a JSON experiment config")
    run_p.add_argument("--out", default=None, help="artifact output directory")
    run_p.add_argument(
        "--dry-run",
        action="store_true",
        help="validate the config and print the resolved plan without writing",
    )

    verify_p = sub.add_parser("verify", help="run a verification suite")
    verify_p.add_argument("suite", choices=["fast", "full"])

    sub.add_parser("export-schema", help="print the experiment config JSON schema")

    args = parser.parse_args(argv)

    if args.command == "run":
        summary = experiment.run_experiment(args.config, args.out, args.dry_run)
        if args.dry_run:
            print(json.dumps(summary["plan"], indent=2))
            return 0
        for check in summary["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"[{status}] {check['type']}: {json.dumps(check)}")
        print(f"artifacts written to {summary['plan']['out_dir']}")
        return 0 if summary["passed"] else 1

    if args.command == "verify":
        results = verify.run_suite(args.suite)
        failures = 0
        for res in results:
            status = "PASS" if res.ok else "FAIL"
            print(f"[{status}] {res.name} ({res.seconds:.1f}s): {res.detail}")
            failures += 0 if res.ok else 1
        print(f"{len(results) - failures}/{len(results)} checks passed")
        return 0 if failures == 0 else 1

    print(json.dumps(experiment.config_schema(), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
