"""Command-line front end.

Exit codes: 0 success, 2 scenario load or validation failure, 3 coverage
failure (gap fraction above the allowed threshold).
"""

from __future__ import annotations

import argparse
import sys

from ..errors import AnchorSimError, CoverageGapError, ScenarioError
from .bench import (
    GAP_SENTINEL,
    reproduce_table1,
    run_distribution_bench,
    run_latency_bench,
    run_session_bench,
    write_rows,
)
from .scenario import NAMED_CONSTELLATIONS, load_scenario, with_overrides

EXIT_OK = 0
EXIT_LOAD = 2
EXIT_COVERAGE = 3


def _add_common(p: argparse.ArgumentParser, with_out: bool = True) -> None:
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    if with_out:
        p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, default=None, help="override scenario seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchorsim",
        description="Constellation latency, session signaling and anchor placement benches",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("latency-bench", help="compare anchor-selection schemes")
    _add_common(p)
    p.add_argument(
        "--constellation",
        choices=sorted(NAMED_CONSTELLATIONS),
        default=None,
        help="override the scenario constellation",
    )
    p.add_argument("--epochs", type=int, default=None, help="override epoch count")
    p.add_argument(
        "--max-gap-fraction",
        type=float,
        default=0.05,
        help="tolerated fraction of samples lost to coverage gaps",
    )

    p = sub.add_parser("session-bench", help="establishment time sweep")
    _add_common(p)
    p.add_argument("--h-max", type=int, default=20, help="sweep anchor counts 1..h-max")
    p.add_argument(
        "--repetitions", type=int, default=1, help="jittered repetitions per point"
    )

    p = sub.add_parser("distribute", help="compare placement algorithms")
    _add_common(p)
    p.add_argument("--h", type=int, required=True, help="number of anchors to place")

    p = sub.add_parser("table1", help="two-anchor decomposition for one flow")
    _add_common(p)

    p = sub.add_parser("validate", help="load a scenario and report its shape")
    _add_common(p, with_out=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        scenario = with_overrides(
            scenario,
            seed=args.seed,
            constellation=getattr(args, "constellation", None),
            epoch_count=getattr(args, "epochs", None),
        )
    except (ScenarioError, AnchorSimError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_LOAD

    try:
        if args.command == "validate":
            print(
                f"{scenario.name}: constellation={scenario.constellation_name} "
                f"({scenario.shell.plane_count}x{scenario.shell.sats_per_plane}), "
                f"stations={len(scenario.stations)}, anchors={len(scenario.anchor_ids)}, "
                f"users={len(scenario.users)}, servers={len(scenario.servers)}, "
                f"epochs={len(scenario.epochs)}"
            )
            return EXIT_OK

        if args.command == "latency-bench":
            rows = run_latency_bench(scenario)
            write_rows(rows, args.out)
            by_metric = {}
            attempts = 0
            gap_count = 0
            for r in rows:
                if r.metric == GAP_SENTINEL:
                    gap_count += int(r.value)
                    attempts += int(r.value)
                elif r.metric == "samples":
                    attempts += int(r.value)
                elif r.epoch is None:
                    by_metric[(r.scheme, r.metric)] = r.value
            for (scheme, metric), value in sorted(by_metric.items()):
                print(f"{scheme:13s} {metric:28s} {value:10.3f}")
            fraction = gap_count / attempts if attempts else 0.0
            print(f"coverage gaps: {gap_count} / {attempts} samples ({fraction:.1%})")
            if fraction > args.max_gap_fraction:
                print(
                    f"coverage failure: gap fraction {fraction:.3f} exceeds "
                    f"{args.max_gap_fraction:.3f}",
                    file=sys.stderr,
                )
                return EXIT_COVERAGE
            return EXIT_OK

        if args.command == "session-bench":
            if args.h_max < 1:
                print("session error: --h-max must be >= 1", file=sys.stderr)
                return EXIT_LOAD
            rows = run_session_bench(
                scenario, range(1, args.h_max + 1), repetitions=args.repetitions
            )
            write_rows(rows, args.out)
            for r in rows:
                if r.metric == "mean_establishment_ms":
                    print(f"h={int(r.epoch):3d} {r.scheme:10s} {r.value:10.3f} ms")
            return EXIT_OK

        if args.command == "distribute":
            rows = run_distribution_bench(scenario, args.h)
            write_rows(rows, args.out)
            for r in rows:
                if r.metric == "objective_cost":
                    print(f"{r.scheme:12s} objective {r.value:12.6f}")
            return EXIT_OK

        if args.command == "table1":
            rows = reproduce_table1(scenario)
            write_rows(rows, args.out)
            for r in rows:
                if r.metric in ("total_ms", "winner_total_ms"):
                    print(f"{r.scheme:12s} {r.metric:16s} {r.value:8.3f}")
            return EXIT_OK
    except CoverageGapError as exc:
        print(f"coverage failure: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except AnchorSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
