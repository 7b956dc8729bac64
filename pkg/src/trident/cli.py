"""Command-line entry points.

Verbs:
    run      single run or sweep from a config file, CSV out
    analyze  rate-pipeline identity and per-stage bounds for the config
    cbsweep  repeat the run at CB capacities k^2, N^2 and unbounded
    trace    emit one JSON line per departure

Exit codes: 0 success, 1 configuration error, 2 an in-order violation was
detected in a trident run (the in-sequence guarantee was broken).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .experiment import (
    ConfigError,
    compare_cb_capacities,
    load_config,
    run_analysis,
    run_experiment,
    simulate,
    write_csv,
    rows_to_csv_text,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trident", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, helptext in (
        ("run", "run the configured experiment (single run or sweep)"),
        ("analyze", "verify the rate pipeline for the configured traffic"),
        ("cbsweep", "compare crosspoint-buffer capacities on the same traffic"),
        ("trace", "emit the departure trace of a single run"),
    ):
        p = sub.add_parser(verb, help=helptext)
        p.add_argument("-c", "--config", required=True, help="experiment config file")
        p.add_argument("-o", "--output", help="output path (overrides config)")
        p.add_argument("--seed", type=int, help="replace the configured seed list")
        p.add_argument("--workers", type=int, default=1, help="parallel runs (default 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _finish_rows(rows, config, args) -> int:
    out = args.output or config.output
    if out:
        write_csv(rows, out)
        if args.verbose:
            print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)
    else:
        sys.stdout.write(rows_to_csv_text(rows))
    bad = sum(int(r["violations"]) for r in rows if r["switch"] == "trident")
    if bad:
        print(f"in-sequence violation detected: {bad} out-of-order departures", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, seeds=(args.seed,))
        if args.verb == "analyze":
            print(run_analysis(config).render())
            return EXIT_OK
        if args.verb == "run":
            rows = run_experiment(config, workers=args.workers)
            return _finish_rows(rows, config, args)
        if args.verb == "cbsweep":
            rows = compare_cb_capacities(config, workers=args.workers)
            return _finish_rows(rows, config, args)
        # trace: single run, one JSON object per departure
        out_path = args.output or config.output
        if not out_path:
            raise ConfigError("trace: an output path is required (config 'output' or --output)")
        k = config.dims.k
        records: list[str] = []

        def writer(slot, u, v, seq, arr):
            records.append(
                json.dumps(
                    {
                        "slot": slot,
                        "src": [u // k, u % k],
                        "dst": [v // k, v % k],
                        "seq": seq,
                        "arrival_slot": arr,
                    }
                )
            )

        result = simulate(
            config.dims,
            replace(config.traffic, seed=config.seeds[0]),
            config.slots,
            switch=config.switch,
            warmup=config.warmup,
            cb_capacity=config.cb_capacity,
            trace_writer=writer,
        )
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(records) + ("\n" if records else ""))
        if args.verbose:
            print(f"wrote {len(records)} departures to {out_path}", file=sys.stderr)
        if config.switch == "trident" and result.metrics.violations:
            print(
                f"in-sequence violation detected: {result.metrics.violations} out-of-order departures",
                file=sys.stderr,
            )
            return EXIT_VIOLATION
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
