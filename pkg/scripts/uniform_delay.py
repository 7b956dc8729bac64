#!/usr/bin/env python3
"""Mean delay vs offered load under uniform Bernoulli traffic.

Runs the fabric and the ideal output-queued reference on identical arrival
traces and writes one CSV row per (switch, load, seed).
"""

import argparse
import sys

from trident import SwitchDims, TrafficSpec, simulate


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ports", type=int, default=64, help="switch size N (square of n)")
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--loads", type=float, nargs="+",
                    default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99])
    ap.add_argument("-o", "--output", default="uniform_delay.csv")
    args = ap.parse_args()

    side = round(args.ports ** 0.5)
    if side * side != args.ports:
        ap.error(f"--ports must be a perfect square, got {args.ports}")
    dims = SwitchDims.symmetric(side)

    rows = ["switch,N,rho,seed,throughput,mean_delay,p99_delay"]
    for rho in args.loads:
        for seed in args.seeds:
            spec = TrafficSpec("uniform_bernoulli", rho, seed=seed)
            for switch in ("trident", "oq"):
                met = simulate(dims, spec, args.slots, switch=switch).metrics
                rows.append(
                    f"{switch},{dims.N},{rho},{seed},"
                    f"{met.throughput:.6f},{met.mean_delay:.4f},{met.p99_delay}"
                )
                print(rows[-1], file=sys.stderr)
    with open(args.output, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
