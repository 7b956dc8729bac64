#!/usr/bin/env python3
"""Unbalanced traffic: throughput vs omega at full load, and delay vs load
at omega = 0.6 against the output-queued reference."""

import argparse
import sys

from trident import SwitchDims, TrafficSpec, simulate


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ports", type=int, default=64)
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("-o", "--output", default="unbalanced.csv")
    args = ap.parse_args()

    side = round(args.ports ** 0.5)
    if side * side != args.ports:
        ap.error(f"--ports must be a perfect square, got {args.ports}")
    dims = SwitchDims.symmetric(side)

    rows = ["experiment,switch,N,rho,omega,seed,throughput,mean_delay"]
    for w10 in range(11):
        omega = w10 / 10
        for seed in args.seeds:
            spec = TrafficSpec("unbalanced", 1.0, omega=omega, seed=seed)
            met = simulate(dims, spec, args.slots).metrics
            rows.append(
                f"throughput_vs_omega,trident,{dims.N},1.0,{omega},{seed},"
                f"{met.throughput:.6f},{met.mean_delay:.4f}"
            )
            print(rows[-1], file=sys.stderr)
    for rho in (0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95):
        for seed in args.seeds:
            spec = TrafficSpec("unbalanced", rho, omega=0.6, seed=seed)
            for switch in ("trident", "oq"):
                met = simulate(dims, spec, args.slots, switch=switch).metrics
                rows.append(
                    f"delay_at_w06,{switch},{dims.N},{rho},0.6,{seed},"
                    f"{met.throughput:.6f},{met.mean_delay:.4f}"
                )
                print(rows[-1], file=sys.stderr)
    with open(args.output, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
