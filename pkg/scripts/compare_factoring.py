#!/usr/bin/env python3
"""Formula size and solve time with and without factoring on random networks.

    python scripts/compare_factoring.py --dims 64,32,32,2 --models 5 --solve

Prints one row per (model, factoring mode).  The property asks whether the
first two outputs can both reach a fraction of their fan-in.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from bnnsat import verify as V
from bnnsat.circuit import gate_count
from bnnsat.cnf import solve
from bnnsat.model import random_model
from bnnsat.properties import conj, OutputAtom


def risk_property(model, frac):
    fan_in = model.fan_in(model.layer_count)
    k = min(2, model.output_size)
    return conj(*(OutputAtom(i, ">=", int(np.ceil(frac * fan_in[i - 1]))) for i in range(1, k + 1)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", default="64,32,32,2")
    ap.add_argument("--models", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--frac", type=float, default=0.8, help="output threshold as a fraction of fan-in")
    ap.add_argument("--modes", default="off,heuristic,partitioned")
    ap.add_argument("--block", type=int, default=16, help="block size for partitioned mode")
    ap.add_argument("--solve", action="store_true")
    ap.add_argument("--timeout", type=float, default=60.0)
    args = ap.parse_args(argv)

    dims = [int(d) for d in args.dims.split(",")]
    rng = np.random.default_rng(args.seed)
    out = csv.writer(sys.stdout)
    out.writerow(["model", "mode", "saving", "gates", "vars", "clauses", "encode_s", "verdict", "solve_s"])
    for k in range(args.models):
        model = random_model(dims, rng)
        prop = risk_property(model, args.frac)
        for mode in args.modes.split(","):
            config = V.FactoringConfig(mode, args.block, args.block)
            t0 = time.perf_counter()
            cnf, circ, sets = V.encode(model, prop, config)
            enc = time.perf_counter() - t0
            verdict, solve_s = "-", 0.0
            if args.solve:
                res = solve(cnf, timeout=args.timeout)
                verdict, solve_s = res.verdict, res.time
            out.writerow([
                k, mode, sum(fs.total_saving for fs in sets), gate_count(circ)["total"],
                cnf.num_vars, cnf.num_clauses, f"{enc:.3f}", verdict, f"{solve_s:.3f}",
            ])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
