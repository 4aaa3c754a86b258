"""Minimal SAT-competition style front end for a python-sat solver.

    python -m bnnsat.pysat_runner [--solver NAME] FILE.cnf

Prints ``s SATISFIABLE`` with ``v`` lines, or ``s UNSATISFIABLE``, and exits
with 10 or 20.  Useful as a stand-in external solver.
"""

from __future__ import annotations

import argparse
import sys

from pysat.solvers import Solver

from .cnf import parse_dimacs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bnnsat.pysat_runner")
    ap.add_argument("--solver", default="cadical153")
    ap.add_argument("path")
    args = ap.parse_args(argv)
    with open(args.path, encoding="utf-8") as fh:
        cnf = parse_dimacs(fh.read())
    with Solver(name=args.solver, bootstrap_with=cnf.clauses) as s:
        if not s.solve():
            print("s UNSATISFIABLE")
            return 20
        model = s.get_model() or []
    print("s SATISFIABLE")
    for k in range(0, len(model), 20):
        print("v " + " ".join(map(str, model[k : k + 20])))
    print("v 0")
    return 10


if __name__ == "__main__":
    sys.exit(main())
