"""Command-line entry point: ``bnnsat <command> ...``.

Exit codes: 0 safe, 1 risk, 2 unknown (timeout).  Errors exit with 10 (bad
input or I/O), 11 (solver failure) or 12 (instance beyond an enumeration
limit).  Commands that do not produce a verdict exit with 0 on success.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import cnf as K
from . import factoring as F
from . import model as M
from . import reductions as R
from . import verify as V
from .properties import PropertyError, format_property, parse_property, validate_property

EXIT = {V.SAFE: 0, V.RISK: 1, V.UNKNOWN: 2}
E_INPUT, E_SOLVER, E_LIMIT = 10, 11, 12
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse would exit with 2, which means "unknown" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(E_INPUT, f"{self.prog}: error: {message}\n")


def _read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_property(arg: str):
    """``arg`` is a file holding the property, or the property itself."""
    text = _read_text(arg) if os.path.isfile(arg) else arg
    text = "\n".join(ln.split("#", 1)[0] for ln in text.splitlines())
    return parse_property(text)


def _factoring_config(args) -> V.FactoringConfig:
    if args.block_rows < 1 or args.block_cols < 1:
        raise UsageError("block sizes must be positive")
    return V.FactoringConfig(args.factoring, args.block_rows, args.block_cols, args.workers)


def _emit(args, text_report: str, data: dict):
    if args.report == "structured":
        sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text_report)


# -- commands ----------------------------------------------------------------------

def cmd_verify(args) -> int:
    if args.timeout is not None and args.timeout <= 0:
        raise UsageError("--timeout must be positive")
    model = M.load_model(args.model)
    prop = _load_property(args.property)
    config = _factoring_config(args)
    res = V.verify(model, prop, config, K.make_backend(args.solver), args.timeout, args.emit_cnf)
    text = format_property(prop)
    _emit(args, V.format_verification(res, text), V.verification_dict(res, text))
    return EXIT[res.verdict]


def cmd_encode(args) -> int:
    model = M.load_model(args.model)
    prop = _load_property(args.property)
    cnf, circ, sets = V.encode(model, prop, _factoring_config(args))
    _write_text(args.emit_cnf, K.emit_dimacs(cnf))
    if args.emit_cnf != "-":
        saving = sum(fs.total_saving for fs in sets)
        data = {
            "variables": cnf.num_vars,
            "clauses": cnf.num_clauses,
            "factoring_saving": saving,
            "gates": V.C.gate_count(circ),
        }
        text = f"wrote {args.emit_cnf}: {cnf.num_vars} variables, {cnf.num_clauses} clauses, factoring saving {saving}\n"
        _emit(args, text, data)
    return 0


def cmd_factor(args) -> int:
    if (args.model is None) == (args.matrix is None):
        raise UsageError("give exactly one of --model and --matrix")
    if args.model:
        model = M.load_model(args.model)
        layers = [(model.weights[l - 1], model.masks[l - 1]) for l in range(1, model.layer_count + 1)]
    else:
        layers = [R.parse_matrix(_read_text(args.matrix))]
    config = _factoring_config(args)
    if args.optimal is not None:
        sets = [
            F.brute_force_optimal_factorings(w, args.optimal, m, layer=l)[0]
            for l, (w, m) in enumerate(layers, start=1)
        ]
    elif config.mode == "off":
        sets = [F.FactoringSet(layer=l) for l in range(1, len(layers) + 1)]
    elif config.mode == "heuristic":
        sets = [F.find_factorings(w, m, layer=l) for l, (w, m) in enumerate(layers, start=1)]
    else:
        sets = [
            F.find_factorings_partitioned(w, config.block_rows, config.block_cols, m, layer=l, workers=config.workers)
            for l, (w, m) in enumerate(layers, start=1)
        ]
    _emit(args, F.format_report(sets), F.report_dict(sets))
    return 0


def _parse_vector(text: str) -> np.ndarray:
    toks = text.replace(",", " ").split()
    try:
        x = np.array([int(t) for t in toks], dtype=np.int64)
    except ValueError:
        raise UsageError(f"cannot read input vector {text!r}") from None
    if not np.isin(x, (-1, 1)).all():
        raise UsageError("input entries must be -1 or +1")
    return x


def cmd_eval(args) -> int:
    model = M.load_model(args.model)
    x = _parse_vector(args.input)
    hidden, sums = M.eval_bipolar(model, x)
    _, counts = M.eval_boolean(model, M.to_bits(x))
    data = {
        "hidden": [[int(v) for v in h] for h in hidden],
        "output_sums": [int(v) for v in sums],
        "output_counts": [int(v) for v in counts],
    }
    text = "".join(f"layer {l}: " + " ".join(f"{v:+d}" for v in h) + "\n" for l, h in enumerate(data["hidden"], 1))
    text += "output sums: " + " ".join(str(v) for v in data["output_sums"]) + "\n"
    text += "output counts: " + " ".join(str(v) for v in data["output_counts"]) + "\n"
    _emit(args, text, data)
    return 0


def cmd_bruteforce(args) -> int:
    model = M.load_model(args.model)
    prop = _load_property(args.property)
    validate_property(prop, model.input_size, model.fan_in(model.layer_count))
    if model.input_size > args.limit:
        raise F.InstanceTooLarge(f"{model.input_size} input bits exceed the enumeration limit of {args.limit}")
    x = V.brute_force(model, prop, limit=args.limit)
    verdict = V.SAFE if x is None else V.RISK
    data = {"verdict": verdict, "property": format_property(prop), "counterexample": None, "output_counts": None}
    text = f"verdict: {verdict}\nproperty: {data['property']}\n"
    if x is not None:
        _, counts = M.eval_boolean(model, M.to_bits(x))
        data["counterexample"] = [int(v) for v in x]
        data["output_counts"] = [int(v) for v in counts]
        text += "counterexample: " + " ".join(f"{v:+d}" for v in x) + "\n"
        text += "output counts: " + " ".join(str(v) for v in data["output_counts"]) + "\n"
    _emit(args, text, data)
    return EXIT[verdict]


def cmd_gen_3sat(args) -> int:
    if args.cnf:
        inst = R.parse_dimacs_3cnf(_read_text(args.cnf))
    elif args.random:
        inst = R.random_3cnf(args.random[0], args.random[1], np.random.default_rng(args.seed))
    else:
        raise UsageError("give --cnf FILE or --random VARS CLAUSES")
    model, prop = R.sat3_to_bnn(inst)
    if args.out_cnf:
        _write_text(args.out_cnf, R.format_dimacs_3cnf(inst))
    _write_text(args.out_model, M.serialize_model(model))
    _write_text(args.out_property, format_property(prop) + "\n")
    return 0


def cmd_gen_meb(args) -> int:
    if args.graph:
        g = R.parse_graph(_read_text(args.graph))
    elif args.random:
        n_left, n_right, p = int(args.random[0]), int(args.random[1]), float(args.random[2])
        g = F.random_bipartite(n_left, n_right, p, np.random.default_rng(args.seed))
    else:
        raise UsageError("give --graph FILE or --random LEFT RIGHT P")
    if args.out_graph:
        _write_text(args.out_graph, R.format_graph(g))
    bits, mask = R.reduce_meb_to_factoring(g)
    _write_text(args.out, R.format_matrix(bits, mask))
    return 0


def cmd_gen_model(args) -> int:
    try:
        dims = [int(d) for d in args.dims.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"cannot read dims {args.dims!r}") from None
    if len(dims) < 2 or min(dims) < 1:
        raise UsageError("--dims needs at least two positive sizes")
    _write_text(args.out, M.serialize_model(M.random_model(dims, np.random.default_rng(args.seed))))
    return 0


# -- argument parsing ---------------------------------------------------------------

def _add_factoring(p):
    p.add_argument("--factoring", choices=V.FACTORING_MODES, default="heuristic")
    p.add_argument("--block-rows", type=int, default=F.DEFAULT_BLOCK, help="neurons per block")
    p.add_argument("--block-cols", type=int, default=F.DEFAULT_BLOCK, help="inputs per block")
    p.add_argument("--workers", type=int, default=None, help="threads for partitioned factoring")


def _add_report(p):
    p.add_argument("--report", choices=("text", "structured"), default="text")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bnnsat", description="SAT-based verification of binarized neural networks")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="decide a risk property with a SAT solver")
    p.add_argument("--model", required=True)
    p.add_argument("--property", required=True, help="property file or inline text")
    _add_factoring(p)
    p.add_argument("--solver", default="pysat", help="'pysat', 'pysat:NAME' or an external command")
    p.add_argument("--timeout", type=float, default=None, help="seconds")
    p.add_argument("--emit-cnf", default=None, help="also write the DIMACS formula here")
    _add_report(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("encode", help="write the miter as DIMACS CNF")
    p.add_argument("--model", required=True)
    p.add_argument("--property", required=True)
    _add_factoring(p)
    p.add_argument("--emit-cnf", required=True, help="output path, '-' for stdout")
    _add_report(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("factor", help="report factorings of each layer")
    p.add_argument("--model")
    p.add_argument("--matrix", help="0/1/. matrix, one row per neuron")
    _add_factoring(p)
    p.add_argument("--optimal", type=int, metavar="K", help="exact best K factorings (small layers only)")
    _add_report(p)
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("eval", help="run the network on one bipolar input")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="e.g. '+1 -1 +1'")
    _add_report(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bruteforce", help="decide a risk property by enumeration")
    p.add_argument("--model", required=True)
    p.add_argument("--property", required=True)
    p.add_argument("--limit", type=int, default=20, help="largest number of input bits")
    _add_report(p)
    p.set_defaults(func=cmd_bruteforce)

    p = sub.add_parser("gen-3sat", help="network and property from a 3-CNF")
    p.add_argument("--cnf", help="DIMACS file")
    p.add_argument("--random", type=int, nargs=2, metavar=("VARS", "CLAUSES"))
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out-model", default="-")
    p.add_argument("--out-property", default="-")
    p.add_argument("--out-cnf", default=None, help="also write the source formula")
    p.set_defaults(func=cmd_gen_3sat)

    p = sub.add_parser("gen-meb", help="factoring layer from a bipartite graph")
    p.add_argument("--graph")
    p.add_argument("--random", nargs=3, metavar=("LEFT", "RIGHT", "P"))
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="-")
    p.add_argument("--out-graph", default=None)
    p.set_defaults(func=cmd_gen_meb)

    p = sub.add_parser("gen-model", help="random network")
    p.add_argument("--dims", required=True, help="e.g. '8,4,2'")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen_model)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except K.SolverError as exc:
        print(f"bnnsat: solver error: {exc}", file=sys.stderr)
        return E_SOLVER
    except F.InstanceTooLarge as exc:
        print(f"bnnsat: {exc}", file=sys.stderr)
        return E_LIMIT
    except (OSError, ValueError, UsageError, PropertyError) as exc:
        print(f"bnnsat: {exc}", file=sys.stderr)
        return E_INPUT


if __name__ == "__main__":
    sys.exit(main())
