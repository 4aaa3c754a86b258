"""End-to-end verification: factor, build the miter, encode, solve, replay."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import circuit as C
from . import cnf as K
from .factoring import DEFAULT_BLOCK, FactoringSet, find_factorings, find_factorings_partitioned
from .model import BnnModel, eval_boolean, eval_boolean_batch, to_bipolar, to_bits
from .properties import Property, eval_property, validate_property

FACTORING_MODES = ("off", "heuristic", "partitioned")
SAFE, RISK, UNKNOWN = "SAFE", "RISK", "UNKNOWN"


@dataclass
class FactoringConfig:
    mode: str = "heuristic"
    block_rows: int = DEFAULT_BLOCK
    block_cols: int = DEFAULT_BLOCK
    workers: int | None = None

    def __post_init__(self):
        if self.mode not in FACTORING_MODES:
            raise ValueError(f"factoring mode must be one of {FACTORING_MODES}, got {self.mode!r}")


@dataclass
class Verification:
    verdict: str
    counterexample: np.ndarray | None = None  # bipolar input
    outputs: np.ndarray | None = None  # output counts on the counterexample
    factorings: list = field(default_factory=list)
    gates: dict = field(default_factory=dict)
    num_vars: int = 0
    num_clauses: int = 0
    solve_time: float = 0.0
    build_time: float = 0.0
    solver: str = ""


def factor_model(model: BnnModel, config: FactoringConfig | str = "heuristic") -> list[FactoringSet]:
    if isinstance(config, str):
        config = FactoringConfig(config)
    sets = []
    for l in range(1, model.layer_count + 1):
        w, m = model.weights[l - 1], model.masks[l - 1]
        if config.mode == "off":
            sets.append(FactoringSet(layer=l))
        elif config.mode == "heuristic":
            sets.append(find_factorings(w, m, layer=l))
        else:
            sets.append(
                find_factorings_partitioned(
                    w, config.block_rows, config.block_cols, m, layer=l, workers=config.workers
                )
            )
    return sets


def encode(model: BnnModel, prop: Property, factoring: FactoringConfig | str = "heuristic"):
    """Factor, build and encode.  Returns ``(cnf, circuit, factorings)``."""
    validate_property(prop, model.input_size, model.fan_in(model.layer_count))
    sets = factor_model(model, factoring)
    circ = C.build_miter(model, prop, sets)
    return K.tseitin_encode(circ), circ, sets


def verify(
    model: BnnModel,
    prop: Property,
    factoring: FactoringConfig | str = "heuristic",
    backend=None,
    timeout: float | None = None,
    emit_cnf=None,
) -> Verification:
    """Decide whether some input makes ``prop`` true.

    SAFE means no such input exists.  A RISK verdict carries a counterexample
    that has been replayed through the reference evaluator.  ``emit_cnf``
    optionally names a file for the DIMACS formula.
    """
    t0 = time.perf_counter()
    cnf, circ, sets = encode(model, prop, factoring)
    if emit_cnf is not None:
        K.write_dimacs(cnf, emit_cnf)
    build_time = time.perf_counter() - t0
    res = K.solve(cnf, backend, timeout)
    out = Verification(
        verdict={K.SAT: RISK, K.UNSAT: SAFE}.get(res.verdict, UNKNOWN),
        factorings=sets,
        gates=C.gate_count(circ),
        num_vars=cnf.num_vars,
        num_clauses=cnf.num_clauses,
        solve_time=res.time,
        build_time=build_time,
        solver=res.solver,
    )
    if res.verdict == K.SAT:
        x = K.decode_counterexample(res, cnf, model.input_size)
        bits = to_bits(x)
        _, counts = eval_boolean(model, bits)
        if not eval_property(prop, bits, counts):
            raise K.SolverError("counterexample does not replay through the reference evaluator")
        out.counterexample, out.outputs = x, counts
    return out


def brute_force(model: BnnModel, prop: Property, limit: int = 20, chunk: int = 1 << 16):
    """Enumerate all inputs.  Returns the first risky bipolar input or ``None``."""
    n = model.input_size
    if n > limit:
        raise ValueError(f"{n} input bits exceed the enumeration limit of {limit}")
    total = 1 << n
    shifts = np.arange(n - 1, -1, -1)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        X = (idx[:, None] >> shifts) & 1
        _, counts = eval_boolean_batch(model, X)
        hits = np.flatnonzero(eval_property(prop, X, counts))
        if hits.size:
            return to_bipolar(X[hits[0]])
    return None


def all_inputs(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64).reshape(-1, n)


def format_verification(v: Verification, prop_text: str = "") -> str:
    lines = [f"verdict: {v.verdict}"]
    if prop_text:
        lines.append(f"property: {prop_text}")
    if v.counterexample is not None:
        lines.append("counterexample: " + " ".join(f"{int(a):+d}" for a in v.counterexample))
        lines.append("output counts: " + " ".join(str(int(c)) for c in v.outputs))
    saving = sum(fs.total_saving for fs in v.factorings)
    lines.append(f"factorings: {sum(len(fs) for fs in v.factorings)} (saving {saving})")
    lines.append(
        "gates: " + " ".join(f"{k}={c}" for k, c in v.gates.items() if c and k != "xnor_and_adders")
    )
    lines.append(f"cnf: {v.num_vars} variables, {v.num_clauses} clauses")
    lines.append(f"solver: {v.solver} ({v.solve_time:.3f}s, build {v.build_time:.3f}s)")
    return "\n".join(lines) + "\n"


def verification_dict(v: Verification, prop_text: str = "") -> dict:
    return {
        "verdict": v.verdict,
        "property": prop_text,
        "counterexample": None if v.counterexample is None else [int(a) for a in v.counterexample],
        "output_counts": None if v.outputs is None else [int(c) for c in v.outputs],
        "factoring_saving": sum(fs.total_saving for fs in v.factorings),
        "factorings": sum(len(fs) for fs in v.factorings),
        "gates": v.gates,
        "cnf": {"variables": v.num_vars, "clauses": v.num_clauses},
        "solver": v.solver,
        "solve_time": v.solve_time,
        "build_time": v.build_time,
    }
