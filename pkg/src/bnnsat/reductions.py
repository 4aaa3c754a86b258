"""Instance generators from 3SAT and from maximum edge biclique.

``sat3_to_bnn`` builds a single-layer network with one neuron per clause.
Inputs are the bias ``x0``, the variables ``x1..xm`` and a switch input
``x(m+1)``.  A neuron links to the variables of its clause (weight -1 for a
positive literal, +1 for a negative one), to the switch with weight -1 and
to the bias with weight -1.  With the switch at +1 the neuron outputs -1
exactly when its clause is satisfied, so the formula is satisfiable iff some
input sets the switch and drives every neuron to -1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .factoring import BipartiteGraph, reduce_meb_to_factoring  # noqa: F401  (re-export)
from .model import BnnModel, threshold
from .properties import InputAtom, OutputAtom, Property, conj


@dataclass(frozen=True)
class Cnf3Instance:
    num_vars: int
    clauses: tuple

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(int(l) for l in c) for c in self.clauses))
        for c in self.clauses:
            if len(c) != 3:
                raise ValueError(f"clause {c} does not have exactly 3 literals")
            if any(l == 0 or abs(l) > self.num_vars for l in c):
                raise ValueError(f"clause {c} references a variable outside 1..{self.num_vars}")

    def satisfied_by(self, assignment) -> bool:
        """``assignment[v]`` is the truth value of variable ``v``."""
        return all(any(assignment[abs(l)] == (l > 0) for l in c) for c in self.clauses)


def parse_dimacs_3cnf(text: str) -> Cnf3Instance:
    """Read a DIMACS CNF whose clauses have 1 to 3 literals.

    Short clauses are padded by repeating their last literal.
    """
    num_vars, clauses, current = None, [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] in "c%":
            continue
        if line.startswith("p"):
            toks = line.split()
            if len(toks) != 4 or toks[1] != "cnf":
                raise ValueError(f"bad DIMACS header: {line!r}")
            num_vars = int(toks[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit:
                current.append(lit)
                continue
            if not 1 <= len(current) <= 3:
                raise ValueError(f"clause {current} has {len(current)} literals; 1 to 3 are accepted")
            clauses.append(tuple(current + [current[-1]] * (3 - len(current))))
            current = []
    if current:
        raise ValueError("last clause is not terminated by 0")
    if num_vars is None:
        num_vars = max((abs(l) for c in clauses for l in c), default=0)
    return Cnf3Instance(num_vars, tuple(clauses))


def format_dimacs_3cnf(inst: Cnf3Instance) -> str:
    lines = [f"p cnf {inst.num_vars} {len(inst.clauses)}"]
    lines += [" ".join(map(str, c)) + " 0" for c in inst.clauses]
    return "\n".join(lines) + "\n"


def random_3cnf(num_vars: int, num_clauses: int, rng=None, distinct: bool = True) -> Cnf3Instance:
    rng = np.random.default_rng(rng)
    clauses = []
    for _ in range(num_clauses):
        if distinct and num_vars >= 3:
            vs = rng.choice(np.arange(1, num_vars + 1), size=3, replace=False)
        else:
            vs = rng.integers(1, num_vars + 1, size=3)
        signs = rng.choice([-1, 1], size=3)
        clauses.append(tuple(int(v * s) for v, s in zip(vs, signs)))
    return Cnf3Instance(num_vars, tuple(clauses))


def brute_force_3sat(inst: Cnf3Instance) -> dict | None:
    """First satisfying assignment in lexicographic order, or ``None``."""
    if inst.num_vars > 24:
        raise ValueError("enumeration is limited to 24 variables")
    for values in itertools.product((False, True), repeat=inst.num_vars):
        assignment = dict(zip(range(1, inst.num_vars + 1), values))
        if inst.satisfied_by(assignment):
            return assignment
    return None


def sat3_to_bnn(inst: Cnf3Instance) -> tuple[BnnModel, Property]:
    """Network and risk property that are SAT together iff ``inst`` is satisfiable.

    Repeated literals are merged.  A clause that mentions one literal only
    drops its switch link, which keeps the clause neuron at +1 exactly when
    the literal is false.  A clause containing ``x`` and ``-x`` is always
    satisfied; its neuron keeps only the bias link and is constantly -1.
    """
    m, n = inst.num_vars, len(inst.clauses)
    if n == 0:
        raise ValueError("instance has no clauses")
    switch = m + 1
    w = np.ones((m + 2, n), dtype=np.int8)
    mask = np.zeros((m + 2, n), dtype=bool)
    for col, clause in enumerate(inst.clauses):
        lits = set(clause)
        w[0, col], mask[0, col] = -1, True
        if any(-l in lits for l in lits):
            continue
        for l in lits:
            w[abs(l), col] = -1 if l > 0 else 1
            mask[abs(l), col] = True
        if len(lits) > 1:
            w[switch, col], mask[switch, col] = -1, True
    model = BnnModel((m + 1, n), (w,), (mask,))
    fan_in = model.fan_in(1)
    # output -1 in the bipolar domain is a count below ceil(n / 2)
    prop = conj(
        InputAtom(switch, 1),
        *(OutputAtom(i, "<", int(threshold(fan_in[i - 1]))) for i in range(1, n + 1)),
    )
    return model, prop


def decode_sat3_witness(inst: Cnf3Instance, x) -> dict:
    """Variable assignment from a bipolar counterexample of ``sat3_to_bnn(inst)``."""
    x = np.asarray(x)
    if x.shape != (inst.num_vars + 1,):
        raise ValueError(f"expected {inst.num_vars + 1} inputs for this instance, got {x.shape}")
    return {v: bool(x[v - 1] > 0) for v in range(1, inst.num_vars + 1)}


# -- bipartite graph text format ----------------------------------------------------

def parse_graph(text: str) -> BipartiteGraph:
    """Lines ``left a b ...``, ``right c d ...`` and ``edge a c``."""
    left, right, edges = [], [], []
    for line in text.splitlines():
        toks = line.split("#", 1)[0].split()
        if not toks:
            continue
        key, vals = toks[0], [int(t) for t in toks[1:]]
        if key == "left":
            left += vals
        elif key == "right":
            right += vals
        elif key == "edge" and len(vals) == 2:
            edges.append(tuple(vals))
        else:
            raise ValueError(f"cannot parse graph line {line!r}")
    return BipartiteGraph(tuple(left), tuple(right), frozenset(edges))


def format_graph(g: BipartiteGraph) -> str:
    lines = ["left " + " ".join(map(str, g.left)), "right " + " ".join(map(str, g.right))]
    lines += [f"edge {a} {b}" for a, b in sorted(g.edges)]
    return "\n".join(lines) + "\n"


def format_matrix(bits, mask) -> str:
    """One row per neuron, one entry per input: the weight bit or '.' for no link."""
    bits, mask = np.asarray(bits), np.asarray(mask)
    rows = []
    for i in range(bits.shape[1]):
        rows.append(" ".join(str(int(b)) if p else "." for b, p in zip(bits[:, i], mask[:, i])))
    return "\n".join(rows) + "\n"


def parse_matrix(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`format_matrix`; returns ``(bits, mask)`` with inputs as rows."""
    rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows must be nonempty and of equal length")
    bits = np.zeros((len(rows[0]), len(rows)), dtype=np.uint8)
    mask = np.ones_like(bits, dtype=bool)
    for i, row in enumerate(rows):
        for j, tok in enumerate(row):
            if tok == ".":
                mask[j, i] = False
            elif tok in ("0", "1"):
                bits[j, i] = int(tok)
            else:
                raise ValueError(f"matrix entry {tok!r} is not 0, 1 or '.'")
    return bits, mask
