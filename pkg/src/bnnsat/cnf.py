"""Tseitin encoding of miters, DIMACS I/O and SAT backends."""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .circuit import Circuit

SAT, UNSAT, UNKNOWN = "SAT", "UNSAT", "UNKNOWN"


class SolverError(RuntimeError):
    pass


@dataclass
class CnfFormula:
    num_vars: int = 0
    clauses: list = field(default_factory=list)
    varmap: dict = field(default_factory=dict)  # circuit net -> variable
    input_vars: list = field(default_factory=list)
    output_var: int | None = None

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


class _Encoder:
    def __init__(self, circuit: Circuit):
        self.cnf = CnfFormula(num_vars=circuit.n_nets)
        self.cnf.varmap = {net: net + 1 for net in range(circuit.n_nets)}
        self._append = self.cnf.clauses.append

    def add(self, clause):
        if len({abs(l) for l in clause}) < len(clause):
            # the same net feeding a gate twice
            lits = set(clause)
            if any(-l in lits for l in lits):
                return
            clause = tuple(sorted(lits, key=abs))
        self._append(clause)

    def fresh(self) -> int:
        self.cnf.num_vars += 1
        return self.cnf.num_vars

    def AND(self, y, a, b):
        self.add((-y, a))
        self.add((-y, b))
        self.add((y, -a, -b))

    def OR(self, y, a, b):
        self.add((y, -a))
        self.add((y, -b))
        self.add((-y, a, b))

    def NOT(self, y, a):
        self.add((y, a))
        self.add((-y, -a))

    def XOR(self, y, a, b):
        self.add((-y, a, b))
        self.add((-y, -a, -b))
        self.add((y, -a, b))
        self.add((y, a, -b))

    def XNOR(self, y, a, b):
        self.XOR(-y, a, b)


def tseitin_encode(circuit: Circuit) -> CnfFormula:
    """One variable per net (net ``k`` is variable ``k + 1``), gate clauses, and a
    unit clause asserting the miter output.  Adders are expanded into
    XOR/AND/OR gates with auxiliary variables."""
    if circuit.output is None:
        raise ValueError("circuit has no designated output")
    enc = _Encoder(circuit)
    v = enc.cnf.varmap
    for kind, ins, outs in circuit.gates:
        if kind == "CONST":
            enc.add((v[outs[0]] if ins[0] else -v[outs[0]],))
            continue
        a = v[ins[0]]
        if kind == "NOT":
            enc.NOT(v[outs[0]], a)
            continue
        b = v[ins[1]]
        if kind == "AND":
            enc.AND(v[outs[0]], a, b)
        elif kind == "OR":
            enc.OR(v[outs[0]], a, b)
        elif kind == "XOR":
            enc.XOR(v[outs[0]], a, b)
        elif kind == "XNOR":
            enc.XNOR(v[outs[0]], a, b)
        elif kind == "HALF_ADDER":
            enc.XOR(v[outs[0]], a, b)
            enc.AND(v[outs[1]], a, b)
        elif kind == "FULL_ADDER":
            c = v[ins[2]]
            t, g1, g2 = enc.fresh(), enc.fresh(), enc.fresh()
            enc.XOR(t, a, b)
            enc.XOR(v[outs[0]], t, c)
            enc.AND(g1, a, b)
            enc.AND(g2, t, c)
            enc.OR(v[outs[1]], g1, g2)
        else:
            raise ValueError(f"unknown gate kind {kind}")
    cnf = enc.cnf
    cnf.input_vars = [v[n] for n in circuit.inputs]
    cnf.output_var = v[circuit.output]
    cnf.clauses.append((cnf.output_var,))
    return cnf


# -- DIMACS ------------------------------------------------------------------------

def emit_dimacs(cnf: CnfFormula) -> str:
    parts = [f"c input {k} var {var}\n" for k, var in enumerate(cnf.input_vars, start=1)]
    if cnf.output_var is not None:
        parts.append(f"c output var {cnf.output_var}\n")
    parts.append(f"p cnf {cnf.num_vars} {len(cnf.clauses)}\n")
    parts.extend(" ".join(map(str, c)) + " 0\n" for c in cnf.clauses)
    return "".join(parts)


def write_dimacs(cnf: CnfFormula, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_dimacs(cnf))


def parse_dimacs(text: str) -> CnfFormula:
    """Read a DIMACS CNF, including the input map comments written by :func:`emit_dimacs`."""
    cnf = CnfFormula()
    declared = None
    current: list[int] = []
    inputs = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        if line.startswith("c"):
            toks = line.split()
            if len(toks) == 5 and toks[1] == "input" and toks[3] == "var":
                inputs[int(toks[2])] = int(toks[4])
            elif len(toks) == 4 and toks[1] == "output" and toks[2] == "var":
                cnf.output_var = int(toks[3])
            continue
        if line.startswith("p"):
            toks = line.split()
            if len(toks) != 4 or toks[1] != "cnf":
                raise ValueError(f"bad DIMACS header: {line!r}")
            cnf.num_vars, declared = int(toks[2]), int(toks[3])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                cnf.clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if current:
        cnf.clauses.append(tuple(current))
    if declared is not None and declared != len(cnf.clauses):
        raise ValueError(f"header declares {declared} clauses, found {len(cnf.clauses)}")
    cnf.input_vars = [inputs[k] for k in sorted(inputs)]
    return cnf


# -- solving -----------------------------------------------------------------------

@dataclass
class SolveResult:
    verdict: str
    witness: dict | None = None  # variable -> bool
    time: float = 0.0
    solver: str = ""

    def __post_init__(self):
        if (self.witness is not None) != (self.verdict == SAT):
            raise ValueError("a witness is present exactly for SAT results")


class Backend(Protocol):
    name: str

    def run(self, cnf: CnfFormula, timeout: float | None) -> tuple[str, list[int] | None]:
        """Return a verdict and, for SAT, a list of true/false literals."""


class PysatBackend:
    """In-process solver from the python-sat package.

    CaDiCaL ignores interrupts, so a timed CaDiCaL run is moved into a child
    process that can be killed.
    """

    def __init__(self, solver: str = "cadical153"):
        self.solver = solver
        self.name = f"pysat:{solver}"

    def run(self, cnf, timeout):
        from pysat.solvers import Solver

        if timeout is not None and self.solver.startswith("cadical"):
            cmd = [sys.executable, "-m", "bnnsat.pysat_runner", "--solver", self.solver]
            return SubprocessBackend(cmd).run(cnf, timeout)
        with Solver(name=self.solver, bootstrap_with=cnf.clauses) as s:
            if timeout is None:
                ok = s.solve()
            else:
                timer = threading.Timer(timeout, s.interrupt)
                timer.start()
                try:
                    ok = s.solve_limited(expect_interrupt=True)
                finally:
                    timer.cancel()
            if ok is None:
                return UNKNOWN, None
            return (SAT, s.get_model()) if ok else (UNSAT, None)


class SubprocessBackend:
    """External solver: DIMACS file as last argument, SAT-competition output."""

    def __init__(self, command):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise ValueError("empty solver command")
        self.name = " ".join(self.command)

    def run(self, cnf, timeout):
        fd, path = tempfile.mkstemp(suffix=".cnf")
        os.close(fd)
        try:
            write_dimacs(cnf, path)
            try:
                proc = subprocess.run(
                    self.command + [path], capture_output=True, text=True, timeout=timeout
                )
            except subprocess.TimeoutExpired:
                return UNKNOWN, None
            except OSError as exc:
                raise SolverError(f"cannot launch solver {self.name!r}: {exc}") from exc
        finally:
            os.unlink(path)
        return parse_solver_output(proc.stdout, proc.returncode)


def parse_solver_output(stdout: str, returncode: int | None = None):
    status, lits = None, []
    for line in stdout.splitlines():
        if line.startswith("s "):
            status = line[2:].strip()
        elif line.startswith("v "):
            lits.extend(int(t) for t in line[2:].split() if t != "0")
    if status is None and returncode in (10, 20):
        status = "SATISFIABLE" if returncode == 10 else "UNSATISFIABLE"
    if status == "SATISFIABLE":
        return SAT, lits
    if status == "UNSATISFIABLE":
        return UNSAT, None
    if status in ("UNKNOWN", "INDETERMINATE") or status is None:
        return UNKNOWN, None
    raise SolverError(f"unexpected solver status {status!r}")


def make_backend(spec: str | None = None) -> Backend:
    """``pysat`` / ``pysat:<name>`` selects an in-process solver; anything else
    is a command line for :class:`SubprocessBackend`."""
    if spec is None or spec == "pysat":
        return PysatBackend()
    if spec.startswith("pysat:"):
        return PysatBackend(spec.split(":", 1)[1])
    return SubprocessBackend(spec)


def check_assignment(cnf: CnfFormula, assignment: dict) -> bool:
    for clause in cnf.clauses:
        if not any(assignment.get(abs(l), False) == (l > 0) for l in clause):
            return False
    return True


def solve(cnf: CnfFormula, backend: Backend | str | None = None, timeout: float | None = None) -> SolveResult:
    """Solve ``cnf``; a SAT answer is re-checked against every clause."""
    if timeout is not None and timeout <= 0:
        raise ValueError("timeout must be positive")
    if backend is None or isinstance(backend, str):
        backend = make_backend(backend)
    start = time.perf_counter()
    verdict, lits = backend.run(cnf, timeout)
    elapsed = time.perf_counter() - start
    if verdict != SAT:
        return SolveResult(verdict, None, elapsed, backend.name)
    assignment = {v: False for v in range(1, cnf.num_vars + 1)}
    for lit in lits:
        assignment[abs(lit)] = lit > 0
    if not check_assignment(cnf, assignment):
        raise SolverError(f"solver {backend.name} returned an assignment violating the formula")
    return SolveResult(SAT, assignment, elapsed, backend.name)


def decode_counterexample(result: SolveResult, cnf: CnfFormula, n_inputs: int | None = None) -> np.ndarray:
    """Bipolar network input read off a satisfying assignment."""
    if result.verdict != SAT or result.witness is None:
        raise ValueError(f"no counterexample in a {result.verdict} result")
    if n_inputs is not None and n_inputs != len(cnf.input_vars):
        raise ValueError(f"formula has {len(cnf.input_vars)} inputs, model expects {n_inputs}")
    return np.array([1 if result.witness[v] else -1 for v in cnf.input_vars], dtype=np.int64)
