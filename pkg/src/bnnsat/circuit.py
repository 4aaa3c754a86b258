"""Gate-level miter construction for BNN verification.

Nets are integers.  Gates are kept in creation order, which is a topological
order.  Constants are folded while building: XNOR against a constant weight
becomes a wire or a NOT, constant operands of AND/OR/XOR disappear, and
constant contributions to a count are carried as an integer offset instead
of entering the adder tree.

Counts are :class:`CountNet` bundles: binary bits (LSB first) plus a
constant offset.  Sums are built as a tree of ripple-carry adders that
always joins the two narrowest operands, so a shared count enters a neuron's
sum as one operand.  A threshold against a constant is a single comparator
chain.
"""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .factoring import Factoring, FactoringSet, is_valid_factoring, non_overlapping
from .model import BnnModel, threshold
from .properties import And, Implies, InputAtom, Not, Or, OutputAtom, Property, PropertyError

GATE_KINDS = ("CONST", "NOT", "AND", "OR", "XOR", "XNOR", "HALF_ADDER", "FULL_ADDER")


class CircuitError(ValueError):
    pass


class Gate(NamedTuple):
    kind: str
    inputs: tuple
    outputs: tuple


@dataclass
class CountNet:
    bits: list
    offset: int = 0
    max_value: int = 0  # largest value of the binary part

    @property
    def width(self) -> int:
        return len(self.bits)


@dataclass
class SharedCounter:
    factoring: Factoring
    count: CountNet
    subscribers: tuple


class Circuit:
    def __init__(self, n_inputs: int = 0):
        self.n_nets = 0
        self.gates: list[Gate] = []
        self.inputs = [self._new() for _ in range(n_inputs)]
        self.output: int | None = None
        self.count_nets: dict[str, CountNet] = {}
        self._const: dict[int, int] = {}
        self._const_of: dict[int, int] = {}
        self._negation: dict[int, int] = {}  # NOT output -> its operand

    def _new(self) -> int:
        self.n_nets += 1
        return self.n_nets - 1

    def _gate(self, kind, inputs, n_out=1):
        outs = tuple(self._new() for _ in range(n_out))
        self.gates.append(Gate(kind, tuple(inputs), outs))
        return outs if n_out > 1 else outs[0]

    # -- primitive gates with constant folding --

    def const(self, value: int) -> int:
        value = int(bool(value))
        if value not in self._const:
            net = self._new()
            self.gates.append(Gate("CONST", (value,), (net,)))
            self._const[value] = net
            self._const_of[net] = value
        return self._const[value]

    def const_value(self, net: int):
        return self._const_of.get(net)

    def NOT(self, a):
        c = self.const_value(a)
        if c is not None:
            return self.const(1 - c)
        if a in self._negation:
            return self._negation[a]
        out = self._gate("NOT", (a,))
        self._negation[out] = a
        return out

    def AND(self, a, b):
        ca, cb = self.const_value(a), self.const_value(b)
        if ca == 0 or cb == 0:
            return self.const(0)
        if ca == 1:
            return b
        if cb == 1 or a == b:
            return a
        return self._gate("AND", (a, b))

    def OR(self, a, b):
        ca, cb = self.const_value(a), self.const_value(b)
        if ca == 1 or cb == 1:
            return self.const(1)
        if ca == 0:
            return b
        if cb == 0 or a == b:
            return a
        return self._gate("OR", (a, b))

    def XOR(self, a, b):
        ca, cb = self.const_value(a), self.const_value(b)
        if ca is not None and cb is not None:
            return self.const(ca ^ cb)
        if ca is not None:
            return b if ca == 0 else self.NOT(b)
        if cb is not None:
            return a if cb == 0 else self.NOT(a)
        if a == b:
            return self.const(0)
        return self._gate("XOR", (a, b))

    def XNOR(self, a, b):
        ca, cb = self.const_value(a), self.const_value(b)
        if ca is not None and cb is not None:
            return self.const(int(ca == cb))
        if ca is not None:
            return b if ca == 1 else self.NOT(b)
        if cb is not None:
            return a if cb == 1 else self.NOT(a)
        if a == b:
            return self.const(1)
        return self._gate("XNOR", (a, b))

    def AND_all(self, nets):
        out = self.const(1)
        for n in nets:
            out = self.AND(out, n)
        return out

    def OR_all(self, nets):
        out = self.const(0)
        for n in nets:
            out = self.OR(out, n)
        return out

    def half_adder(self, a, b):
        return self._gate("HALF_ADDER", (a, b), 2)

    def full_adder(self, a, b, c):
        return self._gate("FULL_ADDER", (a, b, c), 2)


# -- arithmetic ----------------------------------------------------------------

def _add_pair(circuit: Circuit, a: CountNet, b: CountNet) -> CountNet:
    """Ripple-carry sum of two binary counts (offsets are left to the caller)."""
    max_value = a.max_value + b.max_value
    bits, carry = [], None
    for k in range(max_value.bit_length()):
        ops = [x for x in (a.bits[k] if k < a.width else None,
                           b.bits[k] if k < b.width else None, carry)
               if x is not None and circuit.const_value(x) != 0]
        carry = None
        if not ops:
            bits.append(circuit.const(0))
        elif len(ops) == 1:
            bits.append(ops[0])
        elif len(ops) == 2:
            s, carry = circuit.half_adder(*ops)
            bits.append(s)
        else:
            s, carry = circuit.full_adder(*ops)
            bits.append(s)
    # a carry out of the top bit is provably zero
    return CountNet(bits, 0, max_value)


def add_counts(circuit: Circuit, operands: Sequence[CountNet]) -> CountNet:
    """Sum of counts by an adder tree that always joins the two smallest operands.

    An operand enters the tree as a leaf, so a shared count is a ready-made
    subtree for every neuron that uses it.
    """
    offset = 0
    heap = []
    for op in operands:
        offset += op.offset
        bits, max_value = [], op.max_value
        for k, bit in enumerate(op.bits):
            c = circuit.const_value(bit)
            if c is None:
                bits.append(bit)
                continue
            # constant bits move into the offset
            offset += c << k
            bits.append(circuit.const(0))
        if any(circuit.const_value(b) is None for b in bits):
            heapq.heappush(heap, (max_value, len(heap), CountNet(bits, 0, max_value)))
    if not heap:
        return CountNet([], offset, 0)
    seq = len(heap)
    while len(heap) > 1:
        _, _, a = heapq.heappop(heap)
        _, _, b = heapq.heappop(heap)
        total = _add_pair(circuit, a, b)
        heapq.heappush(heap, (total.max_value, seq, total))
        seq += 1
    result = heap[0][2]
    return CountNet(result.bits, offset, result.max_value)


def bit_count(circuit: Circuit, bits: Sequence[int]) -> CountNet:
    """Population count of single bits."""
    return add_counts(circuit, [CountNet([b], 0, 1) for b in bits])


def compare_geq(circuit: Circuit, count: CountNet, k: int) -> int:
    """Net that is 1 iff ``count >= k``."""
    k = k - count.offset
    if k <= 0:
        return circuit.const(1)
    if k > count.max_value:
        return circuit.const(0)
    ge = circuit.const(1)
    for pos, bit in enumerate(count.bits):
        if k >> pos & 1:
            ge = circuit.AND(bit, ge)
        else:
            ge = circuit.OR(bit, ge)
    return ge


def compare(circuit: Circuit, count: CountNet, rel: str, c: int) -> int:
    if rel == ">=":
        return compare_geq(circuit, count, c)
    if rel == ">":
        return compare_geq(circuit, count, c + 1)
    if rel == "<":
        return circuit.NOT(compare_geq(circuit, count, c))
    if rel == "<=":
        return circuit.NOT(compare_geq(circuit, count, c + 1))
    if rel == "==":
        return circuit.AND(compare_geq(circuit, count, c), circuit.NOT(compare_geq(circuit, count, c + 1)))
    raise PropertyError(f"unknown relation {rel!r}")


# -- neuron, layer and network modules ---------------------------------------------

def _xnor_leaves(circuit: Circuit, weight_bits, inputs, rows) -> tuple[list, int]:
    """One-bit counts ``xnor(w_j, x_j)`` for ``rows``; constant inputs only add to the offset."""
    leaves, offset = [], 0
    for j in rows:
        x, w = inputs[j], int(weight_bits[j])
        cx = circuit.const_value(x)
        if cx is not None:
            offset += int(cx == w)
        else:
            leaves.append((j, CountNet([x if w == 1 else circuit.NOT(x)], 0, 1)))
    return leaves, offset


def build_shared_counter(circuit: Circuit, f: Factoring, weight_bits_col, inputs) -> SharedCounter:
    leaves, offset = _xnor_leaves(circuit, weight_bits_col, inputs, sorted(f.inputs))
    count = add_counts(circuit, [leaf for _, leaf in leaves])
    count.offset += offset
    return SharedCounter(f, count, tuple(sorted(f.neurons)))


def build_neuron_module(
    circuit: Circuit,
    weight_bits,
    inputs: Sequence[int],
    shared: Sequence[SharedCounter] = (),
    present=None,
    output_layer: bool = False,
):
    """One neuron: XNOR with its weights, count, and threshold.

    ``weight_bits`` and ``present`` are the neuron's column (bias first);
    ``inputs[0]`` is the constant-1 bias net.  Inputs covered by a shared
    counter are taken from that counter instead of being counted again.
    Returns the output bit, or the count for an output-layer neuron.
    """
    n = len(weight_bits)
    present = np.ones(n, dtype=bool) if present is None else np.asarray(present, dtype=bool)
    if len(inputs) != n:
        raise CircuitError(f"neuron has {n} weights but {len(inputs)} inputs")
    covered: set[int] = set()
    for sc in shared:
        J = sc.factoring.inputs
        if covered & J:
            raise CircuitError("shared counters overlap on inputs " + str(sorted(covered & J)))
        if not all(0 <= j < n and present[j] for j in J):
            raise CircuitError(f"shared inputs {sorted(J)} are not within the neuron's fan-in")
        covered |= J
    private = [j for j in range(n) if present[j] and j not in covered]
    leaves, offset = _xnor_leaves(circuit, weight_bits, inputs, private)
    # a shared count takes the place of its lowest input in the operand order
    leaves += [(min(sc.factoring.inputs), sc.count) for sc in shared]
    leaves.sort(key=lambda t: t[0])
    total = add_counts(circuit, [leaf for _, leaf in leaves])
    total.offset += offset
    if output_layer:
        return total
    return compare_geq(circuit, total, int(threshold(int(present.sum()))))


def _check_factorings(model: BnnModel, factorings):
    if factorings is None:
        return [FactoringSet(layer=l) for l in range(1, model.layer_count + 1)]
    factorings = list(factorings)
    if len(factorings) != model.layer_count:
        raise CircuitError(f"expected {model.layer_count} factoring sets, got {len(factorings)}")
    for l, fs in enumerate(factorings, start=1):
        fl = list(fs)
        for f in fl:
            if not is_valid_factoring(f, model.weights[l - 1], model.mask(l)):
                raise CircuitError(f"layer {l}: factoring {f} is invalid for the weights")
        for a in range(len(fl)):
            for b in range(a + 1, len(fl)):
                if not non_overlapping(fl[a], fl[b]):
                    raise CircuitError(f"layer {l}: factorings {fl[a]} and {fl[b]} overlap")
    return factorings


def build_bnn_module(circuit: Circuit, model: BnnModel, factorings=None):
    """Wire neuron modules layer by layer.

    Returns ``(hidden, outputs)``: the bit nets of each hidden layer and the
    output-layer counts.
    """
    if model.layer_count < 1:
        raise CircuitError("model has no layers")
    if len(circuit.inputs) != model.input_size:
        raise CircuitError("circuit inputs do not match the model")
    factorings = _check_factorings(model, factorings)
    acts = list(circuit.inputs)
    hidden = []
    for l in range(1, model.layer_count + 1):
        wb, present = model.weight_bits(l), model.mask(l)
        nets = [circuit.const(1)] + acts
        subs: dict[int, list[SharedCounter]] = {}
        for t, f in enumerate(factorings[l - 1]):
            rep = min(f.neurons) - 1
            sc = build_shared_counter(circuit, f, wb[:, rep], nets)
            circuit.count_nets[f"L{l}.shared{t}"] = sc.count
            for i in f.neurons:
                subs.setdefault(i, []).append(sc)
        last = l == model.layer_count
        outs = []
        for i in range(1, model.dims[l] + 1):
            res = build_neuron_module(
                circuit, wb[:, i - 1], nets, subs.get(i, ()), present[:, i - 1], output_layer=last
            )
            if last:
                circuit.count_nets[f"out[{i}]"] = res
            outs.append(res)
        if last:
            return hidden, outs
        hidden.append(outs)
        acts = outs
    raise AssertionError("unreachable")


def build_property_module(
    circuit: Circuit, prop: Property, inputs: Sequence[int], outputs: Sequence[CountNet], fan_in=None
) -> int:
    """Net that is 1 iff ``prop`` holds for the given input bits and output counts.

    ``fan_in[i - 1]`` bounds the constants allowed for ``out[i]`` (up to
    fan-in + 1); without it the bound is the largest value the count can take.
    """

    def go(p):
        if isinstance(p, OutputAtom):
            if not 1 <= p.index <= len(outputs):
                raise PropertyError(f"out[{p.index}] outside 1..{len(outputs)}")
            cn = outputs[p.index - 1]
            top = cn.offset + cn.max_value if fan_in is None else int(fan_in[p.index - 1])
            if not 0 <= p.const <= top + 1:
                raise PropertyError(f"threshold {p.const} outside the range of out[{p.index}]")
            return compare(circuit, cn, p.rel, p.const)
        if isinstance(p, InputAtom):
            if not 1 <= p.index <= len(inputs):
                raise PropertyError(f"in[{p.index}] outside 1..{len(inputs)}")
            x = inputs[p.index - 1]
            return x if p.bit == 1 else circuit.NOT(x)
        if isinstance(p, Not):
            return circuit.NOT(go(p.arg))
        if isinstance(p, And):
            return circuit.AND_all([go(a) for a in p.args])
        if isinstance(p, Or):
            return circuit.OR_all([go(a) for a in p.args])
        if isinstance(p, Implies):
            return circuit.OR(circuit.NOT(go(p.left)), go(p.right))
        raise TypeError(p)

    return go(prop)


def build_miter(model: BnnModel, prop: Property, factorings=None) -> Circuit:
    """BNN module plus property module; the output is 1 exactly on risky inputs."""
    circuit = Circuit(model.input_size)
    _, outs = build_bnn_module(circuit, model, factorings)
    circuit.output = build_property_module(circuit, prop, circuit.inputs, outs, model.fan_in(model.layer_count))
    return circuit


# -- simulation and statistics -------------------------------------------------------

def simulate_batch(circuit: Circuit, X) -> np.ndarray:
    """Values of every net for each row of ``X``; shape ``(n_nets, N)``."""
    X = np.atleast_2d(np.asarray(X)).astype(bool)
    if X.shape[1] != len(circuit.inputs):
        raise CircuitError(f"expected {len(circuit.inputs)} input bits, got {X.shape[1]}")
    vals = np.zeros((circuit.n_nets, X.shape[0]), dtype=bool)
    for k, net in enumerate(circuit.inputs):
        vals[net] = X[:, k]
    for g in circuit.gates:
        kind, ins, outs = g
        if kind == "CONST":
            vals[outs[0]] = bool(ins[0])
            continue
        a = vals[ins[0]]
        if kind == "NOT":
            vals[outs[0]] = ~a
            continue
        b = vals[ins[1]]
        if kind == "AND":
            vals[outs[0]] = a & b
        elif kind == "OR":
            vals[outs[0]] = a | b
        elif kind == "XOR":
            vals[outs[0]] = a ^ b
        elif kind == "XNOR":
            vals[outs[0]] = ~(a ^ b)
        elif kind == "HALF_ADDER":
            vals[outs[0]], vals[outs[1]] = a ^ b, a & b
        elif kind == "FULL_ADDER":
            c = vals[ins[2]]
            vals[outs[0]] = a ^ b ^ c
            vals[outs[1]] = (a & b) | (c & (a ^ b))
        else:
            raise CircuitError(f"unknown gate kind {kind}")
    return vals


def simulate(circuit: Circuit, bits) -> tuple[int, np.ndarray]:
    """Output bit and all net values for one input vector."""
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise CircuitError("simulate takes a single input vector")
    vals = simulate_batch(circuit, bits[None, :])[:, 0]
    return int(vals[circuit.output]), vals


def count_value(count: CountNet, values) -> np.ndarray:
    """Integer value of a count bundle from simulated net values."""
    total = np.full(np.shape(values[0]) if len(values) else (), count.offset, dtype=np.int64)
    for k, bit in enumerate(count.bits):
        total = total + (np.asarray(values[bit], dtype=np.int64) << k)
    return total


def gate_count(circuit: Circuit) -> dict[str, int]:
    counts = Counter(g.kind for g in circuit.gates)
    stats = {k: counts.get(k, 0) for k in GATE_KINDS}
    stats["total"] = sum(c for k, c in counts.items() if k != "CONST")
    stats["xnor_and_adders"] = stats["NOT"] + stats["XNOR"] + stats["HALF_ADDER"] + stats["FULL_ADDER"]
    return stats


def check_acyclic(circuit: Circuit) -> bool:
    defined = set(circuit.inputs)
    for g in circuit.gates:
        if g.kind != "CONST" and not all(i in defined for i in g.inputs):
            return False
        defined.update(g.outputs)
    return circuit.output is None or circuit.output in defined


def dump_netlist(circuit: Circuit) -> str:
    lines = [f"inputs {' '.join(map(str, circuit.inputs))}"]
    for g in circuit.gates:
        lines.append(f"{','.join(map(str, g.outputs))} {g.kind} {' '.join(map(str, g.inputs))}")
    lines.append(f"output {circuit.output}")
    return "\n".join(lines) + "\n"
