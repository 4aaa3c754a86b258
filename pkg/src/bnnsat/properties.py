"""Risk properties over network inputs and output counts.

Grammar (lowest to highest precedence)::

    prop    := or ( "->" prop )?          # right associative
    or      := and ( "||" and )*
    and     := unary ( "&&" unary )*
    unary   := "!" unary | "(" prop ")" | atom
    atom    := "out[" i "]" rel c | "in[" j "]" ("==" | "=") b
    rel     := ">=" | "<=" | "==" | "=" | ">" | "<"

Indices are 1-based: ``out[i]`` is the count of output neuron ``i`` and
``in[j]`` is input bit ``x_j``.  Everything lives in the 0/1 domain.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np


class PropertyError(ValueError):
    pass


RELATIONS = (">=", "<=", "==", ">", "<")


@dataclass(frozen=True)
class OutputAtom:
    index: int
    rel: str
    const: int


@dataclass(frozen=True)
class InputAtom:
    index: int
    bit: int


@dataclass(frozen=True)
class Not:
    arg: "Property"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    left: "Property"
    right: "Property"


Property = Union[OutputAtom, InputAtom, Not, And, Or, Implies]


def conj(*args: Property) -> Property:
    return args[0] if len(args) == 1 else And(tuple(args))


def disj(*args: Property) -> Property:
    return args[0] if len(args) == 1 else Or(tuple(args))


# -- parsing ---------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<kw>out|in)\s*\[\s*(?P<idx>\d+)\s*\]|(?P<op>->|&&|\|\||>=|<=|==|=|>|<|!|\(|\))"
    r"|(?P<num>[+-]?\d+))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    toks, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PropertyError(f"syntax error at column {pos + 1}: {text[pos:pos + 10]!r}")
        if m.group("kw"):
            toks.append((m.group("kw"), m.group("idx")))
        elif m.group("op"):
            op = m.group("op")
            toks.append(("op", "==" if op == "=" else op))
        else:
            toks.append(("num", m.group("num")))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else ("eof", "")

    def take(self, kind=None, value=None):
        tok = self.peek()
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            raise PropertyError(f"syntax error: expected {want!r}, got {tok[1] or 'end of input'!r}")
        self.pos += 1
        return tok

    def parse(self):
        if not self.toks:
            raise PropertyError("empty property")
        p = self.prop()
        if self.peek()[0] != "eof":
            raise PropertyError(f"syntax error: unexpected {self.peek()[1]!r}")
        return p

    def prop(self):
        left = self.disjunction()
        if self.peek() == ("op", "->"):
            self.take()
            return Implies(left, self.prop())
        return left

    def disjunction(self):
        args = [self.conjunction()]
        while self.peek() == ("op", "||"):
            self.take()
            args.append(self.conjunction())
        return disj(*args)

    def conjunction(self):
        args = [self.unary()]
        while self.peek() == ("op", "&&"):
            self.take()
            args.append(self.unary())
        return conj(*args)

    def unary(self):
        tok = self.peek()
        if tok == ("op", "!"):
            self.take()
            return Not(self.unary())
        if tok == ("op", "("):
            self.take()
            p = self.prop()
            self.take("op", ")")
            return p
        if tok[0] == "out":
            self.take()
            rel = self.take("op")[1]
            if rel not in RELATIONS:
                raise PropertyError(f"syntax error: {rel!r} is not a relation")
            return OutputAtom(int(tok[1]), rel, int(self.take("num")[1]))
        if tok[0] == "in":
            self.take()
            self.take("op", "==")
            bit = int(self.take("num")[1])
            if bit not in (0, 1):
                raise PropertyError(f"input atoms compare against 0 or 1, got {bit}")
            return InputAtom(int(tok[1]), bit)
        raise PropertyError(f"syntax error: unexpected {tok[1] or 'end of input'!r}")


def parse_property(text: str) -> Property:
    return _Parser(text).parse()


def format_property(p: Property) -> str:
    def sub(q):
        s = format_property(q)
        return f"({s})" if isinstance(q, (And, Or, Implies)) else s

    if isinstance(p, OutputAtom):
        return f"out[{p.index}] {p.rel} {p.const}"
    if isinstance(p, InputAtom):
        return f"in[{p.index}] == {p.bit}"
    if isinstance(p, Not):
        inner = format_property(p.arg)
        return "!" + (inner if isinstance(p.arg, Not) else f"({inner})")
    if isinstance(p, And):
        return " && ".join(sub(a) for a in p.args)
    if isinstance(p, Or):
        return " || ".join(sub(a) for a in p.args)
    if isinstance(p, Implies):
        return f"{sub(p.left)} -> {sub(p.right)}"
    raise TypeError(p)


def atoms(p: Property):
    if isinstance(p, (OutputAtom, InputAtom)):
        yield p
    elif isinstance(p, Not):
        yield from atoms(p.arg)
    elif isinstance(p, (And, Or)):
        for a in p.args:
            yield from atoms(a)
    elif isinstance(p, Implies):
        yield from atoms(p.left)
        yield from atoms(p.right)


def validate_property(p: Property, n_inputs: int, output_fan_in) -> None:
    """Check indices and constants against a model's shape.

    ``output_fan_in[i - 1]`` is the number of links into output neuron ``i``.
    Constants may range over ``0..fan_in + 1``; the upper end expresses an
    impossible threshold.
    """
    for a in atoms(p):
        if isinstance(a, InputAtom):
            if not 1 <= a.index <= n_inputs:
                raise PropertyError(f"in[{a.index}] outside 1..{n_inputs}")
        else:
            if not 1 <= a.index <= len(output_fan_in):
                raise PropertyError(f"out[{a.index}] outside 1..{len(output_fan_in)}")
            top = int(output_fan_in[a.index - 1]) + 1
            if not 0 <= a.const <= top:
                raise PropertyError(f"constant {a.const} in out[{a.index}] outside 0..{top}")


# -- reference semantics -----------------------------------------------------------

def _compare(values, rel, c):
    if rel == ">=":
        return values >= c
    if rel == "<=":
        return values <= c
    if rel == "==":
        return values == c
    if rel == ">":
        return values > c
    if rel == "<":
        return values < c
    raise PropertyError(f"unknown relation {rel!r}")


def _eval(p, bits, counts):
    if isinstance(p, OutputAtom):
        return _compare(counts[..., p.index - 1], p.rel, p.const)
    if isinstance(p, InputAtom):
        return bits[..., p.index - 1] == p.bit
    if isinstance(p, Not):
        return np.logical_not(_eval(p.arg, bits, counts))
    if isinstance(p, And):
        return np.logical_and.reduce([_eval(a, bits, counts) for a in p.args])
    if isinstance(p, Or):
        return np.logical_or.reduce([_eval(a, bits, counts) for a in p.args])
    if isinstance(p, Implies):
        return np.logical_or(np.logical_not(_eval(p.left, bits, counts)), _eval(p.right, bits, counts))
    raise TypeError(p)


def eval_property(p: Property, input_bits, output_counts):
    """Truth value of ``p``.  Accepts single vectors or row-stacked batches."""
    bits, counts = np.asarray(input_bits), np.asarray(output_counts)
    for a in atoms(p):
        arr, n = (bits, a.index) if isinstance(a, InputAtom) else (counts, a.index)
        if n > arr.shape[-1]:
            raise PropertyError(f"{format_property(a)} does not fit a vector of length {arr.shape[-1]}")
    res = _eval(p, bits, counts)
    return bool(res) if np.ndim(res) == 0 else res
