"""Inter-neuron factoring of counting units.

A factoring ``(I, J)`` groups neurons ``I`` that carry identical weights on
the inputs ``J``; the count over ``J`` can then be computed once and shared.
Its saving is ``(|I| - 1) * |J|``.

Weight matrices follow the layout of :mod:`bnnsat.model`: rows are inputs
``j`` (row 0 is the bias), columns are neurons, and neuron ``i`` lives in
column ``i - 1``.  Matrices may be given in either the bipolar or the 0/1
domain; agreement is decided on the 0/1 image.  An optional boolean ``mask``
marks which links exist; absent links never take part in a factoring.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_BLOCK = 64


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Factoring:
    neurons: frozenset[int]
    inputs: frozenset[int]
    layer: int = 1

    def __post_init__(self):
        object.__setattr__(self, "neurons", frozenset(self.neurons))
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        if len(self.neurons) < 2:
            raise ValueError(f"a factoring needs at least two neurons, got {sorted(self.neurons)}")
        if min(self.neurons) < 1 or (self.inputs and min(self.inputs) < 0):
            raise ValueError("neuron indices start at 1 and input indices at 0")

    @property
    def saving(self) -> int:
        return saving(self)

    def cells(self) -> set[tuple[int, int]]:
        return {(i, j) for i in self.neurons for j in self.inputs}

    def __str__(self):
        return f"({sorted(self.neurons)}, {sorted(self.inputs)})"


def saving(f: Factoring) -> int:
    """``(|I| - 1) * |J|``."""
    return (len(f.neurons) - 1) * len(f.inputs)


def non_overlapping(f1: Factoring, f2: Factoring) -> bool:
    if f1.layer != f2.layer:
        return True
    return not (f1.neurons & f2.neurons and f1.inputs & f2.inputs)


@dataclass
class FactoringSet:
    factorings: list[Factoring] = field(default_factory=list)
    layer: int = 1

    @property
    def used(self) -> set[tuple[int, int]]:
        cells = set()
        for f in self.factorings:
            cells |= f.cells()
        return cells

    @property
    def total_saving(self) -> int:
        return sum(f.saving for f in self.factorings)

    def __len__(self):
        return len(self.factorings)

    def __iter__(self):
        return iter(self.factorings)

    def __bool__(self):
        return bool(self.factorings)


def _bits(weights) -> np.ndarray:
    return (np.asarray(weights) > 0).astype(np.uint8)


def _present(weights, mask) -> np.ndarray:
    if mask is None:
        return np.ones(np.shape(weights), dtype=bool)
    return np.asarray(mask, dtype=bool)


def is_valid_factoring(f: Factoring, weights, mask=None) -> bool:
    """Re-check Def. 1 directly against the matrix."""
    bits, present = _bits(weights), _present(weights, mask)
    n_in, n_out = bits.shape
    if len(f.neurons) < 2:
        return False
    if not all(1 <= i <= n_out for i in f.neurons) or not all(0 <= j < n_in for j in f.inputs):
        return False
    cols = [i - 1 for i in sorted(f.neurons)]
    for j in f.inputs:
        if not present[j, cols].all() or len(set(bits[j, cols].tolist())) != 1:
            return False
    return True


def is_valid_set(fs: FactoringSet, weights, mask=None) -> bool:
    fl = fs.factorings
    if not all(is_valid_factoring(f, weights, mask) for f in fl):
        return False
    return all(non_overlapping(a, b) for a, b in itertools.combinations(fl, 2))


def _agreement(bits, present, used, col) -> np.ndarray:
    # B[j', i'] = neuron i' may join a factoring on input j' alongside column `col`
    return (bits == bits[:, col : col + 1]) & present & present[:, col : col + 1] & ~used


def _best_from_rows(A: np.ndarray, col: int):
    """Pick the best (I_{j*}, J_{j*}) from candidate neuron sets ``A``."""
    # only rows that keep neuron `col` can win, or contain a winner
    rows = np.flatnonzero(A[:, col])
    if rows.size == 0:
        return None
    A = A[rows]
    sizes = np.count_nonzero(A, axis=1)
    Af = A.astype(np.float32)
    # S[a, b]: A[a] is a subset of A[b]
    S = (Af @ (1.0 - Af).T) == 0
    sav = (sizes - 1) * np.count_nonzero(S, axis=1)
    best = int(np.argmax(sav))
    if sav[best] <= 0 or sizes[best] <= 1:
        return None
    return np.flatnonzero(A[best]), rows[S[best]]


def get_factoring(weights, i: int, j: int, used=(), mask=None, layer: int = 1) -> Factoring | None:
    """Best factoring containing weight ``(i, j)`` among the candidates built
    from the per-input agreement sets.

    ``used`` is an iterable of already covered ``(neuron, input)`` cells or a
    boolean array shaped like ``weights``.
    """
    bits, present = _bits(weights), _present(weights, mask)
    used = _used_array(used, bits.shape)
    col = i - 1
    if used[j, col] or not present[j, col]:
        raise ValueError(f"cell ({i}, {j}) is already used or absent")
    B = _agreement(bits, present, used, col)
    return _to_factoring(_best_from_rows(B & B[j], col), layer)


def _used_array(used, shape) -> np.ndarray:
    if isinstance(used, np.ndarray):
        return used.astype(bool)
    arr = np.zeros(shape, dtype=bool)
    for i, j in used:
        arr[j, i - 1] = True
    return arr


def _to_factoring(res, layer) -> Factoring | None:
    if res is None:
        return None
    cols, rows = res
    return Factoring(frozenset(int(c) + 1 for c in cols), frozenset(int(r) for r in rows), layer)


def find_factorings(weights, mask=None, layer: int = 1) -> FactoringSet:
    """Greedy per-neuron factoring search.

    Neurons and inputs are scanned in ascending order; for each neuron the
    candidate with the strictly greatest saving wins and its cells become
    used.
    """
    bits, present = _bits(weights), _present(weights, mask)
    used = np.zeros(bits.shape, dtype=bool)
    result = FactoringSet(layer=layer)
    for col in range(bits.shape[1]):
        B = _agreement(bits, present, used, col)
        best, best_sav = None, 0
        for j in np.flatnonzero(B[:, col]):
            res = _best_from_rows(B & B[j], col)
            if res is None:
                continue
            sav = (len(res[0]) - 1) * len(res[1])
            if sav > best_sav:
                best, best_sav = res, sav
        if best is None:
            continue
        cols, rows = best
        used[np.ix_(rows, cols)] = True
        result.factorings.append(_to_factoring(best, layer))
    return result


def _blocks(n: int, size: int) -> list[range]:
    return [range(s, min(s + size, n)) for s in range(0, n, size)]


def find_factorings_partitioned(
    weights,
    block_rows: int = DEFAULT_BLOCK,
    block_cols: int = DEFAULT_BLOCK,
    mask=None,
    layer: int = 1,
    workers: int | None = None,
) -> FactoringSet:
    """Run :func:`find_factorings` independently on disjoint blocks.

    ``block_rows`` counts neurons and ``block_cols`` counts inputs per block.
    Blocks are merged in a fixed order, so the result does not depend on
    ``workers``.
    """
    if block_rows < 1 or block_cols < 1:
        raise ValueError("block sizes must be positive")
    bits, present = _bits(weights), _present(weights, mask)
    n_in, n_out = bits.shape
    tiles = [(rs, cs) for cs in _blocks(n_out, block_rows) for rs in _blocks(n_in, block_cols)]

    def run(tile):
        rs, cs = tile
        sub = find_factorings(bits[rs.start : rs.stop, cs.start : cs.stop],
                              present[rs.start : rs.stop, cs.start : cs.stop], layer)
        return [
            Factoring(
                frozenset(i + cs.start for i in f.neurons),
                frozenset(j + rs.start for j in f.inputs),
                layer,
            )
            for f in sub
        ]

    if workers and workers > 1 and len(tiles) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, tiles))
    else:
        parts = [run(t) for t in tiles]
    return FactoringSet([f for part in parts for f in part], layer=layer)


# -- exact oracles -------------------------------------------------------------

def _candidate_groups(bits, present):
    """All neuron sets of size >= 2 with the inputs on which they agree."""
    n_in, n_out = bits.shape
    groups = []
    for size in range(2, n_out + 1):
        for cols in itertools.combinations(range(n_out), size):
            c = list(cols)
            agree = present[:, c].all(axis=1) & (bits[:, c] == bits[:, c[:1]]).all(axis=1)
            jmask = 0
            for j in np.flatnonzero(agree):
                jmask |= 1 << int(j)
            if jmask:
                groups.append((frozenset(k + 1 for k in cols), jmask))
    return groups


def brute_force_optimal_factorings(
    weights, k: int, mask=None, layer: int = 1, budget: int = 300_000
) -> tuple[FactoringSet, int]:
    """Exact optimum of the k-factoring problem by enumeration.

    Every choice of ``k`` neuron groups is tried.  Given the groups, inputs
    are independent: each input goes to a set of groups with pairwise
    disjoint neurons that all agree on it, picking the heaviest such set.
    """
    bits, present = _bits(weights), _present(weights, mask)
    n_in, n_out = bits.shape
    if n_out > 8 or n_in > 16 or k < 1:
        raise InstanceTooLarge(f"{n_in}x{n_out} matrix with k={k} is outside the oracle's range")
    groups = _candidate_groups(bits, present)
    kk = min(k, len(groups))
    n_combos = math.comb(len(groups), kk)
    if n_combos > budget:
        raise InstanceTooLarge(f"{n_combos} group combinations exceed the budget of {budget}")

    best_total, best_assign = 0, None
    for combo in itertools.combinations(groups, kk):
        weights_t = [len(I) - 1 for I, _ in combo]
        options = []
        for r in range(1, kk + 1):
            for sub in itertools.combinations(range(kk), r):
                if all(not (combo[a][0] & combo[b][0]) for a, b in itertools.combinations(sub, 2)):
                    jm = -1
                    for t in sub:
                        jm &= combo[t][1]
                    options.append((sum(weights_t[t] for t in sub), jm, sub))
        options.sort(key=lambda o: -o[0])
        total, assign = 0, [set() for _ in range(kk)]
        for j in range(n_in):
            for value, jm, sub in options:
                if jm >> j & 1:
                    total += value
                    for t in sub:
                        assign[t].add(j)
                    break
        if total > best_total:
            best_total, best_assign = total, (combo, assign)

    fs = FactoringSet(layer=layer)
    if best_assign is not None:
        combo, assign = best_assign
        for (I, _), J in zip(combo, assign):
            if J:
                fs.factorings.append(Factoring(I, frozenset(J), layer))
    return fs, best_total


# -- maximum edge biclique -------------------------------------------------------

@dataclass(frozen=True)
class BipartiteGraph:
    left: tuple
    right: tuple
    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        L, R = set(self.left), set(self.right)
        for a, b in self.edges:
            if a not in L or b not in R:
                raise ValueError(f"edge {(a, b)} references an unknown vertex")

    def neighbours(self, a) -> set:
        return {b for (x, b) in self.edges if x == a}


def random_bipartite(n_left: int, n_right: int, p: float, rng=None) -> BipartiteGraph:
    rng = np.random.default_rng(rng)
    left = tuple(range(1, n_left + 1))
    right = tuple(range(n_left + 1, n_left + n_right + 1))
    edges = {(a, b) for a in left for b in right if rng.random() < p}
    return BipartiteGraph(left, right, frozenset(edges))


def brute_force_max_edge_biclique(g: BipartiteGraph) -> tuple[frozenset, frozenset, int]:
    if len(g.left) > 12 or len(g.right) > 12:
        raise InstanceTooLarge("maximum edge biclique oracle handles at most 12 + 12 vertices")
    nbrs = {a: g.neighbours(a) for a in g.left}
    best = (frozenset(), frozenset(), 0)
    for r in range(1, len(g.left) + 1):
        for A in itertools.combinations(g.left, r):
            B = set(g.right)
            for a in A:
                B &= nbrs[a]
            if len(A) * len(B) > best[2]:
                best = (frozenset(A), frozenset(B), len(A) * len(B))
    return best


def reduce_meb_to_factoring(g: BipartiteGraph) -> tuple[np.ndarray, np.ndarray]:
    """Layer whose best single factoring matches the maximum edge biclique of ``g``.

    Neuron ``a`` (1-based, in order of ``g.left``) stands for left vertex
    ``a``; one extra neuron (the last column) links to every input with
    weight 1.  Input row ``b`` stands for right vertex ``b`` and links to
    neuron ``a`` with weight 1 exactly when ``(a, b)`` is an edge.  Returns
    ``(bits, mask)``; non-edges hold bit 0 and are masked out as absent links.
    """
    if not g.left or not g.right:
        raise ValueError("graph must have vertices on both sides")
    n_in, n_out = len(g.right), len(g.left) + 1
    bits = np.zeros((n_in, n_out), dtype=np.uint8)
    bits[:, -1] = 1
    for beta, b in enumerate(g.right):
        for alpha, a in enumerate(g.left):
            if (a, b) in g.edges:
                bits[beta, alpha] = 1
    return bits, bits.astype(bool)


def factoring_to_biclique(f: Factoring, g: BipartiteGraph) -> tuple[frozenset, frozenset]:
    """Read a biclique off a factoring of the reduced layer (drops the extra neuron)."""
    extra = len(g.left) + 1
    A = frozenset(g.left[i - 1] for i in f.neurons if i != extra)
    B = frozenset(g.right[j] for j in f.inputs)
    return A, B


# -- reports ---------------------------------------------------------------------

def format_report(sets: Sequence[FactoringSet]) -> str:
    lines = []
    for fs in sets:
        for f in fs:
            lines.append(
                f"layer {fs.layer} I={sorted(f.neurons)} J={sorted(f.inputs)} saving={f.saving}"
            )
        lines.append(f"layer {fs.layer} total factorings={len(fs)} saving={fs.total_saving}")
    lines.append(f"total saving={sum(fs.total_saving for fs in sets)}")
    return "\n".join(lines) + "\n"


def report_dict(sets: Iterable[FactoringSet]) -> dict:
    layers = [
        {
            "layer": fs.layer,
            "factorings": [
                {"I": sorted(f.neurons), "J": sorted(f.inputs), "saving": f.saving} for f in fs
            ],
            "saving": fs.total_saving,
        }
        for fs in sets
    ]
    return {"layers": layers, "total_saving": sum(l["saving"] for l in layers)}
