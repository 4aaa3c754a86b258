"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or as a script.
"""

import sys
import time

import numpy as np
import pytest

from bnnsat.circuit import Circuit, build_bnn_module, build_miter, build_neuron_module, gate_count, simulate, simulate_batch
from bnnsat.cnf import emit_dimacs
from bnnsat.factoring import (
    brute_force_max_edge_biclique,
    brute_force_optimal_factorings,
    find_factorings,
    get_factoring,
    is_valid_factoring,
    is_valid_set,
    random_bipartite,
    reduce_meb_to_factoring,
)
from bnnsat.model import BnnModel, convert_domain, eval_bipolar, eval_boolean, eval_boolean_batch, random_model, sign, to_bits
from bnnsat.properties import eval_property, parse_property
from bnnsat.reductions import brute_force_3sat, decode_sat3_witness, random_3cnf, sat3_to_bnn
from bnnsat.verify import RISK, all_inputs, brute_force, encode, factor_model, verify

SEED = 2024


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def output_counts(model, sets, X):
    c = Circuit(model.input_size)
    _, outs = build_bnn_module(c, model, sets)
    vals = simulate_batch(c, X)
    counts = np.stack([cn.offset + sum(vals[b].astype(np.int64) << k for k, b in enumerate(cn.bits)) for cn in outs], axis=1)
    return counts, gate_count(c)["total"]


def test_criterion_1_table1(report):
    t0 = time.perf_counter()
    w = np.array([[-1], [1], [-1], [-1], [1]], dtype=np.int8)
    model = BnnModel((4, 1), (w,))
    x = np.array([1, -1, 1, 1])
    _, im = eval_bipolar(model, x)
    _, count = eval_boolean(model, to_bits(x))
    c = Circuit(4)
    c.output = build_neuron_module(c, model.weight_bits(1)[:, 0], [c.const(1)] + c.inputs)
    bit, _ = simulate(c, to_bits(x))
    elapsed = time.perf_counter() - t0
    got = (int(im[0]), int(sign(im)[0]), int(count[0]), bit)
    ok = got == (1, 1, 3, 1) and convert_domain(3, 5) == 1 and elapsed < 1.0
    report(1, ok, f"im, output, count, bit = {got}; {elapsed * 1000:.1f} ms")


def test_criterion_2_domain_identity(report):
    rng = np.random.default_rng(SEED)
    checked = 0
    ok = True
    for n in range(1, 13):
        X = all_inputs(n) * 2 - 1
        for w in [np.ones(n, dtype=int)] + [rng.choice([-1, 1], size=n) for _ in range(16)]:
            counts = (X == w).sum(axis=1)
            ok &= bool((2 * counts - n == X @ w).all())
            checked += len(X)
    report(2, ok, f"{checked} (weight, input) pairs over n = 1..12")


def random_threshold_property(model, rng):
    fan = model.fan_in(model.layer_count)
    parts = []
    k = int(rng.integers(1, min(3, model.output_size) + 1))
    for i in rng.choice(np.arange(1, model.output_size + 1), size=k, replace=False):
        rel = rng.choice([">=", "<=", ">", "<", "=="])
        parts.append(f"out[{i}] {rel} {int(rng.integers(0, fan[i - 1] + 2))}")
    return parse_property(" && ".join(parts))


def test_criterion_3_pipeline_vs_enumeration(report):
    rng = np.random.default_rng(SEED)
    agree = replayed = risky = 0
    for _ in range(100):
        dims = (int(rng.integers(1, 17)), int(rng.integers(1, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 5)))
        model = random_model(dims, rng)
        prop = random_threshold_property(model, rng)
        res = verify(model, prop)
        oracle = brute_force(model, prop)
        agree += (res.verdict == RISK) == (oracle is not None)
        if res.verdict == RISK:
            risky += 1
            bits = to_bits(res.counterexample)
            replayed += bool(eval_property(prop, bits, eval_boolean(model, bits)[1]))
    report(3, agree == 100 and replayed == risky, f"verdicts {agree}/100, witnesses replayed {replayed}/{risky}")


def realizable(f, weight_bits):
    """A shared count can only save gates when it covers two inputs, or one negated input."""
    col = weight_bits[:, min(f.neurons) - 1]
    J = [j for j in f.inputs if j != 0]
    return len(J) >= 2 or any(col[j] == 0 for j in J)


def test_criterion_4_factoring_soundness(report):
    rng = np.random.default_rng(SEED)
    agree = nonempty = decreased = never_larger = 0
    degenerate = []
    for _ in range(100):
        model = random_model((int(rng.integers(1, 12)), int(rng.integers(2, 9))), rng)
        sets = factor_model(model)
        X = all_inputs(model.input_size)
        plain, g0 = output_counts(model, None, X)
        fact, g1 = output_counts(model, sets, X)
        agree += bool((plain == fact).all() and (plain == eval_boolean_batch(model, X)[1]).all())
        if len(sets[0]):
            nonempty += 1
            decreased += g1 < g0
            never_larger += g1 <= g0
            if not g1 < g0 and not any(realizable(f, model.weight_bits(1)) for f in sets[0]):
                degenerate.append(" ".join(map(str, sets[0])))

    big = random_model((20, 50, 50, 50), rng)
    prop = parse_property("out[1] >= 25 || out[2] <= 24")
    a, b = build_miter(big, prop), build_miter(big, prop, factor_model(big))
    V = rng.integers(0, 2, size=(10_000, 20))
    diff_ok = bool((simulate_batch(a, V)[a.output] == simulate_batch(b, V)[b.output]).all())
    big_smaller = gate_count(b)["total"] < gate_count(a)["total"]

    ok = agree == 100 and diff_ok and big_smaller and decreased == nonempty
    report(
        4,
        ok,
        f"exhaustive agreement {agree}/100, 10^4-vector agreement {diff_ok}, "
        f"strict gate decrease {decreased}/{nonempty} nonempty sets, never larger {never_larger}/{nonempty}, "
        f"ties on sets sharing only the bias or a single plain input: {len(degenerate)} {degenerate[:3]}",
    )


def test_criterion_5_heuristic_and_figures(report):
    rng = np.random.default_rng(SEED)
    valid = 0
    for _ in range(500):
        bits = (rng.random((int(rng.integers(1, 12)), int(rng.integers(1, 10)))) < 0.5).astype(np.uint8)
        fs = find_factorings(bits)
        valid += is_valid_set(fs, bits) and all(is_valid_factoring(f, bits) for f in fs)
    fig2 = np.array([[1, 0, 1, 0, 0, 0], [1, 1, 1, 1, 1, 1], [0, 1, 0, 1, 1, 1]], dtype=np.uint8).T
    fig3 = np.array([[1, 0, 1, 0], [1, 1, 1, 0], [0, 0, 0, 0]], dtype=np.uint8).T
    _, optimum = brute_force_optimal_factorings(fig2, 2)
    heuristic = find_factorings(fig2).total_saving
    f3 = get_factoring(fig3, 1, 0)
    ok = valid == 500 and optimum == 6 and f3 is not None and f3.saving == 3
    report(5, ok, f"valid sets {valid}/500, 2-factoring optimum {optimum}, heuristic {heuristic}, get_factoring {f3} saving {f3.saving if f3 else 0}")


def test_criterion_6_biclique_equality(report):
    rng = np.random.default_rng(SEED)
    equal = total = 0
    while total < 50:
        g = random_bipartite(int(rng.integers(1, 7)), int(rng.integers(1, 7)), rng.uniform(0.2, 0.9), rng)
        if not g.edges:
            continue
        total += 1
        bits, mask = reduce_meb_to_factoring(g)
        equal += brute_force_max_edge_biclique(g)[2] == brute_force_optimal_factorings(bits, 1, mask)[1]
    report(6, equal == 50, f"{equal}/50 graphs")


def test_criterion_7_3sat_round_trip(report):
    rng = np.random.default_rng(SEED)
    agree = decoded = sat = 0
    for _ in range(100):
        # half the draws are few variables under many clauses, where unsatisfiable instances live
        if rng.random() < 0.5:
            m, n = int(rng.integers(1, 11)), int(rng.integers(1, 16))
        else:
            m, n = int(rng.integers(1, 5)), int(rng.integers(8, 16))
        inst = random_3cnf(m, n, rng, distinct=m >= 3)
        model, prop = sat3_to_bnn(inst)
        res = verify(model, prop)
        truth = brute_force_3sat(inst) is not None
        agree += (res.verdict == RISK) == truth
        if res.verdict == RISK:
            sat += 1
            decoded += inst.satisfied_by(decode_sat3_witness(inst, res.counterexample))
    report(7, agree == 100 and decoded == sat, f"verdicts {agree}/100 ({sat} satisfiable), witnesses {decoded}/{sat}")


@pytest.mark.slow
def test_criterion_8_large_encoding(report):
    model = random_model((784, 100, 100, 100), SEED)
    prop = parse_property("out[1] >= 90 && out[2] >= 90")
    sizes = {}
    for mode in ("off", "partitioned", "heuristic"):
        t0 = time.perf_counter()
        cnf, _, sets = encode(model, prop, mode)
        text = emit_dimacs(cnf)
        sizes[mode] = (cnf.num_vars, cnf.num_clauses, sum(fs.total_saving for fs in sets), len(text), time.perf_counter() - t0)
    off = sizes["off"]
    ok = all(sizes[m][0] < off[0] and sizes[m][1] < off[1] for m in ("partitioned", "heuristic"))
    detail = "; ".join(f"{m}: {v} vars, {c} clauses, saving {s}, {t:.0f} s" for m, (v, c, s, _, t) in sizes.items())
    report(8, ok, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
