import numpy as np
import pytest

from bnnsat.factoring import brute_force_optimal_factorings
from bnnsat.model import eval_bipolar, eval_boolean, threshold, to_bits
from bnnsat.properties import InputAtom, OutputAtom, eval_property
from bnnsat.reductions import (
    BipartiteGraph,
    Cnf3Instance,
    brute_force_3sat,
    decode_sat3_witness,
    format_dimacs_3cnf,
    format_graph,
    format_matrix,
    parse_dimacs_3cnf,
    parse_graph,
    parse_matrix,
    random_3cnf,
    reduce_meb_to_factoring,
    sat3_to_bnn,
)
from bnnsat.verify import RISK, SAFE, verify


def test_clause_neuron_weights():
    inst = Cnf3Instance(6, ((3, -5, 6),))
    model, _ = sat3_to_bnn(inst)
    w = model.weights[0][:, 0]
    # weighted sum (-x3 + x5 - x6) - x7 - 1
    assert w[0] == -1 and w[3] == -1 and w[5] == 1 and w[6] == -1 and w[7] == -1
    assert model.mask(1)[:, 0].tolist() == [True, False, False, True, False, True, True, True]
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.choice([-1, 1], size=7)
        _, out = eval_bipolar(model, x)
        assert out[0] == (-x[2] + x[4] - x[5]) - x[6] - 1


def test_clause_neuron_semantics():
    # with the switch at +1 the neuron is -1 exactly when the clause holds
    inst = random_3cnf(5, 20, 1)
    model, _ = sat3_to_bnn(inst)
    for a in range(32):
        x = np.array([1 if a >> k & 1 else -1 for k in range(5)] + [1])
        assign = {v: x[v - 1] > 0 for v in range(1, 6)}
        _, out = eval_bipolar(model, x)
        for c, s in zip(inst.clauses, out):
            clause_true = any(assign[abs(l)] == (l > 0) for l in c)
            assert (s < 0) == clause_true


def test_property_shape():
    inst = Cnf3Instance(3, ((1, 2, 3), (-1, -2, 3)))
    model, prop = sat3_to_bnn(inst)
    fan = model.fan_in(1)
    assert prop.args[0] == InputAtom(4, 1)
    assert prop.args[1:] == tuple(OutputAtom(i, "<", int(threshold(fan[i - 1]))) for i in (1, 2))


def test_all_clause_neurons_low_makes_property_true():
    inst = Cnf3Instance(3, ((1, 2, 3), (-1, 2, -3)))
    model, prop = sat3_to_bnn(inst)
    x = np.array([1, 1, 1, 1])
    _, counts = eval_boolean(model, to_bits(x))
    assert eval_property(prop, to_bits(x), counts)


def test_repeated_literal_clause():
    inst = Cnf3Instance(1, ((1, 1, 1),))
    model, prop = sat3_to_bnn(inst)
    res = verify(model, prop)
    assert res.verdict == RISK
    assert decode_sat3_witness(inst, res.counterexample) == {1: True}


def test_contradiction_is_safe():
    inst = parse_dimacs_3cnf("p cnf 1 2\n1 0\n-1 0\n")
    assert inst.clauses == ((1, 1, 1), (-1, -1, -1))
    model, prop = sat3_to_bnn(inst)
    assert brute_force_3sat(inst) is None
    assert verify(model, prop).verdict == SAFE


def test_tautological_clause():
    inst = Cnf3Instance(2, ((1, -1, 2), (-2, -2, -2)))
    model, prop = sat3_to_bnn(inst)
    assert model.fan_in(1).tolist() == [1, 2]
    res = verify(model, prop)
    assert res.verdict == RISK
    assert inst.satisfied_by(decode_sat3_witness(inst, res.counterexample))


def test_round_trip_random(rng):
    for _ in range(40):
        inst = random_3cnf(int(rng.integers(1, 7)), int(rng.integers(1, 12)), rng, distinct=False)
        model, prop = sat3_to_bnn(inst)
        res = verify(model, prop)
        sat = brute_force_3sat(inst) is not None
        assert (res.verdict == RISK) == sat
        if sat:
            assert inst.satisfied_by(decode_sat3_witness(inst, res.counterexample))


def test_instance_validation():
    with pytest.raises(ValueError):
        Cnf3Instance(2, ((1, 2),))
    with pytest.raises(ValueError):
        Cnf3Instance(2, ((1, 2, 3),))
    with pytest.raises(ValueError):
        Cnf3Instance(2, ((1, 0, 2),))
    with pytest.raises(ValueError):
        sat3_to_bnn(Cnf3Instance(2, ()))
    with pytest.raises(ValueError):
        decode_sat3_witness(Cnf3Instance(2, ((1, 2, 2),)), [1, 1])


def test_dimacs_3cnf():
    text = "c demo\np cnf 4 2\n1 -2 3 0\n-4 2\n0\n"
    inst = parse_dimacs_3cnf(text)
    assert inst == Cnf3Instance(4, ((1, -2, 3), (-4, 2, 2)))
    assert parse_dimacs_3cnf(format_dimacs_3cnf(inst)) == inst
    with pytest.raises(ValueError):
        parse_dimacs_3cnf("p cnf 4 1\n1 2 3 4 0\n")
    with pytest.raises(ValueError):
        parse_dimacs_3cnf("p cnf 4 1\n1 2 3\n")


def test_graph_text(fig4_graph):
    text = format_graph(fig4_graph)
    assert parse_graph(text) == fig4_graph
    with pytest.raises(ValueError):
        parse_graph("left 1\nright 2\nedge 1\n")


def test_matrix_text(fig4_graph):
    bits, mask = reduce_meb_to_factoring(fig4_graph)
    text = format_matrix(bits, mask)
    assert text.splitlines()[0] == "1 . 1 . 1"
    b2, m2 = parse_matrix(text)
    assert (b2 == bits).all() and (m2 == mask).all()
    assert brute_force_optimal_factorings(b2, 1, m2)[1] == 4


def test_zero_fill_would_overshoot():
    # without masking, neurons 1 and 2 agree on the non-edge rows 4, 5
    g = BipartiteGraph((1, 2), (3, 4, 5), frozenset({(1, 3)}))
    bits, mask = reduce_meb_to_factoring(g)
    assert brute_force_optimal_factorings(bits, 1, mask)[1] == 1
    assert brute_force_optimal_factorings(bits, 1)[1] == 2
