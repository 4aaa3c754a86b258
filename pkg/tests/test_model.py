import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bnnsat.model import (
    BnnModel,
    ModelError,
    convert_domain,
    eval_bipolar,
    eval_boolean,
    eval_boolean_batch,
    parse_model,
    random_model,
    serialize_model,
    sign,
    threshold,
    to_bipolar,
    to_bits,
)


def straight_line_forward(model, x):
    """Loop-only forward pass: weighted sum per neuron, sign on hidden layers."""
    acts = [1] + [int(v) for v in x]
    for l in range(1, model.layer_count + 1):
        w, m = model.weights[l - 1], model.mask(l)
        sums = []
        for i in range(w.shape[1]):
            s = 0
            for j in range(w.shape[0]):
                if m[j, i]:
                    s += acts[j] * int(w[j, i])
            sums.append(s)
        if l == model.layer_count:
            return sums
        acts = [1] + [1 if s >= 0 else -1 for s in sums]


def test_table1_bipolar(table1_model):
    hidden, out = eval_bipolar(table1_model, [1, -1, 1, 1])
    assert hidden == [] and out.tolist() == [1]
    assert sign(out).tolist() == [1]


def test_table1_boolean(table1_model):
    # weight bits [0,1,0,0,1] against input bits [1,1,0,1,1]: xnor [0,1,1,0,1]
    _, counts = eval_boolean(table1_model, [1, 0, 1, 1])
    assert counts.tolist() == [3]
    assert 3 >= threshold(5)


def test_all_agree_gives_full_sum():
    n = 7
    m = BnnModel((n, 1), (np.ones((n + 1, 1), dtype=np.int8),))
    _, out = eval_bipolar(m, np.ones(n, dtype=int))
    assert out.tolist() == [n + 1]
    _, counts = eval_boolean(m, np.ones(n, dtype=int))
    assert counts.tolist() == [n + 1]


def test_bipolar_matches_straight_line(rng):
    for _ in range(20):
        m = random_model((8, 5, 4, 3), rng)
        x = rng.choice([-1, 1], size=8)
        assert eval_bipolar(m, x)[1].tolist() == straight_line_forward(m, x)


def test_boolean_matches_bipolar(rng):
    for _ in range(200):
        dims = tuple(rng.integers(1, 7, size=rng.integers(2, 5)))
        m = random_model(dims, rng)
        x = rng.choice([-1, 1], size=dims[0])
        hid_b, out_b = eval_bipolar(m, x)
        hid_z, counts = eval_boolean(m, to_bits(x))
        for hb, hz in zip(hid_b, hid_z):
            assert (to_bits(hb) == hz).all()
        n = m.fan_in(m.layer_count)
        assert (2 * counts - n == out_b).all()


def test_batch_matches_single(rng):
    m = random_model((6, 4, 3), rng)
    X = rng.integers(0, 2, size=(50, 6))
    hid, counts = eval_boolean_batch(m, X)
    for k in range(50):
        h1, c1 = eval_boolean(m, X[k])
        assert (counts[k] == c1).all()
        assert (hid[0][k] == h1[0]).all()


def test_masked_links_are_skipped(rng):
    m = random_model((5, 3, 2), rng)
    masks = tuple(rng.random(w.shape) < 0.6 for w in m.weights)
    m = BnnModel(m.dims, m.weights, masks)
    for _ in range(30):
        x = rng.choice([-1, 1], size=5)
        assert eval_bipolar(m, x)[1].tolist() == straight_line_forward(m, x)
        _, counts = eval_boolean(m, to_bits(x))
        assert (2 * counts - m.fan_in(2) == eval_bipolar(m, x)[1]).all()


@pytest.mark.parametrize("n", range(1, 13))
def test_domain_conversion_exhaustive(n):
    # count of xnor(w, x) mapped back equals the bipolar dot product
    X = np.array(list(itertools.product((-1, 1), repeat=n)), dtype=int).reshape(-1, n)
    rng = np.random.default_rng(n)
    for w in (np.ones(n, dtype=int), rng.choice([-1, 1], size=n)):
        dots = X @ w
        counts = (to_bits(X) == to_bits(w)).sum(axis=1)
        assert all(convert_domain(int(c), n) == int(d) for c, d in zip(counts, dots))


@pytest.mark.parametrize("n", range(1, 17))
def test_threshold_equivalence(n):
    for count in range(n + 1):
        assert (count >= threshold(n)) == (2 * count - n >= 0)


def test_convert_domain_examples():
    assert convert_domain(3, 5) == 1
    assert convert_domain(0, 0) == 0
    assert convert_domain(9, 9) == 9
    with pytest.raises(ValueError):
        convert_domain(6, 5)
    with pytest.raises(ValueError):
        convert_domain(-1, 5)


def test_bad_inputs(table1_model):
    with pytest.raises(ModelError):
        eval_bipolar(table1_model, [1, 1, 1])
    with pytest.raises(ModelError):
        eval_bipolar(table1_model, [1, 0, 1, 1])
    with pytest.raises(ModelError):
        eval_boolean(table1_model, [1, 2, 0, 1])


def test_model_validation():
    with pytest.raises(ModelError):
        BnnModel((2, 1), (np.zeros((3, 1), dtype=np.int8),))
    with pytest.raises(ModelError):
        BnnModel((2, 1), (np.ones((2, 1), dtype=np.int8),))
    with pytest.raises(ModelError):
        BnnModel((2,), ())


def test_round_trip_table1(table1_model):
    text = serialize_model(table1_model)
    assert text == "layers 1\ndims 4 1\nweights 1\n-1 1 -1 -1 1\n"
    assert parse_model(text) == table1_model


def test_round_trip_large(rng):
    m = random_model((100, 100, 100, 100), rng)
    back = parse_model(serialize_model(m))
    assert back == m
    X = rng.integers(0, 2, size=(20, 100))
    assert (eval_boolean_batch(m, X)[1] == eval_boolean_batch(back, X)[1]).all()


def test_round_trip_masked():
    text = "layers 1\ndims 3 2\nweights 1\n1 . -1 1\n-1 1 . .\n"
    m = parse_model(text)
    assert m.fan_in(1).tolist() == [3, 2]
    assert serialize_model(m) == text


@pytest.mark.parametrize(
    "text",
    [
        "layers 1\ndims 2 1\nweights 1\n1 0 -1\n",  # weight value 0
        "layers 1\ndims 2 1\nweights 1\n1 1\n",  # short row
        "layers 2\ndims 2 1\nweights 1\n1 1 1\n",  # dims too short
        "layers 1\ndims 2 1\nweights 1\n1 1 1\n1 1 1\n",  # extra row
        "dims 2 1\nweights 1\n1 1 1\n",  # missing header
        "layers 1\ndims 2 1\nweights 2\n1 1 1\n",  # wrong layer tag
    ],
)
def test_parse_rejects(text):
    with pytest.raises(ModelError):
        parse_model(text)


def test_comments_and_plus_signs():
    m = parse_model("# tiny\nlayers 1\ndims 1 1  # one input\nweights 1\n+1 -1\n")
    assert m.weights[0][:, 0].tolist() == [1, -1]


@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=40))
def test_bits_bipolar_inverse(xs):
    x = np.array(xs)
    assert (to_bipolar(to_bits(x)) == x).all()


@given(st.integers(0, 2**31 - 1))
def test_random_model_round_trip(seed):
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in rng.integers(1, 6, size=rng.integers(2, 5)))
    m = random_model(dims, rng)
    assert parse_model(serialize_model(m)) == m
