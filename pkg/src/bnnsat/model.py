"""Binarized neural networks and their reference semantics.

Weights of layer ``l`` are stored as an ``(d[l-1] + 1, d[l])`` int8 array
``W`` with ``W[j, i - 1]`` the weight from input ``j`` to neuron ``i``.
Row 0 is the bias node, whose value is the constant +1 (bit 1).  Neurons are
numbered from 1, inputs from 0, so column ``i - 1`` holds neuron ``i``.

A layer may carry a boolean connectivity mask of the same shape; a ``False``
entry means the link does not exist and contributes nothing to the weighted
sum.  ``None`` means fully connected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ModelError(ValueError):
    """Raised for malformed models, model files or evaluation inputs."""


@dataclass(eq=False)
class BnnModel:
    dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    masks: tuple[np.ndarray | None, ...] = field(default=())

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.weights = tuple(np.asarray(w, dtype=np.int8) for w in self.weights)
        if not self.masks:
            self.masks = (None,) * len(self.weights)
        self.masks = tuple(None if m is None else np.asarray(m, dtype=bool) for m in self.masks)
        self._validate()

    def _validate(self):
        if len(self.dims) < 2:
            raise ModelError("a model needs at least one layer")
        if any(d < 1 for d in self.dims):
            raise ModelError(f"layer dimensions must be positive, got {self.dims}")
        if len(self.weights) != len(self.dims) - 1 or len(self.masks) != len(self.weights):
            raise ModelError("number of weight matrices does not match dims")
        for l, (w, m) in enumerate(zip(self.weights, self.masks), start=1):
            shape = (self.dims[l - 1] + 1, self.dims[l])
            if w.shape != shape:
                raise ModelError(f"layer {l}: weight shape {w.shape}, expected {shape}")
            if not np.isin(w, (-1, 1)).all():
                raise ModelError(f"layer {l}: weights must be -1 or +1")
            if m is not None and m.shape != shape:
                raise ModelError(f"layer {l}: mask shape {m.shape}, expected {shape}")

    @property
    def layer_count(self) -> int:
        return len(self.weights)

    @property
    def input_size(self) -> int:
        return self.dims[0]

    @property
    def output_size(self) -> int:
        return self.dims[-1]

    def mask(self, layer: int) -> np.ndarray:
        """Connectivity of ``layer`` (1-based) as a dense boolean array."""
        m = self.masks[layer - 1]
        if m is None:
            return np.ones(self.weights[layer - 1].shape, dtype=bool)
        return m

    def weight_bits(self, layer: int) -> np.ndarray:
        """Boolean-domain image of the weights (+1 -> 1, -1 -> 0)."""
        return (self.weights[layer - 1] > 0).astype(np.uint8)

    def fan_in(self, layer: int) -> np.ndarray:
        """Number of existing links (bias included) into each neuron."""
        return self.mask(layer).sum(axis=0)

    def is_fully_connected(self) -> bool:
        return all(m is None or m.all() for m in self.masks)

    def __eq__(self, other):
        if not isinstance(other, BnnModel):
            return NotImplemented
        return (
            self.dims == other.dims
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(
                np.array_equal(self.mask(l), other.mask(l)) for l in range(1, self.layer_count + 1)
            )
        )


def random_model(dims: Sequence[int], rng: np.random.Generator | int | None = None) -> BnnModel:
    rng = np.random.default_rng(rng)
    weights = [
        rng.choice(np.array([-1, 1], dtype=np.int8), size=(dims[l - 1] + 1, dims[l]))
        for l in range(1, len(dims))
    ]
    return BnnModel(tuple(dims), tuple(weights))


def _check_input(model: BnnModel, x, allowed) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != model.input_size:
        raise ModelError(f"expected an input of length {model.input_size}, got shape {x.shape}")
    if not np.isin(x, allowed).all():
        raise ModelError(f"input entries must be in {allowed}")
    return x.astype(np.int64)


def sign(im):
    """Activation: +1 when the weighted sum is >= 0, otherwise -1."""
    return np.where(np.asarray(im) >= 0, 1, -1)


def eval_bipolar(model: BnnModel, x) -> tuple[list[np.ndarray], np.ndarray]:
    """Forward pass in the bipolar domain.

    Returns the hidden activations of layers ``1..L-1`` and the raw weighted
    sums of the output layer.
    """
    acts = _check_input(model, x, (-1, 1))
    hidden = []
    for l in range(1, model.layer_count + 1):
        xb = np.concatenate(([1], acts))
        w = model.weights[l - 1].astype(np.int64) * model.mask(l)
        im = xb @ w
        if l == model.layer_count:
            return hidden, im
        acts = sign(im)
        hidden.append(acts)
    raise AssertionError("unreachable")


def weighted_sums(model: BnnModel, x) -> list[np.ndarray]:
    """Per-layer weighted sums ``im`` for a bipolar input."""
    hidden, out = eval_bipolar(model, x)
    sums = []
    acts = np.asarray(x, dtype=np.int64)
    for l in range(1, model.layer_count):
        xb = np.concatenate(([1], acts))
        sums.append(xb @ (model.weights[l - 1].astype(np.int64) * model.mask(l)))
        acts = hidden[l - 1]
    sums.append(out)
    return sums


def threshold(fan_in):
    """Count threshold ``ceil(n / 2)`` of a neuron with ``n`` links."""
    return (np.asarray(fan_in) + 1) // 2


def eval_boolean(model: BnnModel, x) -> tuple[list[np.ndarray], np.ndarray]:
    """Forward pass in the 0/1 domain using XNOR and population count.

    Hidden neurons output ``count >= ceil(n / 2)``; the output layer returns
    the raw counts.
    """
    bits = _check_input(model, x, (0, 1))
    hidden = []
    for l in range(1, model.layer_count + 1):
        xb = np.concatenate(([1], bits))
        wb = model.weight_bits(l)
        xnor = (wb == xb[:, None]) & model.mask(l)
        count = xnor.sum(axis=0)
        if l == model.layer_count:
            return hidden, count
        bits = (count >= threshold(model.fan_in(l))).astype(np.int64)
        hidden.append(bits)
    raise AssertionError("unreachable")


def eval_boolean_batch(model: BnnModel, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Vectorised :func:`eval_boolean` over the rows of ``X``."""
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != model.input_size:
        raise ModelError(f"expected inputs of shape (N, {model.input_size}), got {X.shape}")
    hidden = []
    bits = X
    for l in range(1, model.layer_count + 1):
        xb = np.hstack([np.ones((bits.shape[0], 1), dtype=np.int64), bits])
        m = model.mask(l).astype(np.int64)
        wb = model.weight_bits(l).astype(np.int64)
        # xnor(x, w) = x*w + (1-x)*(1-w)
        count = xb @ (wb * m) + (1 - xb) @ ((1 - wb) * m)
        if l == model.layer_count:
            return hidden, count
        bits = (count >= threshold(model.fan_in(l))).astype(np.int64)
        hidden.append(bits)
    raise AssertionError("unreachable")


def convert_domain(count: int, fan_in: int) -> int:
    """Map a count of agreeing links to the bipolar weighted sum: ``2*count - n``."""
    if not 0 <= count <= fan_in:
        raise ModelError(f"count {count} outside 0..{fan_in}")
    return 2 * count - fan_in


def to_bits(x) -> np.ndarray:
    return (np.asarray(x) > 0).astype(np.int64)


def to_bipolar(bits) -> np.ndarray:
    return np.where(np.asarray(bits) > 0, 1, -1)


# -- text format -------------------------------------------------------------

def serialize_model(model: BnnModel) -> str:
    lines = [f"layers {model.layer_count}", "dims " + " ".join(map(str, model.dims))]
    for l in range(1, model.layer_count + 1):
        lines.append(f"weights {l}")
        w, m = model.weights[l - 1], model.mask(l)
        for i in range(w.shape[1]):
            lines.append(
                " ".join(str(int(v)) if present else "." for v, present in zip(w[:, i], m[:, i]))
            )
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> BnnModel:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    pos = 0

    def header(key):
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(key):
            raise ModelError(f"expected '{key}' at line {pos + 1} of model")
        vals = lines[pos].split()[1:]
        pos += 1
        try:
            return [int(v) for v in vals]
        except ValueError:
            raise ModelError(f"non-integer in '{key}' line") from None

    counts = header("layers")
    dims = header("dims")
    if len(counts) != 1 or counts[0] < 1 or len(dims) != counts[0] + 1:
        raise ModelError("'dims' must list layers + 1 dimensions")
    weights, masks = [], []
    for l in range(1, counts[0] + 1):
        if header("weights") != [l]:
            raise ModelError(f"expected 'weights {l}'")
        rows = []
        for _ in range(dims[l]):
            if pos >= len(lines):
                raise ModelError(f"layer {l}: missing weight rows")
            toks = lines[pos].split()
            pos += 1
            if len(toks) != dims[l - 1] + 1:
                raise ModelError(f"layer {l}: row has {len(toks)} entries, expected {dims[l - 1] + 1}")
            rows.append(toks)
        w = np.ones((dims[l - 1] + 1, dims[l]), dtype=np.int8)
        m = np.ones_like(w, dtype=bool)
        for i, toks in enumerate(rows):
            for j, tok in enumerate(toks):
                if tok == ".":
                    m[j, i] = False
                elif tok in ("1", "+1", "-1"):
                    w[j, i] = int(tok)
                else:
                    raise ModelError(f"layer {l}: weight {tok!r} is not -1, +1 or '.'")
        weights.append(w)
        masks.append(None if m.all() else m)
    if pos != len(lines):
        raise ModelError("trailing content after the last layer")
    return BnnModel(tuple(dims), tuple(weights), tuple(masks))


def load_model(path) -> BnnModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def save_model(model: BnnModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(model))
