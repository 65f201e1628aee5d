"""Differentiable primitives over dense float64 tensors.

Each primitive computes its value with numpy and, when an input is tracked, records a
vector-Jacobian product closure on that input's graph.
"""
from typing import Sequence, Union

import numpy as np

from diffcore.graph import ContractViolation, Tensor, as_tensor, record

Operand = Union[Tensor, np.ndarray, float, int]


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record("add", a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record("sub", a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record("mul", a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def linear(x: Operand, weight: Operand, bias: Operand) -> Tensor:
    """x [B, in] @ weight[out, in].T + bias[out]."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ContractViolation(f"linear: input {x.shape} does not fit weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ContractViolation(f"linear: bias {bias.shape} does not fit weight {weight.shape}")
    out = x.data @ weight.data.T + bias.data
    return record("linear", out, (x, weight, bias),
                  lambda g: (g @ weight.data, g.T @ x.data, g.sum(axis=0)))


def relu(x: Operand) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return record("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x: Operand) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return record("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def exp(x: Operand) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return record("exp", out, (x,), lambda g: (g * out,))


def sum(x: Operand, axis: int = None) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return record("sum", out, (x,), vjp)


def mean(x: Operand) -> Tensor:
    x = as_tensor(x)
    if x.data.size == 0:
        raise ContractViolation("mean of an empty tensor")
    count = x.data.size
    return record("mean", np.asarray(x.data.mean()), (x,),
                  lambda g: (np.full(x.shape, float(g) / count),))


def concat(tensors: Sequence[Operand], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def vjp(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors)))

    return record("concat", out, tensors, vjp)


def take_rows(table: Operand, indices: Sequence[int]) -> Tensor:
    """Gather rows of a [rows, cols] table; used for label embeddings."""
    table = as_tensor(table)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ContractViolation(f"take_rows: index out of range for table with {table.shape[0]} rows")

    def vjp(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, indices, g)
        return (grad,)

    return record("take_rows", table.data[indices], (table,), vjp)


def pick(x: Operand, labels: Sequence[int]) -> Tensor:
    """x[b, labels[b]] for every row b."""
    x = as_tensor(x)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(x.shape[0])

    def vjp(g):
        grad = np.zeros_like(x.data)
        grad[rows, labels] = g
        return (grad,)

    return record("pick", x.data[rows, labels], (x,), vjp)


def log_softmax(logits: Operand) -> Tensor:
    """Row-wise log-softmax along the last axis, computed with max subtraction."""
    logits = as_tensor(logits)
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)
    return record("log_softmax", out, (logits,),
                  lambda g: (g - probs * g.sum(axis=-1, keepdims=True),))


def pairwise_distances(x: Operand) -> Tensor:
    """Euclidean distances between all ordered row pairs of x [B, D]; result [B, B]."""
    x = as_tensor(x)
    diff = x.data[:, None, :] - x.data[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))

    def vjp(g):
        # zero-distance pairs (the diagonal, duplicated rows) pass no gradient
        safe = np.where(dist > 0, dist, 1.0)
        coeff = np.where(dist > 0, (g + g.T) / safe, 0.0)
        return ((coeff[:, :, None] * diff).sum(axis=1),)

    return record("pairwise_distances", dist, (x,), vjp)
