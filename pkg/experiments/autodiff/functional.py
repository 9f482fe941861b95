from typing import Sequence

import numpy as np
from scipy import special

from .tensor import Function, Tensor, as_tensor, record


def _tracked(x: Tensor) -> bool:
    return x.node is not None


def _sum_to(array: np.ndarray, shape) -> np.ndarray:
    shape = tuple(shape)
    if array.shape == shape:
        return array
    lead = array.ndim - len(shape)
    if lead < 0:
        raise ValueError(f"cannot sum {array.shape} to {shape}")
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and array.shape[i + lead] != 1)
    return array.sum(axis=axes, keepdims=True).reshape(shape)


def _normalize_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(sorted(a % ndim for a in axes))


class Add(Function):
    name = "add"

    def forward(self, a, b):
        return a + b

    def backward(self, grad, inputs, out):
        a, b = inputs
        return (sum_to(grad, a.shape) if _tracked(a) else None,
                sum_to(grad, b.shape) if _tracked(b) else None)


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        return a * b

    def backward(self, grad, inputs, out):
        a, b = inputs
        return (sum_to(grad * b, a.shape) if _tracked(a) else None,
                sum_to(grad * a, b.shape) if _tracked(b) else None)


class Neg(Function):
    name = "neg"

    def forward(self, a):
        return -a

    def backward(self, grad, inputs, out):
        return (neg(grad),)


class Reciprocal(Function):
    name = "reciprocal"

    def forward(self, a):
        return 1.0 / a

    def backward(self, grad, inputs, out):
        return (neg(grad * out * out),)


class Pow(Function):
    name = "pow"

    def __init__(self, exponent: float):
        self.exponent = float(exponent)

    def forward(self, a):
        return a ** self.exponent

    def backward(self, grad, inputs, out):
        (a,) = inputs
        p = self.exponent
        if p == 1.0:
            return (grad,)
        if p == 2.0:
            return (grad * a * 2.0,)
        return (grad * power(a, p - 1.0) * p,)

    def describe(self):
        return {"exponent": self.exponent}


class Exp(Function):
    name = "exp"

    def forward(self, a):
        return np.exp(a)

    def backward(self, grad, inputs, out):
        return (grad * out,)


class Log(Function):
    name = "log"

    def forward(self, a):
        return np.log(a)

    def backward(self, grad, inputs, out):
        return (grad * reciprocal(inputs[0]),)


class Sqrt(Function):
    name = "sqrt"

    def forward(self, a):
        return np.sqrt(a)

    def backward(self, grad, inputs, out):
        return (grad * reciprocal(out) * 0.5,)


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, a):
        return special.expit(a)

    def backward(self, grad, inputs, out):
        return (grad * out * (1.0 - out),)


class Softplus(Function):
    name = "softplus"

    def forward(self, a):
        return np.logaddexp(0.0, a)

    def backward(self, grad, inputs, out):
        return (grad * sigmoid(inputs[0]),)


class LeakyReLU(Function):
    name = "leaky_relu"

    def __init__(self, alpha: float = 0.2):
        self.alpha = alpha

    def forward(self, a):
        self.slope = np.where(a > 0, 1.0, self.alpha)
        return a * self.slope

    def backward(self, grad, inputs, out):
        return (grad * self.slope,)

    def describe(self):
        return {"alpha": self.alpha}


class Softmax(Function):
    name = "softmax"

    def __init__(self, axis: int = -1):
        self.axis = axis

    def forward(self, a):
        return special.softmax(a, axis=self.axis)

    def backward(self, grad, inputs, out):
        return (out * (grad - sum(grad * out, axis=self.axis, keepdims=True)),)


class LogSoftmax(Function):
    name = "log_softmax"

    def __init__(self, axis: int = -1):
        self.axis = axis

    def forward(self, a):
        return special.log_softmax(a, axis=self.axis)

    def backward(self, grad, inputs, out):
        return (grad - exp(out) * sum(grad, axis=self.axis, keepdims=True),)


class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError("matmul operands need at least 2 dimensions")
        return np.matmul(a, b)

    def backward(self, grad, inputs, out):
        a, b = inputs
        return (sum_to(matmul(grad, swap_last(b)), a.shape) if _tracked(a) else None,
                sum_to(matmul(swap_last(a), grad), b.shape) if _tracked(b) else None)


class SwapLast(Function):
    name = "swap_last"

    def forward(self, a):
        return np.swapaxes(a, -1, -2)

    def backward(self, grad, inputs, out):
        return (swap_last(grad),)


class Reshape(Function):
    name = "reshape"

    def __init__(self, shape):
        self.shape = tuple(shape)

    def forward(self, a):
        return a.reshape(self.shape)

    def backward(self, grad, inputs, out):
        return (reshape(grad, inputs[0].shape),)

    def describe(self):
        return {"target": list(self.shape)}


class Sum(Function):
    name = "sum"

    def __init__(self, axis=None, keepdims=False):
        self.axis = axis
        self.keepdims = keepdims

    def forward(self, a):
        self.kept_shape = np.sum(a, axis=self.axis, keepdims=True).shape
        return np.sum(a, axis=self.axis, keepdims=self.keepdims)

    def backward(self, grad, inputs, out):
        return (broadcast_to(reshape(grad, self.kept_shape), inputs[0].shape),)


class BroadcastTo(Function):
    name = "broadcast_to"

    def __init__(self, shape):
        self.shape = tuple(shape)

    def forward(self, a):
        return np.broadcast_to(a, self.shape).copy()

    def backward(self, grad, inputs, out):
        return (sum_to(grad, inputs[0].shape),)


class SumTo(Function):
    name = "sum_to"

    def __init__(self, shape):
        self.shape = tuple(shape)

    def forward(self, a):
        return _sum_to(a, self.shape)

    def backward(self, grad, inputs, out):
        return (broadcast_to(grad, inputs[0].shape),)


class MaxOverPoints(Function):
    """
    Maximum along one axis; gradient flows only to the arg-max entries,
    the lowest index winning ties.
    """
    name = "max_over_points"

    def __init__(self, axis: int):
        self.axis = axis

    def forward(self, a):
        if a.shape[self.axis] == 0:
            raise ValueError("max over an empty axis")
        self.argmax = np.argmax(a, axis=self.axis)
        expanded = np.expand_dims(self.argmax, self.axis)
        self.mask = np.zeros_like(a)
        np.put_along_axis(self.mask, expanded, 1.0, axis=self.axis)
        return np.take_along_axis(a, expanded, axis=self.axis).squeeze(self.axis)

    def backward(self, grad, inputs, out):
        shape = inputs[0].shape
        kept = shape[:self.axis % len(shape)] + (1,) + shape[self.axis % len(shape) + 1:]
        return (broadcast_to(reshape(grad, kept), shape) * self.mask,)


class MeanOverPoints(Function):
    """
    Mean along one axis, summed in sorted order so that the result does not
    depend on the order of the entries.
    """
    name = "mean_over_points"

    def __init__(self, axis: int):
        self.axis = axis

    def forward(self, a):
        count = a.shape[self.axis]
        if count == 0:
            raise ValueError("mean over an empty axis")
        return np.sum(np.sort(a, axis=self.axis), axis=self.axis) / count

    def backward(self, grad, inputs, out):
        shape = inputs[0].shape
        axis = self.axis % len(shape)
        kept = shape[:axis] + (1,) + shape[axis + 1:]
        return (broadcast_to(reshape(grad, kept), shape) * (1.0 / shape[axis]),)


class Concat(Function):
    name = "concat"

    def __init__(self, axis: int = -1):
        self.axis = axis

    def forward(self, *arrays):
        return np.concatenate(arrays, axis=self.axis)

    def backward(self, grad, inputs, out):
        axis = self.axis % grad.ndim
        grads, start = [], 0
        for x in inputs:
            stop = start + x.shape[axis]
            index = (slice(None),) * axis + (slice(start, stop),)
            grads.append(slice_(grad, index) if _tracked(x) else None)
            start = stop
        return tuple(grads)


class Slice(Function):
    name = "slice"

    def __init__(self, index):
        self.index = index

    def forward(self, a):
        return np.array(a[self.index])

    def backward(self, grad, inputs, out):
        return (embed(grad, self.index, inputs[0].shape),)


class Embed(Function):
    name = "embed"

    def __init__(self, index, shape):
        self.index = index
        self.shape = tuple(shape)

    def forward(self, a):
        result = np.zeros(self.shape)
        np.add.at(result, self.index, a)
        return result

    def backward(self, grad, inputs, out):
        return (slice_(grad, self.index),)


class Gather(Function):
    """
    Row gather along axis 0 with an integer index array of any shape.
    """
    name = "gather"

    def __init__(self, indices):
        self.indices = np.asarray(indices, dtype=np.int64)

    def forward(self, a):
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= len(a)):
            raise ValueError(f"gather indices out of range for {len(a)} rows")
        return a[self.indices]

    def backward(self, grad, inputs, out):
        return (scatter_add(grad, self.indices, len(inputs[0])),)


class ScatterAdd(Function):
    name = "scatter_add"

    def __init__(self, indices, rows: int):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.rows = rows

    def forward(self, a):
        result = np.zeros((self.rows,) + a.shape[self.indices.ndim:])
        np.add.at(result, self.indices, a)
        return result

    def backward(self, grad, inputs, out):
        return (gather(grad, self.indices),)


def add(a, b) -> Tensor:
    return record(Add(), a, b)


def mul(a, b) -> Tensor:
    return record(Mul(), a, b)


def neg(a) -> Tensor:
    return record(Neg(), a)


def reciprocal(a) -> Tensor:
    return record(Reciprocal(), a)


def power(a, exponent: float) -> Tensor:
    return record(Pow(exponent), a)


def exp(a) -> Tensor:
    return record(Exp(), a)


def log(a) -> Tensor:
    return record(Log(), a)


def sqrt(a) -> Tensor:
    return record(Sqrt(), a)


def sigmoid(a) -> Tensor:
    return record(Sigmoid(), a)


def softplus(a) -> Tensor:
    return record(Softplus(), a)


def leaky_relu(a, alpha: float = 0.2) -> Tensor:
    return record(LeakyReLU(alpha), a)


def softmax(a, axis: int = -1) -> Tensor:
    return record(Softmax(axis), a)


def log_softmax(a, axis: int = -1) -> Tensor:
    return record(LogSoftmax(axis), a)


def matmul(a, b) -> Tensor:
    return record(MatMul(), a, b)


def swap_last(a) -> Tensor:
    return record(SwapLast(), a)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    if a.shape == tuple(shape):
        return a
    return record(Reshape(shape), a)


def sum(a, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    return record(Sum(axis, keepdims), a)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = int(np.prod([a.shape[i] for i in _normalize_axis(axis, a.ndim)]))
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    if a.shape == tuple(shape):
        return a
    return record(BroadcastTo(shape), a)


def sum_to(a, shape) -> Tensor:
    a = as_tensor(a)
    if a.shape == tuple(shape):
        return a
    return record(SumTo(shape), a)


def max_over_points(a, axis: int = -2) -> Tensor:
    return record(MaxOverPoints(axis), a)


def max_with_argmax(a, axis: int = -2):
    """
    Max pooling that also returns the arg-max index of every output entry.
    """
    function = MaxOverPoints(axis)
    out = record(function, a)
    return out, function.argmax


def mean_over_points(a, axis: int = -2) -> Tensor:
    return record(MeanOverPoints(axis), a)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    return record(Concat(axis), *tensors)


def slice_(a, index) -> Tensor:
    return record(Slice(index), a)


def embed(a, index, shape) -> Tensor:
    return record(Embed(index, shape), a)


def gather(a, indices) -> Tensor:
    return record(Gather(indices), a)


def scatter_add(a, indices, rows: int) -> Tensor:
    return record(ScatterAdd(indices, rows), a)


def squared_norm(a, axis=-1, keepdims=False) -> Tensor:
    a = as_tensor(a)
    return sum(a * a, axis=axis, keepdims=keepdims)


def batch_norm(x, gamma, beta, running_mean: np.ndarray, running_var: np.ndarray, training: bool,
               momentum: float = 0.9, eps: float = 1e-5) -> Tensor:
    """
    Batch normalization over every axis but the last (channel) one.

    In training the batch statistics are used and the running statistics
    are updated in place as running = momentum * running + (1 - momentum) * batch,
    with the unbiased batch variance. In evaluation the running statistics
    are used.
    """
    x = as_tensor(x)
    channels = x.shape[-1]
    if training:
        rows = reshape(x, (-1, channels))
        count = rows.shape[0]
        batch_mean = mean_over_points(rows, axis=0)
        centered = x - batch_mean
        batch_var = mean_over_points(reshape(centered * centered, (-1, channels)), axis=0)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * batch_mean.data
        unbiased = batch_var.data * (count / (count - 1)) if count > 1 else batch_var.data
        running_var *= momentum
        running_var += (1.0 - momentum) * unbiased
        normalized = centered * reciprocal(sqrt(batch_var + eps))
    else:
        normalized = (x - np.array(running_mean)) * (1.0 / np.sqrt(running_var + eps))
    return normalized * gamma + beta
