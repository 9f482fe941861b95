import contextvars
import json
import logging
from contextlib import contextmanager
from typing import List, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

_ACTIVE_TAPE = contextvars.ContextVar("active_tape", default=None)
_CHECK_FINITE = contextvars.ContextVar("check_finite", default=True)


class AutodiffError(Exception):
    pass


class ShapeError(AutodiffError, ValueError):
    pass


class NumericalError(AutodiffError, FloatingPointError):
    pass


def set_debug(enabled: bool) -> None:
    """
    Toggle the eager non-finite check that runs after every recorded op.
    """
    _CHECK_FINITE.set(bool(enabled))


def active_tape() -> Optional["Tape"]:
    return _ACTIVE_TAPE.get()


class Node:
    __slots__ = ("index", "function", "inputs", "output", "tape")

    def __init__(self, tape, index, function, inputs, output):
        self.tape = tape
        self.index = index
        self.function = function
        self.inputs = inputs
        self.output = output


class Function:
    """
    A differentiable primitive.

    `forward` works on numpy arrays; `backward` receives the output gradient
    as a Tensor and returns one gradient Tensor (or None) per input, written
    with Tensor ops so that it can itself be recorded.
    """
    name = "function"

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: "Tensor", inputs: Sequence["Tensor"], out: "Tensor"):
        raise NotImplementedError

    def describe(self) -> dict:
        return {}


class Leaf(Function):
    name = "leaf"

    def __init__(self, value: np.ndarray):
        self.value = value

    def forward(self):
        return self.value


class Tensor:
    """
    A float64 array, optionally attached to a node of a Tape.
    """
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, data, node: Optional[Node] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        where = f", node={self.node.index}" if self.node is not None else ""
        return f"Tensor(shape={self.shape}{where})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __add__(self, other):
        return F.add(self, other)

    def __radd__(self, other):
        return F.add(other, self)

    def __sub__(self, other):
        return F.add(self, F.neg(other))

    def __rsub__(self, other):
        return F.add(other, F.neg(self))

    def __mul__(self, other):
        return F.mul(self, other)

    def __rmul__(self, other):
        return F.mul(other, self)

    def __truediv__(self, other):
        return F.mul(self, F.reciprocal(other))

    def __rtruediv__(self, other):
        return F.mul(other, F.reciprocal(self))

    def __neg__(self):
        return F.neg(self)

    def __pow__(self, power):
        return F.power(self, power)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def __rmatmul__(self, other):
        return F.matmul(other, self)

    def __getitem__(self, index):
        return F.slice_(self, index)

    @property
    def T(self):
        return F.swap_last(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return F.mean(self, axis=axis, keepdims=keepdims)

    def exp(self):
        return F.exp(self)

    def log(self):
        return F.log(self)

    def sqrt(self):
        return F.sqrt(self)

    def sigmoid(self):
        return F.sigmoid(self)


class Tape:
    """
    Append-only record of operations, in topological order by construction.

    Use as a context manager to make it the active tape; only ops with at
    least one input on the active tape are recorded.
    """

    def __init__(self, name: str = "tape"):
        self.name = name
        self.nodes: List[Node] = []
        self.recording = True
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def owns(self, tensor) -> bool:
        return isinstance(tensor, Tensor) and tensor.node is not None and tensor.node.tape is self

    def _append(self, function: Function, inputs, output: np.ndarray) -> Tensor:
        node = Node(self, len(self.nodes), function, tuple(inputs), None)
        out = Tensor(output, node)
        node.output = out
        self.nodes.append(node)
        return out

    def watch(self, value) -> Tensor:
        """
        Register a leaf; gradients can be taken with respect to it.
        """
        if self.owns(value):
            return value
        data = np.array(value.data if isinstance(value, Tensor) else value, dtype=np.float64)
        return self._append(Leaf(data), (), data)

    @contextmanager
    def paused(self):
        previous = self.recording
        self.recording = False
        try:
            yield self
        finally:
            self.recording = previous

    def replay(self) -> bool:
        """
        Recompute every node from the recorded leaves and constants and check
        that each value is reproduced bit for bit.
        """
        values = []
        for node in self.nodes:
            if isinstance(node.function, Leaf):
                value = node.function.value
            else:
                args = [values[x.node.index] if self.owns(x) else x.data for x in node.inputs]
                value = np.asarray(node.function.forward(*args), dtype=np.float64)
            if value.shape != node.output.shape or not np.array_equal(value, node.output.data, equal_nan=True):
                log.warning("Replay mismatch at node %d (%s)", node.index, node.function.name)
                return False
            values.append(value)
        return True

    def to_json(self) -> str:
        """
        Dump op kinds, inputs and shapes for inspection.
        """
        rows = []
        for node in self.nodes:
            rows.append({
                "index": node.index,
                "op": node.function.name,
                "inputs": [x.node.index if self.owns(x) else "const" for x in node.inputs],
                "shape": list(node.output.shape),
                **node.function.describe(),
            })
        return json.dumps({"tape": self.name, "nodes": rows}, indent=2)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def record(function: Function, *inputs) -> Tensor:
    """
    Run a primitive forward and append it to the active tape when any input
    is tracked there.

    Raises:
        ShapeError: When the inputs have incompatible shapes.
        NumericalError: When the result holds NaN or Inf (debug mode).
    """
    inputs = tuple(as_tensor(x) for x in inputs)
    try:
        output = function.forward(*(x.data for x in inputs))
    except ValueError as e:
        shapes = ", ".join(str(x.shape) for x in inputs)
        raise ShapeError(f"{function.name}: incompatible shapes {shapes}: {e}") from None
    output = np.asarray(output, dtype=np.float64)
    if _CHECK_FINITE.get() and not np.isfinite(output).all():
        shapes = ", ".join(str(x.shape) for x in inputs)
        raise NumericalError(f"{function.name} produced non-finite values (input shapes {shapes})")

    tape = _ACTIVE_TAPE.get()
    if tape is not None and tape.recording and any(tape.owns(x) for x in inputs):
        return tape._append(function, inputs, output)
    return Tensor(output)


def backward(tape: Tape, output: Tensor, wrt: Sequence[Tensor], create_graph: bool = False) -> List[Tensor]:
    """
    Reverse-mode gradients of a scalar output with respect to tensors on the tape.

    Args:
        tape (Tape): Tape holding the computation.
        output (Tensor): Scalar result.
        wrt (Sequence[Tensor]): Tensors recorded on `tape`.
        create_graph (bool): Record the backward pass so that the returned
            gradients can be differentiated again.

    Returns:
        List[Tensor]: One gradient per `wrt` entry, shaped like it.
    """
    if output.size != 1:
        raise AutodiffError(f"backward needs a scalar output, got shape {output.shape}")
    for i, w in enumerate(wrt):
        if not tape.owns(w):
            raise AutodiffError(f"wrt[{i}] with shape {w.shape} is not on tape '{tape.name}'")

    results = {w.node.index: None for w in wrt}
    if not tape.owns(output):
        return [Tensor(np.zeros(w.shape)) for w in wrt]

    stop = min(results)
    grads = {output.node.index: Tensor(np.ones_like(output.data))}

    previous = tape.recording
    tape.recording = bool(create_graph)
    token = _ACTIVE_TAPE.set(tape)
    try:
        for index in range(output.node.index, stop - 1, -1):
            grad = grads.pop(index, None)
            if grad is None:
                continue
            if index in results:
                results[index] = grad
            node = tape.nodes[index]
            if isinstance(node.function, Leaf):
                continue
            input_grads = node.function.backward(grad, node.inputs, node.output)
            for x, g in zip(node.inputs, input_grads):
                if g is None or not tape.owns(x) or x.node.index < stop:
                    continue
                if g.shape != x.shape:
                    raise ShapeError(f"{node.function.name} backward: gradient {g.shape} for input {x.shape}")
                i = x.node.index
                grads[i] = g if i not in grads else grads[i] + g
    finally:
        _ACTIVE_TAPE.reset(token)
        tape.recording = previous

    return [results[w.node.index] if results[w.node.index] is not None else Tensor(np.zeros(w.shape))
            for w in wrt]


from . import functional as F  # noqa: E402
